//! Revocation-probability prediction.
//!
//! Datasets are built from regularized price traces: each sample is the
//! feature history of the past 59 minutes, the present feature record and a
//! training maximum price derived from recent price volatility; it is labelled
//! positive when the price exceeds that maximum within the next hour.
//! Two models are trainable: a stacked-LSTM sequence model with a dense
//! encoder for the present record, and a logistic-regression baseline.

mod dataset;
mod eval;
mod features;
mod labels;
mod model;
mod nn;

pub use dataset::{build_dataset, ClassBalance, Dataset, DatasetConfig, LabeledSample, SampleRef};
pub use eval::{evaluate, Evaluation, DECISION_THRESHOLD};
pub use features::{engineer_features, FeatureRecord, FEATURE_COUNT, HISTORY_LEN};
pub use labels::{
    inference_max_price, label_sample, training_max_price, trimmed_delta_mean, DeltaDenominator,
    INFERENCE_DELTA_RANGE,
};
pub use model::{calibrate, train, Architecture, ModelConfig, Normalizer, PredictorModel};

#[doc(hidden)]
pub mod gradcheck {
    //! Finite-difference hooks for the trainer's analytic gradients.
    pub use super::nn::{logistic_loss_and_grad, seq_loss_and_grad, Example, SeqShape};
}

use thiserror::Error;

use crate::market::MarketError;

#[derive(Debug, Error)]
pub enum RevPredError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("need one hour of history before {t}")]
    InsufficientHistory { t: i64 },
    #[error("need one hour of lookahead after {t}")]
    InsufficientLookahead { t: i64 },
    #[error("need at least 5 price deltas, got {0}")]
    TooFewDeltas(usize),
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error("dataset is untrainable: positive fraction is {phi_plus}")]
    Untrainable { phi_plus: f64 },
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("train/eval split overlaps: evaluation starts at {eval_from}, training labels run to {train_until}")]
    SplitOverlap { train_until: i64, eval_from: i64 },
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
