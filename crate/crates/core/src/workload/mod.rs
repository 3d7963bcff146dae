//! Synthetic tuning workloads: metric curves from the staged model family,
//! per-instance step-duration and checkpoint profiles, and bundles of jobs.

mod bundle;
mod curves;
mod profile;

pub use bundle::{demo_workload, CurveSource, JobSpec, Workload, ALGORITHMS};
pub use curves::{gen_curve, replay_trace, SyntheticModelSpec};
pub use profile::{
    checkpoint_time, default_checkpoint_speed, max_model_size_mb, step_duration, CheckpointProfile,
    CheckpointTime, PerfProfile, CHECKPOINT_LIMIT_SECONDS, MB_PER_GB,
};

use thiserror::Error;

use crate::earlycurve::CurveError;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("no profile entry for instance {0}")]
    UnknownInstance(String),
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
