use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{ClassBalance, Dataset, SampleRef};
use super::nn::{self, Example, SeqShape};
use super::{FeatureRecord, RevPredError, FEATURE_COUNT, HISTORY_LEN};
use crate::par;

/// Width of the present input: the features plus the maximum price.
const PRESENT_WIDTH: usize = FEATURE_COUNT + 1;
/// Inputs of the logistic baseline: history mean and spread, present, max price.
const LOGISTIC_WIDTH: usize = 3 * FEATURE_COUNT + 1;
const MODEL_FORMAT: &str = "spottune-revpred-model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    Sequence {
        hidden: usize,
        layers: usize,
        dense: usize,
        dense_layers: usize,
    },
    Logistic,
}

impl Architecture {
    pub fn sequence(hidden: usize) -> Self {
        Architecture::Sequence {
            hidden,
            layers: 3,
            dense: hidden,
            dense_layers: 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Sequence { .. } => "sequence",
            Architecture::Logistic => "logistic",
        }
    }

    fn seq_shape(&self) -> Option<SeqShape> {
        match *self {
            Architecture::Sequence {
                hidden,
                layers,
                dense,
                dense_layers,
            } => Some(SeqShape {
                input: FEATURE_COUNT,
                hidden,
                layers,
                present: PRESENT_WIDTH,
                dense,
                dense_layers,
            }),
            Architecture::Logistic => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip.
    pub clip: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::sequence(32),
            epochs: 20,
            batch_size: 64,
            learning_rate: 0.005,
            clip: 5.0,
            seed: 0,
        }
    }
}

/// Per-input standardisation. Prices are first divided by `price_scale`
/// (the on-demand price of the instance type).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub price_scale: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Statistics of the records and maximum prices used by `samples`.
    pub fn fit(dataset: &Dataset, price_scale: f64) -> Self {
        let mut sum = [0.0; PRESENT_WIDTH];
        let mut sq = [0.0; PRESENT_WIDTH];
        let mut n = 0usize;
        let (lo, hi) = match (dataset.samples.first(), dataset.samples.last()) {
            (Some(a), Some(b)) => (a.index - HISTORY_LEN, b.index + 1),
            _ => (0, 0),
        };
        for r in &dataset.features[lo..hi] {
            for (k, v) in r.to_vector(price_scale).iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
            n += 1;
        }
        let mut mean = vec![0.0; PRESENT_WIDTH];
        let mut std = vec![1.0; PRESENT_WIDTH];
        let finish = |s: f64, q: f64, n: usize| {
            if n == 0 {
                return (0.0, 1.0);
            }
            let m = s / n as f64;
            let v = (q / n as f64 - m * m).max(0.0);
            (m, if v.sqrt() > 1e-9 { v.sqrt() } else { 1.0 })
        };
        for k in 0..FEATURE_COUNT {
            (mean[k], std[k]) = finish(sum[k], sq[k], n);
        }
        let (ms, mq) = dataset.samples.iter().fold((0.0, 0.0), |(s, q), x| {
            let v = x.max_price / price_scale;
            (s + v, q + v * v)
        });
        (mean[FEATURE_COUNT], std[FEATURE_COUNT]) = finish(ms, mq, dataset.samples.len());
        Self { price_scale, mean, std }
    }

    fn features(&self, r: &FeatureRecord) -> [f64; FEATURE_COUNT] {
        let mut v = r.to_vector(self.price_scale);
        for (k, x) in v.iter_mut().enumerate() {
            *x = (*x - self.mean[k]) / self.std[k];
        }
        v
    }

    fn max_price(&self, p: f64) -> f64 {
        (p / self.price_scale - self.mean[FEATURE_COUNT]) / self.std[FEATURE_COUNT]
    }
}

/// Calibrates a raw score trained under class-balancing weights back to the
/// observed class prior.
pub fn calibrate(p_hat: f64, balance: ClassBalance) -> f64 {
    let num = p_hat * balance.phi_minus;
    let den = num + (1.0 - p_hat) * balance.phi_plus;
    if den <= 0.0 {
        p_hat
    } else {
        num / den
    }
}

/// A trained revocation predictor together with its input normalisation and
/// training class balance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub format: String,
    pub version: u32,
    pub trace_id: String,
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub balance: ClassBalance,
    pub params: Vec<f64>,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
    /// Free-form metadata such as the training cut-off.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

impl PredictorModel {
    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    /// Summary of the history that does not depend on the maximum price:
    /// the normalised sequence, or its mean and spread for the baseline.
    pub fn embed_history(&self, history: &[FeatureRecord]) -> Vec<f64> {
        let rows: Vec<[f64; FEATURE_COUNT]> = history.iter().map(|r| self.normalizer.features(r)).collect();
        match self.architecture() {
            Architecture::Sequence { .. } => rows.concat(),
            Architecture::Logistic => {
                let n = rows.len().max(1) as f64;
                let mut out = vec![0.0; 2 * FEATURE_COUNT];
                for k in 0..FEATURE_COUNT {
                    let m = rows.iter().map(|r| r[k]).sum::<f64>() / n;
                    let v = rows.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / n;
                    out[k] = m;
                    out[FEATURE_COUNT + k] = v.sqrt();
                }
                out
            }
        }
    }

    fn example(&self, embedding: &[f64], present: &FeatureRecord, max_price: f64) -> Example {
        let mut p = self.normalizer.features(present).to_vec();
        p.push(self.normalizer.max_price(max_price));
        match self.architecture() {
            Architecture::Sequence { .. } => Example {
                history: embedding.to_vec(),
                present: p,
                target: 0.0,
                weight: 1.0,
            },
            Architecture::Logistic => {
                let mut x = embedding.to_vec();
                x.extend(p);
                Example {
                    history: Vec::new(),
                    present: x,
                    target: 0.0,
                    weight: 1.0,
                }
            }
        }
    }

    fn logit(&self, ex: &Example) -> f64 {
        match self.config.architecture.seq_shape() {
            Some(shape) => nn::seq_logit(&shape, &self.params, ex),
            None => nn::logistic_logit(&self.params, &ex.present),
        }
    }

    /// Uncalibrated score from a precomputed history embedding.
    pub fn predict_raw_embedded(&self, embedding: &[f64], present: &FeatureRecord, max_price: f64) -> f64 {
        nn::probability(self.logit(&self.example(embedding, present, max_price)))
    }

    /// Calibrated revocation probability within the next hour.
    pub fn predict(&self, history: &[FeatureRecord], present: &FeatureRecord, max_price: f64) -> f64 {
        self.predict_embedded(&self.embed_history(history), present, max_price)
    }

    pub fn predict_embedded(&self, embedding: &[f64], present: &FeatureRecord, max_price: f64) -> f64 {
        calibrate(self.predict_raw_embedded(embedding, present, max_price), self.balance)
    }

    /// Calibrated probabilities for every sample of `dataset`.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Vec<f64> {
        par::map(&dataset.samples, |s| {
            self.predict(dataset.history(s), dataset.present(s), s.max_price)
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RevPredError> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RevPredError> {
        let m: PredictorModel = serde_json::from_slice(&std::fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), RevPredError> {
        if self.format != MODEL_FORMAT {
            return Err(RevPredError::InvalidModel(format!("unknown format {:?}", self.format)));
        }
        let expected = param_count(self.architecture());
        if self.params.len() != expected {
            return Err(RevPredError::InvalidModel(format!(
                "{} parameters, architecture needs {expected}",
                self.params.len()
            )));
        }
        if self.normalizer.mean.len() != PRESENT_WIDTH || self.normalizer.std.len() != PRESENT_WIDTH {
            return Err(RevPredError::InvalidModel("normalizer width".into()));
        }
        Ok(())
    }
}

fn param_count(arch: Architecture) -> usize {
    match arch.seq_shape() {
        Some(s) => s.param_count(),
        None => LOGISTIC_WIDTH + 1,
    }
}

/// Gradient chunks per minibatch. Fixed so that results do not depend on
/// the machine's core count.
const GRAD_CHUNKS: usize = 8;

/// Trains a predictor on `dataset` with class-balancing loss weights and
/// Adam. Runs are deterministic for a given seed.
pub fn train(dataset: &Dataset, config: &ModelConfig, price_scale: f64) -> Result<PredictorModel, RevPredError> {
    if dataset.is_empty() {
        return Err(RevPredError::EmptyDataset(format!("no samples for {}", dataset.trace_id)));
    }
    if !dataset.balance.is_trainable() {
        return Err(RevPredError::Untrainable {
            phi_plus: dataset.balance.phi_plus,
        });
    }
    assert!(config.batch_size > 0, "batch size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shape = config.architecture.seq_shape();
    let params = match shape {
        Some(s) => s.init(&mut rng),
        None => vec![0.0; LOGISTIC_WIDTH + 1],
    };
    let mut model = PredictorModel {
        format: MODEL_FORMAT.into(),
        version: 1,
        trace_id: dataset.trace_id.clone(),
        config: *config,
        normalizer: Normalizer::fit(dataset, price_scale),
        balance: dataset.balance,
        params,
        loss_history: Vec::with_capacity(config.epochs),
        tags: BTreeMap::new(),
    };
    let (w_pos, w_neg) = (dataset.balance.positive_weight(), dataset.balance.negative_weight());
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let examples: Vec<Example> = batch
                .iter()
                .map(|&i| {
                    let s: &SampleRef = &dataset.samples[i];
                    let mut ex = model.example(&model.embed_history(dataset.history(s)), dataset.present(s), s.max_price);
                    ex.target = if s.label { 1.0 } else { 0.0 };
                    ex.weight = if s.label { w_pos } else { w_neg };
                    ex
                })
                .collect();
            let chunk = examples.len().div_ceil(GRAD_CHUNKS);
            let chunks: Vec<&[Example]> = examples.chunks(chunk).collect();
            let parts = par::map(&chunks, |c| {
                let (l, g) = match shape {
                    Some(s) => nn::seq_loss_and_grad(&s, &model.params, c),
                    None => nn::logistic_loss_and_grad(&model.params, c),
                };
                (l, g, c.len())
            });
            let mut loss = 0.0;
            let mut grad = vec![0.0; model.params.len()];
            let total = examples.len() as f64;
            for (l, g, n) in parts {
                let w = n as f64 / total;
                loss += l * w;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b * w;
                }
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.clip {
                let s = config.clip / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(&mut model.params, &grad);
            epoch_loss += loss * examples.len() as f64;
        }
        model.loss_history.push(epoch_loss / dataset.len() as f64);
    }
    Ok(model)
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::synth;
    use crate::revpred::{build_dataset, DatasetConfig};

    #[test]
    fn calibration_examples() {
        let b = ClassBalance { phi_plus: 0.1, phi_minus: 0.9 };
        assert!((calibrate(0.9, b) - 81.0 / 82.0).abs() < 1e-12);
        assert_eq!(calibrate(0.3, ClassBalance::balanced()), 0.3);
        assert_eq!(calibrate(0.0, b), 0.0);
        assert_eq!(calibrate(1.0, b), 1.0);
    }

    fn small_dataset() -> Dataset {
        let tr = synth::warning_spike("r4.large", 1_494_000_000, 1500, 7);
        build_dataset(&tr, DatasetConfig { stride: 300, ..Default::default() }).unwrap()
    }

    #[test]
    fn untrainable_is_rejected() {
        let d = build_dataset(&synth::flat("x", 0, 300, 0.1), DatasetConfig::default()).unwrap();
        assert!(matches!(
            train(&d, &ModelConfig::default(), 0.133),
            Err(RevPredError::Untrainable { .. })
        ));
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let d = small_dataset();
        let cfg = ModelConfig {
            architecture: Architecture::sequence(4),
            epochs: 2,
            ..Default::default()
        };
        let a = train(&d, &cfg, 0.133).unwrap();
        let b = train(&d, &cfg, 0.133).unwrap();
        assert_eq!(a, b);
        let path = std::env::temp_dir().join(format!("spottune-model-{}.json", std::process::id()));
        a.save(&path).unwrap();
        let c = PredictorModel::load(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(a.predict_dataset(&d), c.predict_dataset(&d));
    }

    #[test]
    fn logistic_loss_decreases() {
        let d = small_dataset();
        let cfg = ModelConfig {
            architecture: Architecture::Logistic,
            epochs: 30,
            learning_rate: 0.05,
            ..Default::default()
        };
        let m = train(&d, &cfg, 0.133).unwrap();
        assert!(m.loss_history.last().unwrap() < &m.loss_history[0]);
        assert!(m.predict_dataset(&d).iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn corrupt_model_is_rejected() {
        let d = small_dataset();
        let cfg = ModelConfig { architecture: Architecture::Logistic, epochs: 1, ..Default::default() };
        let mut m = train(&d, &cfg, 0.133).unwrap();
        m.params.pop();
        assert!(m.validate().is_err());
    }
}
