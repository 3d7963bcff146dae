use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curves::{gen_curve, SyntheticModelSpec};
use super::profile::{default_checkpoint_speed, CheckpointProfile, PerfProfile};
use super::WorkloadError;
use crate::earlycurve::{Direction, MetricTrace};
use crate::market::Catalog;

/// Where a job's metric values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CurveSource {
    Synthetic(SyntheticModelSpec),
    Recorded { trace: MetricTrace },
}

impl CurveSource {
    /// Metric points for steps `< max_steps`.
    pub fn metrics(&self, max_steps: u64) -> MetricTrace {
        match self {
            CurveSource::Synthetic(spec) => gen_curve(spec, max_steps),
            CurveSource::Recorded { trace } => trace.truncate_steps(max_steps),
        }
    }

    /// Reference final metric: the noiseless model value at `max_steps`,
    /// or the last recorded value.
    pub fn true_final(&self, max_steps: u64) -> f64 {
        match self {
            CurveSource::Synthetic(spec) => spec.value(max_steps),
            CurveSource::Recorded { trace } => trace.truncate_steps(max_steps).last().map_or(f64::NAN, |p| p.metric),
        }
    }
}

/// One hyper-parameter setting to tune.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: String,
    pub algorithm: String,
    pub curve: CurveSource,
    pub perf: PerfProfile,
    pub checkpoint: CheckpointProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub seed: u64,
    pub max_trial_steps: u64,
    #[serde(default)]
    pub direction: Direction,
    pub jobs: Vec<JobSpec>,
}

impl Workload {
    pub fn validate(&self, catalog: &Catalog) -> Result<(), WorkloadError> {
        let mut ids = BTreeSet::new();
        if self.jobs.is_empty() || self.max_trial_steps == 0 {
            return Err(WorkloadError::Invalid("workload needs jobs and a positive step budget".into()));
        }
        for j in &self.jobs {
            if !ids.insert(j.id.as_str()) {
                return Err(WorkloadError::Invalid(format!("duplicate job id {}", j.id)));
            }
            if let CurveSource::Synthetic(spec) = &j.curve {
                spec.validate()?;
                if spec.horizon() < self.max_trial_steps {
                    return Err(WorkloadError::Invalid(format!("curve of {} ends before max_trial_steps", j.id)));
                }
            }
            if !(j.perf.cov >= 0.0 && j.perf.cov <= 0.1) {
                return Err(WorkloadError::Invalid(format!("{}: step-time COV must be in [0, 0.1]", j.id)));
            }
            if !(j.checkpoint.model_size_mb > 0.0) {
                return Err(WorkloadError::Invalid(format!("{}: model size must be positive", j.id)));
            }
            for inst in catalog.iter() {
                let spb = j.perf.base_spb.get(&inst.name).copied();
                let speed = j.checkpoint.speed_mb_per_s.get(&inst.name).copied();
                match (spb, speed) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => {}
                    _ => return Err(WorkloadError::UnknownInstance(format!("{} (job {})", inst.name, j.id))),
                }
            }
        }
        Ok(())
    }

    pub fn job(&self, id: &str) -> Option<&JobSpec> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorkloadError> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WorkloadError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

struct Algorithm {
    name: &'static str,
    /// Seconds per step on a 2-vCPU instance.
    spb: f64,
    /// Parallel efficiency exponent: time scales as `cpus^-gamma`.
    gamma: f64,
    model_mb: f64,
    two_stage: bool,
}

pub const ALGORITHMS: [&str; 6] = ["LoR", "SVM", "GBTR", "LiR", "AlexNet", "ResNet"];

const DEMO: [Algorithm; 6] = [
    Algorithm { name: "LoR", spb: 45.0, gamma: 0.55, model_mb: 4.0, two_stage: false },
    Algorithm { name: "SVM", spb: 60.0, gamma: 0.45, model_mb: 12.0, two_stage: false },
    Algorithm { name: "GBTR", spb: 90.0, gamma: 0.8, model_mb: 60.0, two_stage: false },
    Algorithm { name: "LiR", spb: 30.0, gamma: 0.35, model_mb: 2.0, two_stage: false },
    Algorithm { name: "AlexNet", spb: 150.0, gamma: 0.7, model_mb: 240.0, two_stage: true },
    Algorithm { name: "ResNet", spb: 210.0, gamma: 0.75, model_mb: 180.0, two_stage: true },
];

/// Relative speed of an instance family on identical work.
fn family_factor(name: &str) -> f64 {
    match name.split('.').next().unwrap_or("") {
        "r3" => 1.2,
        "m4" => 0.9,
        _ => 1.0,
    }
}

/// Six algorithms with a 4 × 4 grid of hyper-parameter settings each.
/// Coefficients, speeds and noise seeds are drawn from `seed`.
pub fn demo_workload(catalog: &Catalog, seed: u64, max_trial_steps: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = max_trial_steps * 2;
    let mut jobs = Vec::new();
    for alg in &DEMO {
        // Instance speed quirks are per algorithm, shared by its settings.
        let quirk: BTreeMap<&str, f64> =
            catalog.iter().map(|i| (i.name.as_str(), rng.random_range(0.9..1.1))).collect();
        let floor = rng.random_range(0.05..0.3);
        let mut floors: Vec<f64> = (0..16).map(|h| floor * (1.0 + 0.12 * h as f64)).collect();
        // Shuffle which setting gets which floor.
        for i in (1..floors.len()).rev() {
            floors.swap(i, rng.random_range(0..=i));
        }
        for (h, &a3) in floors.iter().enumerate() {
            let lr = h / 4;
            let batch = h % 4;
            let a1 = (0.01 + 0.015 * lr as f64) * (max_trial_steps as f64 / 60.0).recip() * rng.random_range(0.8..1.2);
            let a0 = a1 * a1 * rng.random_range(0.0..0.02);
            let a2 = 1.0 / rng.random_range(1.0..2.5);
            let a = [a0, a1, a2, a3];
            let noise_seed = rng.random();
            let curve = if alg.two_stage && lr >= 2 {
                // Fast early convergence, then a learning-rate decay drop.
                let a = [a0 * 100.0, a1 * 10.0, a2, a3];
                let at = (max_trial_steps as f64 * rng.random_range(0.35..0.55)) as u64;
                SyntheticModelSpec::two_stage(a, at, rng.random_range(0.35..0.45), horizon, 0.002, noise_seed)
            } else {
                SyntheticModelSpec::single(a, horizon, 0.002, noise_seed)
            };
            let batch_factor = 0.8 + 0.15 * batch as f64;
            let base_spb = catalog
                .iter()
                .map(|i| {
                    let cpus = i.cpus as f64;
                    let spb = alg.spb * (2.0 / cpus).powf(alg.gamma) * family_factor(&i.name) * quirk[i.name.as_str()];
                    (i.name.clone(), spb * batch_factor)
                })
                .collect();
            let speed_mb_per_s = catalog
                .iter()
                .map(|i| (i.name.clone(), default_checkpoint_speed(i.cpus)))
                .collect();
            jobs.push(JobSpec {
                id: format!("{}-{:02}", alg.name, h),
                algorithm: alg.name.to_string(),
                curve: CurveSource::Synthetic(curve),
                perf: PerfProfile { base_spb, cov: 0.05 },
                checkpoint: CheckpointProfile {
                    model_size_mb: alg.model_mb,
                    speed_mb_per_s,
                },
            });
        }
    }
    Workload {
        name: "demo".into(),
        seed,
        max_trial_steps,
        direction: Direction::Minimize,
        jobs,
    }
}
