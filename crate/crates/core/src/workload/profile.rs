use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::WorkloadError;

/// A checkpoint must finish within the revocation notice.
pub const CHECKPOINT_LIMIT_SECONDS: f64 = 120.0;
pub const MB_PER_GB: f64 = 1024.0;

/// Measured checkpoint speeds (MB/s) at 1 and 16 vCPUs.
const SPEED_1_CPU: f64 = 62.83;
const SPEED_16_CPU: f64 = 134.22;

/// Seconds per step on each instance type, with multiplicative jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfProfile {
    pub base_spb: BTreeMap<String, f64>,
    /// Coefficient of variation of a single step's duration.
    pub cov: f64,
}

/// One step's duration: lognormal with mean `base_spb` and the profile's
/// coefficient of variation.
pub fn step_duration<R: Rng + ?Sized>(profile: &PerfProfile, instance: &str, rng: &mut R) -> Result<f64, WorkloadError> {
    let base = *profile
        .base_spb
        .get(instance)
        .ok_or_else(|| WorkloadError::UnknownInstance(instance.to_string()))?;
    if profile.cov <= 0.0 {
        return Ok(base);
    }
    let s2 = (1.0 + profile.cov * profile.cov).ln();
    let d = LogNormal::new(base.ln() - s2 / 2.0, s2.sqrt()).expect("valid lognormal");
    Ok(d.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointProfile {
    pub model_size_mb: f64,
    pub speed_mb_per_s: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTime {
    pub seconds: f64,
    /// Completes within [`CHECKPOINT_LIMIT_SECONDS`].
    pub feasible: bool,
}

pub fn checkpoint_time(profile: &CheckpointProfile, instance: &str) -> Result<CheckpointTime, WorkloadError> {
    let speed = *profile
        .speed_mb_per_s
        .get(instance)
        .ok_or_else(|| WorkloadError::UnknownInstance(instance.to_string()))?;
    let seconds = profile.model_size_mb / speed;
    Ok(CheckpointTime {
        seconds,
        feasible: seconds <= CHECKPOINT_LIMIT_SECONDS,
    })
}

/// Largest model that checkpoints within the notice at `speed` MB/s.
pub fn max_model_size_mb(speed_mb_per_s: f64) -> f64 {
    speed_mb_per_s * CHECKPOINT_LIMIT_SECONDS
}

/// Checkpoint speed for an instance with `cpus` vCPUs, interpolated in
/// log2(cpus) between the 1- and 16-vCPU measurements.
pub fn default_checkpoint_speed(cpus: u32) -> f64 {
    let x = (cpus.max(1) as f64).log2().min(4.0) / 4.0;
    SPEED_1_CPU + x * (SPEED_16_CPU - SPEED_1_CPU)
}
