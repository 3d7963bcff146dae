use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::earlycurve::{read_metric_trace, CurvePoint, MetricTrace, Stage, StagedCurve};

/// Generator for a metric curve: staged model coefficients plus
/// multiplicative noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelSpec {
    pub stages: Vec<Stage>,
    /// Standard deviation of the multiplicative noise.
    pub sigma: f64,
    /// Steps between metric points.
    pub cadence: u64,
    pub seed: u64,
}

impl SyntheticModelSpec {
    pub fn single(a: [f64; 4], horizon: u64, sigma: f64, seed: u64) -> Self {
        Self {
            stages: vec![Stage { l: 0, r: horizon, a0: a[0], a1: a[1], a2: a[2], a3: a[3] }],
            sigma,
            cadence: 1,
            seed,
        }
    }

    /// A curve that drops to `factor` times its first-stage value at step
    /// `at`. The second stage stays in the model family.
    pub fn two_stage(a: [f64; 4], at: u64, factor: f64, horizon: u64, sigma: f64, seed: u64) -> Self {
        Self {
            stages: vec![
                Stage { l: 0, r: at, a0: a[0], a1: a[1], a2: a[2], a3: a[3] },
                Stage {
                    l: at,
                    r: horizon,
                    a0: a[0] / factor,
                    a1: a[1] / factor,
                    a2: a[2] / factor,
                    a3: a[3] * factor,
                },
            ],
            sigma,
            cadence: 1,
            seed,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.stages.last().map_or(0, |s| s.r)
    }

    pub fn curve(&self) -> StagedCurve {
        StagedCurve {
            horizon: self.horizon(),
            stages: self.stages.clone(),
        }
    }

    /// Noiseless value at step `k`.
    pub fn value(&self, k: u64) -> f64 {
        self.curve().predict(k)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let c = self.curve();
        if !c.is_partition() {
            return Err(WorkloadError::Invalid("curve stages must partition [0, horizon)".into()));
        }
        let ok = self.stages.iter().all(|s| {
            [s.a0, s.a1, s.a2, s.a3].iter().all(|v| *v >= 0.0 && v.is_finite())
                && s.a0 * (s.l as f64).powi(2) + s.a1 * s.l as f64 + s.a2 > 0.0
        });
        if !ok || !(self.sigma >= 0.0) || self.cadence == 0 {
            return Err(WorkloadError::Invalid("bad curve coefficients, noise or cadence".into()));
        }
        Ok(())
    }
}

/// Metric points at steps `0, cadence, 2·cadence, … < upto_step`. Noise
/// is drawn sequentially from the generator's seed, so a shorter trace is a
/// prefix of a longer one. Each factor `1 + η` has `η ~ N(0, σ)` truncated to
/// `|η| ≤ min(5σ, 0.99)`.
pub fn gen_curve(spec: &SyntheticModelSpec, upto_step: u64) -> MetricTrace {
    let curve = spec.curve();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bound = (5.0 * spec.sigma).min(0.99);
    let normal = Normal::new(0.0, spec.sigma.max(0.0)).expect("finite sigma");
    let points = (0..upto_step.min(spec.horizon()))
        .step_by(spec.cadence.max(1) as usize)
        .map(|k| {
            let eta = if spec.sigma > 0.0 {
                loop {
                    let e: f64 = normal.sample(&mut rng);
                    if e.abs() <= bound {
                        break e;
                    }
                }
            } else {
                0.0
            };
            CurvePoint { step: k, metric: curve.predict(k) * (1.0 + eta) }
        })
        .collect();
    MetricTrace::new(points).expect("generated metrics are positive and ordered")
}

/// Loads a recorded two-column `step,metric` log.
pub fn replay_trace<R: Read>(source: R) -> Result<MetricTrace, WorkloadError> {
    Ok(read_metric_trace(source)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_reciprocal() {
        let t = gen_curve(&SyntheticModelSpec::single([0.0, 1.0, 1.0, 0.0], 50, 0.0, 1), 50);
        for p in t.points() {
            assert_eq!(p.metric, 1.0 / (p.step as f64 + 1.0));
        }
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let spec = SyntheticModelSpec::single([1e-4, 0.05, 1.0, 0.2], 2000, 0.01, 9);
        let t = gen_curve(&spec, 2000);
        for p in t.points() {
            let clean = spec.value(p.step);
            assert!((p.metric / clean - 1.0).abs() <= 0.05 + 1e-12);
        }
        assert_eq!(t, gen_curve(&spec, 2000));
        assert_eq!(gen_curve(&spec, 700), t.prefix(700));
    }

    #[test]
    fn two_stage_drop() {
        let spec = SyntheticModelSpec::two_stage([1e-5, 0.02, 1.0, 0.3], 500, 0.4, 1000, 0.0, 0);
        spec.validate().unwrap();
        let ratio = spec.value(500) / SyntheticModelSpec::single([1e-5, 0.02, 1.0, 0.3], 1000, 0.0, 0).value(500);
        assert!((ratio - 0.4).abs() < 1e-12);
    }

    #[test]
    fn cadence_and_replay() {
        let mut spec = SyntheticModelSpec::single([0.0, 1.0, 1.0, 0.0], 20, 0.0, 1);
        spec.cadence = 5;
        let steps: Vec<u64> = gen_curve(&spec, 20).points().iter().map(|p| p.step).collect();
        assert_eq!(steps, [0, 5, 10, 15]);
        assert!(replay_trace("0,1\n0,2\n".as_bytes()).is_err());
        assert!(replay_trace("0,1\n1,0\n".as_bytes()).is_err());
        assert_eq!(replay_trace("step,metric\n0,1\n1,0.5\n".as_bytes()).unwrap().len(), 2);
    }
}
