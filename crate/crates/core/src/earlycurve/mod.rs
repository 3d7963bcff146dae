//! Staged learning-curve models.
//!
//! Each stage of a training curve is modelled as
//! `L(k) = 1 / (a0·k² + a1·k + a2) + a3` with non-negative coefficients and
//! absolute step `k`. A new stage starts when the metric jumps by more than
//! `xi` (relative) after five steady steps. Fitted curves extrapolate the
//! final metric of a partially trained configuration.

mod fit;
mod io;
mod nnls;

pub use fit::{
    detect_plateau, fit_curve, fit_single, fit_stage, partition_stages, predict_final, stage_break,
    FitConfig,
};
pub use io::{read_metric_trace, write_metric_trace};
pub use nnls::nnls;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("metric trace is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("invalid metric trace: {0}")]
    InvalidTrace(String),
    #[error("a stage fit needs at least 4 points, got {0}")]
    Underdetermined(usize),
    #[error("prediction needs {required} steps of trace, have {have}")]
    InsufficientSteps { required: u64, have: u64 },
    #[error("asked for the top {mcnt} of {count} models")]
    TooFewModels { mcnt: usize, count: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub metric: f64,
}

/// Observed metric values at strictly increasing steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CurvePoint>", into = "Vec<CurvePoint>")]
pub struct MetricTrace {
    points: Vec<CurvePoint>,
}

impl MetricTrace {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self, CurveError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.metric > 0.0 && p.metric.is_finite()) {
                return Err(CurveError::InvalidTrace(format!(
                    "metric at step {} must be positive, got {}",
                    p.step, p.metric
                )));
            }
            if i > 0 && points[i - 1].step >= p.step {
                return Err(CurveError::InvalidTrace(format!(
                    "steps must increase strictly: {} after {}",
                    p.step,
                    points[i - 1].step
                )));
            }
        }
        Ok(Self { points })
    }

    /// Metrics at steps `0, 1, 2, ...`.
    pub fn from_metrics(metrics: &[f64]) -> Result<Self, CurveError> {
        Self::new(
            metrics
                .iter()
                .enumerate()
                .map(|(k, &metric)| CurvePoint { step: k as u64, metric })
                .collect(),
        )
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    /// Steps covered, counting from step zero.
    pub fn covered_steps(&self) -> u64 {
        self.points.last().map_or(0, |p| p.step + 1)
    }

    pub fn push(&mut self, point: CurvePoint) -> Result<(), CurveError> {
        if let Some(last) = self.points.last() {
            if last.step >= point.step {
                return Err(CurveError::InvalidTrace(format!(
                    "step {} does not follow {}",
                    point.step, last.step
                )));
            }
        }
        if !(point.metric > 0.0 && point.metric.is_finite()) {
            return Err(CurveError::InvalidTrace(format!("metric {} must be positive", point.metric)));
        }
        self.points.push(point);
        Ok(())
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> MetricTrace {
        MetricTrace {
            points: self.points[..n.min(self.points.len())].to_vec(),
        }
    }

    /// Points with `step < steps`.
    pub fn truncate_steps(&self, steps: u64) -> MetricTrace {
        MetricTrace {
            points: self.points.iter().copied().take_while(|p| p.step < steps).collect(),
        }
    }
}

impl TryFrom<Vec<CurvePoint>> for MetricTrace {
    type Error = CurveError;
    fn try_from(points: Vec<CurvePoint>) -> Result<Self, Self::Error> {
        MetricTrace::new(points)
    }
}

impl From<MetricTrace> for Vec<CurvePoint> {
    fn from(t: MetricTrace) -> Self {
        t.points
    }
}

/// One stage over steps `[l, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub l: u64,
    pub r: u64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Stage {
    pub fn value(&self, k: u64) -> f64 {
        let k = k as f64;
        1.0 / (self.a0 * k * k + self.a1 * k + self.a2) + self.a3
    }

    pub fn contains(&self, k: u64) -> bool {
        self.l <= k && k < self.r
    }
}

/// Stages partitioning `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedCurve {
    pub horizon: u64,
    pub stages: Vec<Stage>,
}

impl StagedCurve {
    /// Value at step `k`; steps at or past the horizon use the last stage.
    pub fn predict(&self, k: u64) -> f64 {
        let last = self.stages.last().expect("curve has at least one stage");
        if k >= last.l {
            return last.value(k);
        }
        let i = self.stages.partition_point(|s| s.r <= k);
        self.stages[i].value(k)
    }

    /// Sum of squared residuals over the observed points.
    pub fn residual(&self, trace: &MetricTrace) -> f64 {
        trace
            .points()
            .iter()
            .map(|p| (p.metric - self.predict(p.step)).powi(2))
            .sum()
    }

    pub fn is_partition(&self) -> bool {
        !self.stages.is_empty()
            && self.stages[0].l == 0
            && self.stages.last().unwrap().r == self.horizon
            && self.stages.windows(2).all(|w| w[0].r == w[1].l)
            && self.stages.iter().all(|s| s.l < s.r)
    }
}

pub fn predict_metric(curve: &StagedCurve, k: u64) -> f64 {
    curve.predict(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Lower is better (losses).
    #[default]
    Minimize,
    Maximize,
}

/// The best `mcnt` identifiers by predicted metric; ties go to the
/// lexicographically smaller identifier.
pub fn rank_models(
    predictions: &[(String, f64)],
    mcnt: usize,
    direction: Direction,
) -> Result<Vec<String>, CurveError> {
    if mcnt > predictions.len() {
        return Err(CurveError::TooFewModels {
            mcnt,
            count: predictions.len(),
        });
    }
    let mut order: Vec<&(String, f64)> = predictions.iter().collect();
    order.sort_by(|a, b| {
        let by_metric = match direction {
            Direction::Minimize => a.1.total_cmp(&b.1),
            Direction::Maximize => b.1.total_cmp(&a.1),
        };
        by_metric.then_with(|| a.0.cmp(&b.0))
    });
    Ok(order.into_iter().take(mcnt).map(|p| p.0.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(k, m)| (k.to_string(), *m)).collect()
    }

    #[test]
    fn ranking() {
        let p = preds(&[("h1", 0.3), ("h2", 0.1), ("h3", 0.2)]);
        assert_eq!(rank_models(&p, 2, Direction::Minimize).unwrap(), ["h2", "h3"]);
        assert_eq!(rank_models(&p, 3, Direction::Minimize).unwrap(), ["h2", "h3", "h1"]);
        assert_eq!(rank_models(&p, 1, Direction::Maximize).unwrap(), ["h1"]);
        let tie = preds(&[("b", 0.5), ("c", 0.5), ("a", 0.5)]);
        assert_eq!(rank_models(&tie, 3, Direction::Minimize).unwrap(), ["a", "b", "c"]);
        assert!(matches!(rank_models(&p, 4, Direction::Minimize), Err(CurveError::TooFewModels { .. })));
    }

    #[test]
    fn single_stage_closed_form() {
        let c = StagedCurve {
            horizon: 10,
            stages: vec![Stage { l: 0, r: 10, a0: 0.0, a1: 1.0, a2: 1.0, a3: 0.0 }],
        };
        assert_eq!(predict_metric(&c, 0), 1.0);
        assert!((predict_metric(&c, 9) - 0.1).abs() < 1e-15);
        assert!((predict_metric(&c, 99) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn boundary_uses_right_stage() {
        let c = StagedCurve {
            horizon: 20,
            stages: vec![
                Stage { l: 0, r: 10, a0: 0.0, a1: 0.0, a2: 1.0, a3: 0.0 },
                Stage { l: 10, r: 20, a0: 0.0, a1: 0.0, a2: 2.0, a3: 0.0 },
            ],
        };
        assert_eq!(c.predict(9), 1.0);
        assert_eq!(c.predict(10), 0.5);
        assert!(c.is_partition());
    }

    #[test]
    fn trace_validation() {
        assert!(MetricTrace::from_metrics(&[1.0, 0.0]).is_err());
        let dup = vec![CurvePoint { step: 1, metric: 1.0 }, CurvePoint { step: 1, metric: 0.5 }];
        assert!(MetricTrace::new(dup).is_err());
        let mut t = MetricTrace::from_metrics(&[1.0]).unwrap();
        assert!(t.push(CurvePoint { step: 0, metric: 1.0 }).is_err());
        t.push(CurvePoint { step: 3, metric: 0.9 }).unwrap();
        assert_eq!(t.covered_steps(), 4);
    }
}
