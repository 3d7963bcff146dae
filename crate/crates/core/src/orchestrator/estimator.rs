use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use crate::market::{PriceTrace, GRID_SECONDS};
use crate::revpred::{engineer_features, FeatureRecord, PredictorModel, HISTORY_LEN};
use crate::HOUR;

/// Probability that an acquisition made at `t` with `max_price` is revoked
/// within the hour. `None` marks the instance type as unavailable.
pub trait RevocationEstimator: Sync {
    fn name(&self) -> &str;
    fn probability(&self, trace: &PriceTrace, t: i64, max_price: f64) -> Option<f64>;
}

/// Same probability everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEstimator(pub f64);

impl RevocationEstimator for ConstantEstimator {
    fn name(&self) -> &str {
        "constant"
    }

    fn probability(&self, _: &PriceTrace, _: i64, _: f64) -> Option<f64> {
        Some(self.0.clamp(0.0, 1.0))
    }
}

/// Fraction of past one-hour windows, starting every `stride` seconds over
/// the last `lookback` seconds, in which the price exceeded `max_price`.
#[derive(Debug, Clone, Copy)]
pub struct HistoricalEstimator {
    pub lookback: i64,
    pub stride: i64,
}

impl Default for HistoricalEstimator {
    fn default() -> Self {
        Self {
            lookback: 24 * HOUR,
            stride: 10 * GRID_SECONDS,
        }
    }
}

impl RevocationEstimator for HistoricalEstimator {
    fn name(&self) -> &str {
        "historical"
    }

    fn probability(&self, trace: &PriceTrace, t: i64, max_price: f64) -> Option<f64> {
        let pts = trace.points();
        let first = (t - self.lookback).max(trace.start());
        let mut windows = 0usize;
        let mut hits = 0usize;
        let mut s = t - HOUR;
        while s >= first {
            let lo = pts.partition_point(|p| p.timestamp <= s);
            let hi = pts.partition_point(|p| p.timestamp <= s + HOUR);
            windows += 1;
            if pts[lo..hi].iter().any(|p| p.price > max_price) {
                hits += 1;
            }
            s -= self.stride;
        }
        Some(if windows == 0 { 0.0 } else { hits as f64 / windows as f64 })
    }
}

/// History embedding and present features of a trace at one instant.
type Embedded = Option<(Vec<f64>, FeatureRecord)>;

/// Trained predictors, one per instance type. Feature histories are cached
/// per instance and minute since many jobs are placed at the same tick.
pub struct PredictorEstimator {
    models: BTreeMap<String, PredictorModel>,
    cache: Mutex<HashMap<(String, i64), Embedded>>,
}

impl PredictorEstimator {
    pub fn new(models: BTreeMap<String, PredictorModel>) -> Self {
        Self {
            models,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn embedding(&self, model: &PredictorModel, trace: &PriceTrace, t: i64) -> Option<(Vec<f64>, FeatureRecord)> {
        let history: Vec<FeatureRecord> = (1..=HISTORY_LEN as i64)
            .rev()
            .map(|k| engineer_features(trace, t - k * GRID_SECONDS).ok())
            .collect::<Option<_>>()?;
        let present = engineer_features(trace, t).ok()?;
        Some((model.embed_history(&history), present))
    }
}

impl RevocationEstimator for PredictorEstimator {
    fn name(&self) -> &str {
        "revpred"
    }

    fn probability(&self, trace: &PriceTrace, t: i64, max_price: f64) -> Option<f64> {
        let model = self.models.get(trace.instance())?;
        let minute = t.div_euclid(GRID_SECONDS) * GRID_SECONDS;
        let key = (trace.instance().to_string(), minute);
        let cached = self.cache.lock().expect("cache lock").get(&key).cloned();
        let entry = match cached {
            Some(e) => e,
            None => {
                let e = self.embedding(model, trace, minute);
                self.cache.lock().expect("cache lock").insert(key, e.clone());
                e
            }
        };
        let (embedding, present) = entry?;
        Some(model.predict_embedded(&embedding, &present, max_price))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::synth;

    #[test]
    fn historical_frequency() {
        let mut p = vec![0.1; 600];
        // one spike at minute 300: windows starting in [240, 299] see it
        p[300] = 1.0;
        let tr = PriceTrace::from_prices("x", 0, 60, &p).unwrap();
        let est = HistoricalEstimator { lookback: 10 * HOUR, stride: 60 };
        let t = 599 * 60;
        let prob = est.probability(&tr, t, 0.5).unwrap();
        // windows start at t-3600 down to t-36000 clipped at 0 → minutes 539..=0
        assert!((prob - 60.0 / 540.0).abs() < 1e-12, "{prob}");
        assert_eq!(est.probability(&tr, t, 2.0).unwrap(), 0.0);
        assert_eq!(est.probability(&tr, 1800, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn constant_clamps() {
        let tr = synth::flat("x", 0, 10, 0.1);
        assert_eq!(ConstantEstimator(1.5).probability(&tr, 0, 0.2), Some(1.0));
    }
}
