use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::feature_table;
use super::labels::{label_sample, training_max_price, DeltaDenominator};
use super::{FeatureRecord, RevPredError, HISTORY_LEN};
use crate::market::{regularize, PriceTrace, GRID_SECONDS};
use crate::HOUR;

/// Fractions of positive and negative labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl ClassBalance {
    pub fn from_counts(positives: usize, total: usize) -> Self {
        let phi_plus = if total == 0 { 0.0 } else { positives as f64 / total as f64 };
        Self {
            phi_plus,
            phi_minus: 1.0 - phi_plus,
        }
    }

    pub fn balanced() -> Self {
        Self {
            phi_plus: 0.5,
            phi_minus: 0.5,
        }
    }

    /// Both classes present.
    pub fn is_trainable(&self) -> bool {
        self.phi_plus > 0.0 && self.phi_minus > 0.0
    }

    /// Loss weight of positive samples (φ₋, scaled so a balanced set gives
    /// unit weights).
    pub fn positive_weight(&self) -> f64 {
        2.0 * self.phi_minus
    }

    pub fn negative_weight(&self) -> f64 {
        2.0 * self.phi_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Seconds between consecutive samples; a positive multiple of 60.
    pub stride: i64,
    pub denominator: DeltaDenominator,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            stride: GRID_SECONDS,
            denominator: DeltaDenominator::Retained,
        }
    }
}

/// A sample as stored in a [`Dataset`]: the features live in the shared
/// per-minute table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRef {
    pub t: i64,
    /// Index of the present record in [`Dataset::features`].
    pub index: usize,
    pub max_price: f64,
    pub label: bool,
}

/// A self-contained training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub t: i64,
    /// Records for minutes `t-59 .. t-1`.
    pub history: Vec<FeatureRecord>,
    pub present: FeatureRecord,
    pub max_price: f64,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trace_id: String,
    pub stride: i64,
    /// Timestamp of `features[0]`; entries are one minute apart.
    pub feature_start: i64,
    pub features: Vec<FeatureRecord>,
    pub samples: Vec<SampleRef>,
    pub balance: ClassBalance,
}

/// Slides a one-minute window over the trace, emitting a sample wherever a
/// full history and a full hour of lookahead are available.
pub fn build_dataset(trace: &PriceTrace, config: DatasetConfig) -> Result<Dataset, RevPredError> {
    assert!(
        config.stride > 0 && config.stride % GRID_SECONDS == 0,
        "stride must be a positive multiple of the grid"
    );
    let grid = if trace.is_regular(GRID_SECONDS) {
        trace.clone()
    } else {
        regularize(trace, GRID_SECONDS)
    };
    let features = feature_table(&grid, GRID_SECONDS);
    let per_hour = (HOUR / GRID_SECONDS) as usize;
    let pts = grid.points();
    // The first sample needs HISTORY_LEN earlier feature records.
    let first = per_hour + HISTORY_LEN;
    if pts.len() <= first + per_hour {
        return Err(RevPredError::EmptyDataset(format!(
            "trace {} spans {} minutes; need more than {}",
            trace.instance(),
            pts.len().saturating_sub(1),
            first + per_hour
        )));
    }
    let step = (config.stride / GRID_SECONDS) as usize;
    let mut samples = Vec::new();
    let mut j = first;
    while j + per_hour < pts.len() {
        let t = pts[j].timestamp;
        let max_price = training_max_price(&grid, t, config.denominator)?;
        let label = label_sample(&grid, t, max_price)?;
        samples.push(SampleRef {
            t,
            index: j - per_hour,
            max_price,
            label,
        });
        j += step;
    }
    let positives = samples.iter().filter(|s| s.label).count();
    Ok(Dataset {
        trace_id: trace.instance().to_string(),
        stride: config.stride,
        feature_start: pts[per_hour].timestamp,
        features,
        balance: ClassBalance::from_counts(positives, samples.len()),
        samples,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn history(&self, s: &SampleRef) -> &[FeatureRecord] {
        &self.features[s.index - HISTORY_LEN..s.index]
    }

    pub fn present(&self, s: &SampleRef) -> &FeatureRecord {
        &self.features[s.index]
    }

    pub fn materialize(&self, i: usize) -> LabeledSample {
        let s = &self.samples[i];
        LabeledSample {
            t: s.t,
            history: self.history(s).to_vec(),
            present: *self.present(s),
            max_price: s.max_price,
            label: s.label,
        }
    }

    fn with_samples(&self, samples: Vec<SampleRef>) -> Dataset {
        let positives = samples.iter().filter(|s| s.label).count();
        Dataset {
            trace_id: self.trace_id.clone(),
            stride: self.stride,
            feature_start: self.feature_start,
            features: self.features.clone(),
            balance: ClassBalance::from_counts(positives, samples.len()),
            samples,
        }
    }

    /// Chronological split. Training keeps samples whose one-hour label
    /// window closes by `train_until`; evaluation keeps samples at or after
    /// `eval_from`.
    pub fn split(&self, train_until: i64, eval_from: i64) -> Result<(Dataset, Dataset), RevPredError> {
        if eval_from < train_until {
            return Err(RevPredError::SplitOverlap {
                train_until,
                eval_from,
            });
        }
        let train = self.samples.iter().filter(|s| s.t + HOUR <= train_until).copied().collect();
        let eval = self.samples.iter().filter(|s| s.t >= eval_from).copied().collect();
        Ok((self.with_samples(train), self.with_samples(eval)))
    }

    /// File name of this dataset in a cache directory.
    pub fn cache_name(trace_id: &str, stride: i64) -> String {
        format!("{trace_id}.stride{stride}.dataset.json")
    }

    pub fn save(&self, path: &Path) -> Result<(), RevPredError> {
        let file = DatasetFile::from(self);
        std::fs::write(path, serde_json::to_vec(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset, RevPredError> {
        let file: DatasetFile = serde_json::from_slice(&std::fs::read(path)?)?;
        file.try_into()
    }
}

/// Column-oriented on-disk form of a [`Dataset`].
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    version: u32,
    trace_id: String,
    stride: i64,
    feature_start: i64,
    current_price: Vec<f64>,
    avg_price_1h: Vec<f64>,
    num_changes_1h: Vec<u32>,
    time_since_last_change: Vec<i64>,
    is_workday: Vec<bool>,
    hour_of_day: Vec<u8>,
    sample_t: Vec<i64>,
    sample_index: Vec<usize>,
    sample_max_price: Vec<f64>,
    sample_label: Vec<bool>,
    balance: ClassBalance,
}

const DATASET_FORMAT: &str = "spottune-revpred-dataset";

impl From<&Dataset> for DatasetFile {
    fn from(d: &Dataset) -> Self {
        let f = &d.features;
        let s = &d.samples;
        DatasetFile {
            format: DATASET_FORMAT.into(),
            version: 1,
            trace_id: d.trace_id.clone(),
            stride: d.stride,
            feature_start: d.feature_start,
            current_price: f.iter().map(|r| r.current_price).collect(),
            avg_price_1h: f.iter().map(|r| r.avg_price_1h).collect(),
            num_changes_1h: f.iter().map(|r| r.num_changes_1h).collect(),
            time_since_last_change: f.iter().map(|r| r.time_since_last_change).collect(),
            is_workday: f.iter().map(|r| r.is_workday).collect(),
            hour_of_day: f.iter().map(|r| r.hour_of_day).collect(),
            sample_t: s.iter().map(|x| x.t).collect(),
            sample_index: s.iter().map(|x| x.index).collect(),
            sample_max_price: s.iter().map(|x| x.max_price).collect(),
            sample_label: s.iter().map(|x| x.label).collect(),
            balance: d.balance,
        }
    }
}

impl TryFrom<DatasetFile> for Dataset {
    type Error = RevPredError;

    fn try_from(f: DatasetFile) -> Result<Self, Self::Error> {
        if f.format != DATASET_FORMAT {
            return Err(RevPredError::InvalidModel(format!("not a dataset file: {}", f.format)));
        }
        let n = f.current_price.len();
        let m = f.sample_t.len();
        let lens_ok = [
            f.avg_price_1h.len(),
            f.num_changes_1h.len(),
            f.time_since_last_change.len(),
            f.is_workday.len(),
            f.hour_of_day.len(),
        ]
        .iter()
        .all(|&l| l == n)
            && [f.sample_index.len(), f.sample_max_price.len(), f.sample_label.len()]
                .iter()
                .all(|&l| l == m)
            && f.sample_index.iter().all(|&i| i >= HISTORY_LEN && i < n);
        if !lens_ok {
            return Err(RevPredError::InvalidModel("inconsistent dataset columns".into()));
        }
        let features = (0..n)
            .map(|i| FeatureRecord {
                current_price: f.current_price[i],
                avg_price_1h: f.avg_price_1h[i],
                num_changes_1h: f.num_changes_1h[i],
                time_since_last_change: f.time_since_last_change[i],
                is_workday: f.is_workday[i],
                hour_of_day: f.hour_of_day[i],
            })
            .collect();
        let samples = (0..m)
            .map(|i| SampleRef {
                t: f.sample_t[i],
                index: f.sample_index[i],
                max_price: f.sample_max_price[i],
                label: f.sample_label[i],
            })
            .collect();
        Ok(Dataset {
            trace_id: f.trace_id,
            stride: f.stride,
            feature_start: f.feature_start,
            features,
            samples,
            balance: f.balance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{synth, PriceTrace};
    use crate::revpred::engineer_features;
    use proptest::prelude::*;

    #[test]
    fn constant_trace_is_untrainable() {
        let d = build_dataset(&synth::flat("x", 0, 180, 0.1), DatasetConfig::default()).unwrap();
        assert!(!d.is_empty());
        assert!(d.samples.iter().all(|s| !s.label));
        assert_eq!(d.balance.phi_plus, 0.0);
        assert!(!d.balance.is_trainable());
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(
            build_dataset(&synth::flat("x", 0, 178, 0.1), DatasetConfig::default()),
            Err(RevPredError::EmptyDataset(_))
        ));
    }

    #[test]
    fn spike_labels_match_exhaustive_scan() {
        let mut p = vec![0.1; 400];
        for v in &mut p[250..255] {
            *v = 0.4;
        }
        let tr = PriceTrace::from_prices("x", 0, 60, &p).unwrap();
        let d = build_dataset(&tr, DatasetConfig::default()).unwrap();
        for s in &d.samples {
            // oracle: minute scan of the following hour against the stored max price
            let m = (s.t / 60) as usize;
            let expect = (m + 1..=m + 60).any(|k| p[k] > s.max_price);
            assert_eq!(s.label, expect, "t={}", s.t);
        }
        // spike at minute 250 with zero premium: minutes 190..=249 see it coming
        let pos: Vec<i64> = d.samples.iter().filter(|s| s.label).map(|s| s.t / 60).collect();
        assert_eq!(pos, (190..250).collect::<Vec<_>>());
    }

    #[test]
    fn stride_halves_sample_count() {
        let tr = synth::volatile_market("x", 0, 600, synth::MarketShape::around(0.1), 2);
        let a = build_dataset(&tr, DatasetConfig::default()).unwrap();
        let b = build_dataset(&tr, DatasetConfig { stride: 120, ..Default::default() }).unwrap();
        assert_eq!(b.len(), a.len().div_ceil(2));
    }

    #[test]
    fn materialized_history_matches_pointwise_features() {
        let tr = synth::volatile_market("x", 1_494_000_000, 400, synth::MarketShape::around(0.1), 4);
        let d = build_dataset(&tr, DatasetConfig::default()).unwrap();
        let s = d.materialize(10);
        assert_eq!(s.history.len(), HISTORY_LEN);
        assert_eq!(s.present, engineer_features(&tr, s.t).unwrap());
        assert_eq!(s.history[58], engineer_features(&tr, s.t - 60).unwrap());
        assert_eq!(s.history[0], engineer_features(&tr, s.t - 59 * 60).unwrap());
    }

    #[test]
    fn split_is_chronological() {
        let tr = synth::warning_spike("x", 0, 2000, 1);
        let d = build_dataset(&tr, DatasetConfig::default()).unwrap();
        let (train, eval) = d.split(60_000, 60_000).unwrap();
        assert!(train.samples.iter().all(|s| s.t + 3600 <= 60_000));
        assert!(eval.samples.iter().all(|s| s.t >= 60_000));
        assert!(d.split(60_000, 50_000).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let tr = synth::warning_spike("x", 0, 600, 3);
        let d = build_dataset(&tr, DatasetConfig::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("spottune-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(Dataset::cache_name(&d.trace_id, d.stride));
        d.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), d);
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        #[test]
        fn balance_sums_to_one(pos in 0usize..10_000, extra in 1usize..10_000) {
            let b = ClassBalance::from_counts(pos, pos + extra);
            prop_assert_eq!(b.phi_plus + b.phi_minus, 1.0);
        }
    }
}
