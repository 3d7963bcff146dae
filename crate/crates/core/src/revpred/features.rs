use chrono::{DateTime, Datelike, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use super::RevPredError;
use crate::market::{avg_price, PriceTrace};
use crate::HOUR;

/// Minutes of history fed to the sequence encoder.
pub const HISTORY_LEN: usize = 59;
pub const FEATURE_COUNT: usize = 6;

/// Engineered features of one price observation. All windows are the hour
/// ending at the observation instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub current_price: f64,
    pub avg_price_1h: f64,
    pub num_changes_1h: u32,
    /// Seconds since the current price was posted.
    pub time_since_last_change: i64,
    /// Monday to Friday, UTC.
    pub is_workday: bool,
    pub hour_of_day: u8,
}

impl FeatureRecord {
    /// Numeric encoding; prices are divided by `price_scale` and durations
    /// expressed in minutes.
    pub fn to_vector(&self, price_scale: f64) -> [f64; FEATURE_COUNT] {
        [
            self.current_price / price_scale,
            self.avg_price_1h / price_scale,
            self.num_changes_1h as f64,
            self.time_since_last_change as f64 / 60.0,
            if self.is_workday { 1.0 } else { 0.0 },
            self.hour_of_day as f64,
        ]
    }
}

fn calendar(t: i64) -> (bool, u8) {
    let dt = DateTime::from_timestamp(t, 0).expect("timestamp in chrono range");
    let workday = !matches!(dt.weekday(), Weekday::Sat | Weekday::Sun);
    (workday, dt.hour() as u8)
}

/// Features at instant `t`, which needs a full hour of trace before it.
pub fn engineer_features(trace: &PriceTrace, t: i64) -> Result<FeatureRecord, RevPredError> {
    if t - HOUR < trace.start() {
        return Err(RevPredError::InsufficientHistory { t });
    }
    let current_price = trace.price_at(t)?;
    let avg_price_1h = avg_price(trace, t, HOUR)?;
    let pts = trace.points();
    let idx = trace.index_at(t);

    let mut num_changes_1h = 0;
    let mut j = idx;
    while j >= 1 && pts[j].timestamp > t - HOUR {
        if pts[j].price != pts[j - 1].price {
            num_changes_1h += 1;
        }
        j -= 1;
    }

    let mut since = trace.start();
    for j in (1..=idx).rev() {
        if pts[j].price != pts[j - 1].price {
            since = pts[j].timestamp;
            break;
        }
    }

    let (is_workday, hour_of_day) = calendar(t);
    Ok(FeatureRecord {
        current_price,
        avg_price_1h,
        num_changes_1h,
        time_since_last_change: t - since,
        is_workday,
        hour_of_day,
    })
}

/// Features at every grid point of a regular trace, computed in one pass.
/// Entry `k` belongs to grid index `k + 60`, the first point with an hour
/// of history.
pub(crate) fn feature_table(trace: &PriceTrace, grid: i64) -> Vec<FeatureRecord> {
    let pts = trace.points();
    let per_hour = (HOUR / grid) as usize;
    if pts.len() <= per_hour {
        return Vec::new();
    }
    let mut run_start = vec![0usize; pts.len()];
    let mut changes = vec![0u32; pts.len()];
    for i in 1..pts.len() {
        let changed = pts[i].price != pts[i - 1].price;
        run_start[i] = if changed { i } else { run_start[i - 1] };
        changes[i] = changes[i - 1] + changed as u32;
    }
    (per_hour..pts.len())
        .map(|i| {
            let t = pts[i].timestamp;
            let reference = pts[i - per_hour].price;
            let mut acc = 0.0;
            for p in &pts[i - per_hour..i] {
                acc += (p.price - reference) * grid as f64;
            }
            let (is_workday, hour_of_day) = calendar(t);
            FeatureRecord {
                current_price: pts[i].price,
                avg_price_1h: reference + acc / HOUR as f64,
                num_changes_1h: changes[i] - changes[i - per_hour],
                time_since_last_change: t - pts[run_start[i]].timestamp,
                is_workday,
                hour_of_day,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{regularize, synth, PricePoint};

    // 2017-05-06 is a Saturday.
    const SAT_1330: i64 = 1_494_077_400;

    #[test]
    fn constant_hour() {
        let tr = synth::flat("x", 0, 120, 0.2);
        let f = engineer_features(&tr, 3600).unwrap();
        assert_eq!(f.num_changes_1h, 0);
        assert_eq!(f.avg_price_1h, f.current_price);
        assert_eq!(f.time_since_last_change, 3600);
    }

    #[test]
    fn one_change_ten_minutes_ago() {
        let mut p = vec![0.1; 50];
        p.extend(vec![0.2; 20]);
        let tr = PriceTrace::from_prices("x", 0, 60, &p).unwrap();
        let f = engineer_features(&tr, 60 * 60).unwrap();
        assert_eq!(f.time_since_last_change, 600);
        assert_eq!(f.num_changes_1h, 1);
        assert_eq!(f.current_price, 0.2);
    }

    #[test]
    fn saturday_afternoon() {
        let tr = synth::flat("x", SAT_1330 - 7200, 240, 0.2);
        let f = engineer_features(&tr, SAT_1330).unwrap();
        assert!(!f.is_workday);
        assert_eq!(f.hour_of_day, 13);
        let f = engineer_features(&tr, SAT_1330 - 2 * 86400 + 7200).unwrap_or(f);
        assert_eq!(f.hour_of_day, 13);
    }

    #[test]
    fn needs_history() {
        let tr = synth::flat("x", 0, 120, 0.2);
        assert!(matches!(
            engineer_features(&tr, 3000),
            Err(RevPredError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn table_agrees_with_pointwise_features() {
        let raw = synth::volatile_market("x", SAT_1330, 600, synth::MarketShape::around(0.1), 11);
        let tr = regularize(&raw, 60);
        let table = feature_table(&tr, 60);
        assert_eq!(table.len(), tr.len() - 60);
        for (k, rec) in table.iter().enumerate() {
            let t = tr.points()[k + 60].timestamp;
            assert_eq!(*rec, engineer_features(&tr, t).unwrap(), "at {t}");
        }
    }

    #[test]
    fn raw_change_points_count_like_grid() {
        let raw = PriceTrace::new(
            "x",
            vec![PricePoint::new(0, 0.1), PricePoint::new(3000, 0.2), PricePoint::new(7200, 0.2)],
        )
        .unwrap();
        let a = engineer_features(&raw, 3600).unwrap();
        let b = engineer_features(&regularize(&raw, 60), 3600).unwrap();
        assert_eq!(a, b);
    }
}
