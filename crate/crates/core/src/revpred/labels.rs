use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RevPredError;
use crate::market::{PriceTrace, GRID_SECONDS};
use crate::HOUR;

/// Range of the random premium added to the current price when drawing a
/// maximum price at inference time.
pub const INFERENCE_DELTA_RANGE: (f64, f64) = (0.00001, 0.2);

/// How the trimmed delta sum is normalised when deriving training maximum
/// prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaDenominator {
    /// Drop the `floor(L/5)` smallest and largest deltas and average the rest.
    #[default]
    Retained,
    /// Sum the deltas at sorted indices `0.2L < i < 0.8L` and divide by `0.6L`.
    Literal,
}

/// Trimmed mean of absolute price deltas.
pub fn trimmed_delta_mean(deltas: &[f64], denominator: DeltaDenominator) -> Result<f64, RevPredError> {
    let n = deltas.len();
    if n < 5 {
        return Err(RevPredError::TooFewDeltas(n));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(match denominator {
        DeltaDenominator::Retained => {
            let cut = n / 5;
            let kept = &sorted[cut..n - cut];
            kept.iter().sum::<f64>() / kept.len() as f64
        }
        DeltaDenominator::Literal => {
            let (lo, hi) = (0.2 * n as f64, 0.8 * n as f64);
            let sum: f64 = sorted
                .iter()
                .enumerate()
                .filter(|&(i, _)| (i as f64) > lo && (i as f64) < hi)
                .map(|(_, d)| d)
                .sum();
            sum / (0.6 * n as f64)
        }
    })
}

/// Maximum price used to label a training sample at `t`: the current price
/// plus the trimmed mean of the minute-to-minute price moves over the
/// preceding hour.
pub fn training_max_price(
    trace: &PriceTrace,
    t: i64,
    denominator: DeltaDenominator,
) -> Result<f64, RevPredError> {
    if t - HOUR < trace.start() {
        return Err(RevPredError::InsufficientHistory { t });
    }
    let per_hour = HOUR / GRID_SECONDS;
    let mut deltas = Vec::with_capacity(per_hour as usize - 1);
    for k in 1..per_hour {
        let tau = t - k * GRID_SECONDS;
        deltas.push((trace.price_at(tau)? - trace.price_at(tau - GRID_SECONDS)?).abs());
    }
    Ok(trace.price_at(t)? + trimmed_delta_mean(&deltas, denominator)?)
}

/// Maximum price drawn at inference time: the current price plus a uniform
/// premium from [`INFERENCE_DELTA_RANGE`].
pub fn inference_max_price<R: Rng + ?Sized>(current_price: f64, rng: &mut R) -> f64 {
    current_price + rng.random_range(INFERENCE_DELTA_RANGE.0..=INFERENCE_DELTA_RANGE.1)
}

/// True when any price in `(t, t + 1h]` strictly exceeds `max_price`.
pub fn label_sample(trace: &PriceTrace, t: i64, max_price: f64) -> Result<bool, RevPredError> {
    if t + HOUR > trace.end() {
        return Err(RevPredError::InsufficientLookahead { t });
    }
    trace.price_at(t)?;
    let pts = trace.points();
    let first = pts.partition_point(|p| p.timestamp <= t);
    Ok(pts[first..]
        .iter()
        .take_while(|p| p.timestamp <= t + HOUR)
        .any(|p| p.price > max_price))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::synth;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const WORKED: [f64; 10] = [0.0, 0.0, 0.01, 0.01, 0.02, 0.02, 0.03, 0.03, 0.05, 0.10];

    #[test]
    fn worked_trimmed_mean() {
        let mut shuffled = WORKED;
        shuffled.reverse();
        let m = trimmed_delta_mean(&shuffled, DeltaDenominator::Retained).unwrap();
        assert!((m - 0.02).abs() < 1e-15);
        // literal indices 3..=7 over 6
        let lit = trimmed_delta_mean(&WORKED, DeltaDenominator::Literal).unwrap();
        assert!((lit - 0.11 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn small_window_denominators_differ() {
        let d = [0.1, 0.2, 0.3, 0.4, 0.5];
        // retained drops one from each end: (0.2 + 0.3 + 0.4) / 3
        assert!((trimmed_delta_mean(&d, DeltaDenominator::Retained).unwrap() - 0.3).abs() < 1e-15);
        // literal keeps i = 2, 3 and divides by 3
        assert!((trimmed_delta_mean(&d, DeltaDenominator::Literal).unwrap() - 0.7 / 3.0).abs() < 1e-15);
        assert!(matches!(
            trimmed_delta_mean(&d[..4], DeltaDenominator::Retained),
            Err(RevPredError::TooFewDeltas(4))
        ));
    }

    #[test]
    fn constant_hour_has_zero_premium() {
        let tr = synth::flat("x", 0, 120, 0.2);
        assert_eq!(training_max_price(&tr, 3600, DeltaDenominator::Retained).unwrap(), 0.2);
    }

    #[test]
    fn equal_deltas_survive_trimming() {
        let p: Vec<f64> = (0..=60).map(|i| 1.0 + 0.01 * (i % 2) as f64).collect();
        let tr = PriceTrace::from_prices("x", 0, 60, &p).unwrap();
        let b = training_max_price(&tr, 3600, DeltaDenominator::Retained).unwrap();
        assert!((b - (tr.price_at(3600).unwrap() + 0.01)).abs() < 1e-12);
    }

    #[test]
    fn labels() {
        let tr = synth::flat("x", 0, 180, 0.1);
        assert!(!label_sample(&tr, 3600, 0.15).unwrap());
        assert!(!label_sample(&tr, 3600, 0.1).unwrap());

        let mut p = vec![0.1; 181];
        p[90] = 0.5;
        let spiky = PriceTrace::from_prices("x", 0, 60, &p).unwrap();
        assert!(label_sample(&spiky, 3600, 0.2).unwrap());
        assert!(matches!(
            label_sample(&spiky, 9000, 0.2),
            Err(RevPredError::InsufficientLookahead { .. })
        ));
    }

    #[test]
    fn inference_premium_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..10_000).map(|_| inference_max_price(0.10, &mut rng) - 0.10).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.100005).abs() < 0.005, "mean {mean}");
        assert!(draws.iter().all(|&u| (0.00001 - 1e-15..=0.2 + 1e-15).contains(&u)));
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(inference_max_price(0.1, &mut a), inference_max_price(0.1, &mut b));
    }

    proptest! {
        #[test]
        fn max_price_never_below_current(p in prop::collection::vec(0.01f64..1.0, 61..90), denom_literal: bool) {
            let tr = PriceTrace::from_prices("x", 0, 60, &p).unwrap();
            let d = if denom_literal { DeltaDenominator::Literal } else { DeltaDenominator::Retained };
            let t = tr.end() - 60 * ((p.len() as i64 - 61) / 2);
            let b = training_max_price(&tr, t, d).unwrap();
            prop_assert!(b >= tr.price_at(t).unwrap());
        }
    }
}
