//! Synthetic minute-grid price traces for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::collections::BTreeMap;

use super::{Catalog, PriceTrace, GRID_SECONDS};

fn build(instance: &str, start: i64, prices: &[f64]) -> PriceTrace {
    PriceTrace::from_prices(instance, start, GRID_SECONDS, prices)
        .expect("generated prices are positive")
}

/// `minutes + 1` grid points at a constant price.
pub fn flat(instance: &str, start: i64, minutes: usize, price: f64) -> PriceTrace {
    build(instance, start, &vec![price; minutes + 1])
}

/// Knobs for [`volatile_market`].
#[derive(Debug, Clone, Copy)]
pub struct MarketShape {
    /// Long-run price level, USD/hour.
    pub base: f64,
    /// Mean minutes between ordinary price moves.
    pub mean_hold_minutes: f64,
    /// Relative size of ordinary moves.
    pub step_scale: f64,
    /// Per-minute probability that a spike starts.
    pub spike_rate: f64,
    /// Spike height as a multiple of the current price.
    pub spike_height: (f64, f64),
    /// Spike length in minutes.
    pub spike_minutes: (usize, usize),
}

impl MarketShape {
    pub fn around(base: f64) -> Self {
        Self {
            base,
            mean_hold_minutes: 25.0,
            step_scale: 0.04,
            spike_rate: 1.0 / 150.0,
            spike_height: (1.6, 4.0),
            spike_minutes: (2, 15),
        }
    }
}

/// Mean-reverting piecewise-constant price walk with occasional spikes.
pub fn volatile_market(
    instance: &str,
    start: i64,
    minutes: usize,
    shape: MarketShape,
    seed: u64,
) -> PriceTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = Vec::with_capacity(minutes + 1);
    let mut level = shape.base;
    let mut spike_left = 0usize;
    let mut spike_price = 0.0;
    for _ in 0..=minutes {
        if spike_left > 0 {
            spike_left -= 1;
            prices.push(spike_price);
            continue;
        }
        if rng.random_bool(shape.spike_rate.clamp(0.0, 1.0)) {
            spike_left = rng.random_range(shape.spike_minutes.0..=shape.spike_minutes.1);
            spike_price = level * rng.random_range(shape.spike_height.0..=shape.spike_height.1);
            prices.push(spike_price);
            spike_left -= 1;
            continue;
        }
        if rng.random_bool((1.0 / shape.mean_hold_minutes).clamp(0.0, 1.0)) {
            let pull = 0.2 * (shape.base - level) / shape.base;
            let step = rng.random_range(-1.0..=1.0) * shape.step_scale + pull * shape.step_scale * 5.0;
            level = (level * (1.0 + step)).max(shape.base * 0.3);
            // Quote to 0.1 milli-dollar like the real market.
            level = (level * 1e4).round() / 1e4;
        }
        prices.push(level);
    }
    build(instance, start, &prices)
}

/// One [`volatile_market`] trace per catalog instance, each centred on a
/// random fraction (20–35 %) of its on-demand price.
pub fn catalog_market(
    catalog: &Catalog,
    start: i64,
    minutes: usize,
    seed: u64,
) -> BTreeMap<String, PriceTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    catalog
        .iter()
        .map(|inst| {
            let base = inst.on_demand_price * rng.random_range(0.2..0.35);
            let shape = MarketShape::around((base * 1e4).round() / 1e4);
            let trace = volatile_market(&inst.name, start, minutes, shape, rng.random());
            (inst.name.clone(), trace)
        })
        .collect()
}

/// A market whose revocations are fully determined by the current price:
/// every spike is preceded by exactly one hour at a depressed "warning" level
/// (half the base), and ordinary periods never see a price rise. Samples are
/// positive exactly when the current price sits at the warning level.
pub fn warning_spike(instance: &str, start: i64, minutes: usize, seed: u64) -> PriceTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = Vec::with_capacity(minutes + 1);
    while prices.len() <= minutes {
        let base = (rng.random_range(0.100..0.110) * 1e4_f64).round() / 1e4;
        let calm = rng.random_range(120..300);
        let spike = rng.random_range(5..15);
        prices.extend(std::iter::repeat_n(base, calm));
        prices.extend(std::iter::repeat_n(base * 0.5, 60));
        prices.extend(std::iter::repeat_n(0.30, spike));
    }
    prices.truncate(minutes + 1);
    build(instance, start, &prices)
}

/// Flat `base` price interrupted every `period_minutes` by a one-minute spike.
/// Spike `k` is `base + 1 + k * step` so that an instance bought during one
/// spike, with any maximum price up to `step` above it, is revoked by the next.
pub fn escalating_spikes(
    instance: &str,
    start: i64,
    minutes: usize,
    base: f64,
    period_minutes: usize,
    step: f64,
) -> PriceTrace {
    let prices: Vec<f64> = (0..=minutes)
        .map(|m| {
            if m > 0 && m % period_minutes == 0 {
                base + 1.0 + (m / period_minutes) as f64 * step
            } else {
                base
            }
        })
        .collect();
    build(instance, start, &prices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_sized() {
        let a = volatile_market("x", 0, 500, MarketShape::around(0.1), 7);
        let b = volatile_market("x", 0, 500, MarketShape::around(0.1), 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 501);
        assert!(a.is_regular(60));
        assert_eq!(warning_spike("x", 0, 1000, 3).len(), 1001);
        assert_eq!(flat("x", 0, 10, 0.2).len(), 11);
    }

    #[test]
    fn escalating_spikes_rise() {
        let t = escalating_spikes("x", 0, 200, 0.03, 55, 0.5);
        assert!((t.price_at(55 * 60).unwrap() - 1.53).abs() < 1e-12);
        assert!((t.price_at(110 * 60).unwrap() - 2.03).abs() < 1e-12);
        assert_eq!(t.price_at(56 * 60).unwrap(), 0.03);
    }
}
