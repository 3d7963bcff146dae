use serde::{Deserialize, Serialize};

use super::MarketError;

/// Spacing of a regularized trace, in seconds.
pub const GRID_SECONDS: i64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: i64,
    /// USD per hour.
    pub price: f64,
}

impl PricePoint {
    pub fn new(timestamp: i64, price: f64) -> Self {
        Self { timestamp, price }
    }
}

/// Spot prices of one instance type, read as a step function: the price
/// posted at a point holds until the next point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTrace {
    instance: String,
    points: Vec<PricePoint>,
}

impl PriceTrace {
    /// Validates that the trace is non-empty, strictly increasing in time and
    /// carries positive finite prices.
    pub fn new(instance: impl Into<String>, points: Vec<PricePoint>) -> Result<Self, MarketError> {
        if points.is_empty() {
            return Err(MarketError::EmptyTrace);
        }
        for w in points.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(MarketError::InvalidTrace(format!(
                    "timestamps not strictly increasing at {}",
                    w[1].timestamp
                )));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.price > 0.0 && p.price.is_finite())) {
            return Err(MarketError::InvalidTrace(format!(
                "non-positive price {} at {}",
                p.price, p.timestamp
            )));
        }
        Ok(Self {
            instance: instance.into(),
            points,
        })
    }

    /// Builds a regular trace from consecutive per-interval prices.
    pub fn from_prices(
        instance: impl Into<String>,
        start: i64,
        interval: i64,
        prices: &[f64],
    ) -> Result<Self, MarketError> {
        let points = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| PricePoint::new(start + i as i64 * interval, p))
            .collect();
        Self::new(instance, points)
    }

    pub fn instance(&self) -> &str {
        &self.instance
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn start(&self) -> i64 {
        self.points[0].timestamp
    }

    pub fn end(&self) -> i64 {
        self.points[self.points.len() - 1].timestamp
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn covers(&self, t: i64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// True if adjacent points are exactly `interval` seconds apart.
    pub fn is_regular(&self, interval: i64) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].timestamp - w[0].timestamp == interval)
    }

    fn check(&self, t: i64) -> Result<(), MarketError> {
        if self.covers(t) {
            Ok(())
        } else {
            Err(MarketError::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            })
        }
    }

    /// Index of the last point at or before `t`. Caller guarantees `t >= start`.
    pub(crate) fn index_at(&self, t: i64) -> usize {
        self.points.partition_point(|p| p.timestamp <= t) - 1
    }

    /// Posted price at `t`.
    pub fn price_at(&self, t: i64) -> Result<f64, MarketError> {
        self.check(t)?;
        Ok(self.points[self.index_at(t)].price)
    }

    /// Integral of the price step function over `[from, to]`, in
    /// USD·seconds/hour. Divide by 3600 for dollars.
    pub fn integral(&self, from: i64, to: i64) -> Result<f64, MarketError> {
        self.check(from)?;
        self.check(to)?;
        if to <= from {
            return Ok(0.0);
        }
        let mut idx = self.index_at(from);
        let mut cur = from;
        let mut acc = 0.0;
        while cur < to {
            let next = self
                .points
                .get(idx + 1)
                .map_or(to, |p| p.timestamp.min(to));
            acc += self.points[idx].price * (next - cur) as f64;
            cur = next;
            idx += 1;
        }
        Ok(acc)
    }
}

/// Resamples a trace onto a regular grid anchored at its first timestamp.
/// Each grid value is the last raw price at or before the grid instant; the
/// grid stops at the last raw timestamp rounded down to the grid.
pub fn regularize(trace: &PriceTrace, interval: i64) -> PriceTrace {
    assert!(interval > 0, "grid interval must be positive");
    let start = trace.start();
    let steps = (trace.end() - start) / interval;
    let mut idx = 0;
    let mut points = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = start + k * interval;
        while idx + 1 < trace.points.len() && trace.points[idx + 1].timestamp <= t {
            idx += 1;
        }
        points.push(PricePoint::new(t, trace.points[idx].price));
    }
    PriceTrace {
        instance: trace.instance.clone(),
        points,
    }
}

/// Time-weighted mean price over `[t - window, t]`.
pub fn avg_price(trace: &PriceTrace, t: i64, window: i64) -> Result<f64, MarketError> {
    assert!(window > 0, "averaging window must be positive");
    let from = t - window;
    if from < trace.start() {
        return Err(MarketError::InsufficientHistory {
            t,
            needed_from: from,
            start: trace.start(),
        });
    }
    trace.check(from)?;
    trace.check(t)?;
    // Accumulate deviations from the opening price so a constant window
    // averages to exactly that constant.
    let mut idx = trace.index_at(from);
    let reference = trace.points[idx].price;
    let mut cur = from;
    let mut acc = 0.0;
    while cur < t {
        let next = trace.points.get(idx + 1).map_or(t, |p| p.timestamp.min(t));
        acc += (trace.points[idx].price - reference) * (next - cur) as f64;
        cur = next;
        idx += 1;
    }
    Ok(reference + acc / window as f64)
}

/// Earliest trace instant after `t_start` whose price strictly exceeds
/// `max_price`, or `None` if the trace never crosses it.
pub fn revocation_time(
    trace: &PriceTrace,
    t_start: i64,
    max_price: f64,
) -> Result<Option<i64>, MarketError> {
    let price = trace.price_at(t_start)?;
    if price > max_price {
        return Err(MarketError::AcquisitionRejected {
            t: t_start,
            price,
            max_price,
        });
    }
    let first_after = trace.points.partition_point(|p| p.timestamp <= t_start);
    Ok(trace.points[first_after..]
        .iter()
        .find(|p| p.price > max_price)
        .map(|p| p.timestamp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(points: &[(i64, f64)]) -> PriceTrace {
        PriceTrace::new(
            "r4.large",
            points.iter().map(|&(t, p)| PricePoint::new(t, p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn regularize_forward_fills_and_truncates() {
        let r = regularize(&trace(&[(0, 0.10), (150, 0.12)]), 60);
        let got: Vec<_> = r.points().iter().map(|p| (p.timestamp, p.price)).collect();
        assert_eq!(got, vec![(0, 0.10), (60, 0.10), (120, 0.10)]);
    }

    #[test]
    fn regularize_single_point_and_regular_trace() {
        let one = trace(&[(42, 0.3)]);
        assert_eq!(regularize(&one, 60), one);
        let reg = trace(&[(0, 0.1), (60, 0.2), (120, 0.15)]);
        assert_eq!(regularize(&reg, 60), reg);
    }

    #[test]
    fn avg_price_examples() {
        let flat = PriceTrace::from_prices("x", 0, 60, &[0.10; 61]).unwrap();
        assert_eq!(avg_price(&flat, 3600, 3600).unwrap(), 0.10);

        let mut half = vec![0.10; 30];
        half.extend(vec![0.20; 31]);
        let half = PriceTrace::from_prices("x", 0, 60, &half).unwrap();
        assert!((avg_price(&half, 3600, 3600).unwrap() - 0.15).abs() < 1e-12);

        let mut q = vec![0.10; 45];
        q.extend(vec![0.30; 16]);
        let q = PriceTrace::from_prices("x", 0, 60, &q).unwrap();
        assert!((avg_price(&q, 3600, 3600).unwrap() - 0.15).abs() < 1e-12);
    }

    #[test]
    fn avg_price_needs_history() {
        let flat = PriceTrace::from_prices("x", 0, 60, &[0.10; 61]).unwrap();
        assert!(matches!(
            avg_price(&flat, 3000, 3600),
            Err(MarketError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn revocation_examples() {
        let mut prices = vec![0.10; 40];
        prices.extend(vec![0.25; 30]);
        let t = PriceTrace::from_prices("x", 0, 60, &prices).unwrap();
        assert_eq!(revocation_time(&t, 0, 0.5).unwrap(), None);
        assert_eq!(revocation_time(&t, 0, 0.2).unwrap(), Some(40 * 60));
        // boundary: equal price never revokes
        let flat = PriceTrace::from_prices("x", 0, 60, &[0.10; 30]).unwrap();
        assert_eq!(revocation_time(&flat, 0, 0.10).unwrap(), None);
        assert!(matches!(
            revocation_time(&t, 45 * 60, 0.2),
            Err(MarketError::AcquisitionRejected { .. })
        ));
    }

    #[test]
    fn rejects_malformed_traces() {
        assert!(PriceTrace::new("x", vec![]).is_err());
        assert!(PriceTrace::new("x", vec![PricePoint::new(5, 0.1), PricePoint::new(5, 0.2)]).is_err());
        assert!(PriceTrace::new("x", vec![PricePoint::new(5, -0.1)]).is_err());
    }

    fn arb_trace() -> impl Strategy<Value = PriceTrace> {
        prop::collection::vec((1i64..400, 0.01f64..2.0), 1..40).prop_map(|steps| {
            let mut t = 1_000;
            let pts = steps
                .into_iter()
                .map(|(dt, p)| {
                    t += dt;
                    PricePoint::new(t, p)
                })
                .collect();
            PriceTrace::new("x", pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn regularize_is_idempotent(tr in arb_trace()) {
            let once = regularize(&tr, 60);
            prop_assert!(once.is_regular(60));
            prop_assert_eq!(regularize(&once, 60), once);
        }

        #[test]
        fn constant_window_average_is_exact(p in 0.001f64..5.0, n in 62usize..200, back in 0usize..60) {
            let tr = PriceTrace::from_prices("x", 0, 60, &vec![p; n]).unwrap();
            let t = tr.end() - back as i64;
            prop_assert_eq!(avg_price(&tr, t, 3600).unwrap(), p);
        }

        #[test]
        fn higher_max_price_never_revokes_earlier(tr in arb_trace(), a in 0.0f64..2.5, b in 0.0f64..2.5) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let start = tr.start();
            let p0 = tr.price_at(start).unwrap();
            prop_assume!(p0 <= lo);
            let r_lo = revocation_time(&tr, start, lo).unwrap();
            let r_hi = revocation_time(&tr, start, hi).unwrap();
            match (r_lo, r_hi) {
                (Some(x), Some(y)) => prop_assert!(y >= x),
                (None, Some(_)) => prop_assert!(false, "higher max revoked while lower did not"),
                _ => {}
            }
        }
    }
}
