use serde::{Deserialize, Serialize};

use super::nnls::nnls;
use super::{CurveError, CurvePoint, MetricTrace, Stage, StagedCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Relative jump that opens a new stage.
    pub xi: f64,
    /// Relative change below which a step counts as steady.
    pub epsilon: f64,
    /// Steady steps required before a jump, and at the tail for a plateau.
    pub window: usize,
    /// Non-zero `a3` grid candidates.
    pub a3_grid: usize,
    /// Refine the best `a3` candidate by golden-section search.
    pub refine: bool,
    /// Fraction of `max_trial_steps` observed before predicting.
    pub theta: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            xi: 0.5,
            epsilon: 0.01,
            window: 5,
            a3_grid: 64,
            refine: true,
            theta: 0.7,
        }
    }
}

fn change_rate(p: &[CurvePoint], i: usize) -> f64 {
    (p[i].metric - p[i - 1].metric).abs() / p[i - 1].metric
}

/// True when point `i` jumps by more than `xi` after `window` steady points.
pub fn stage_break(trace: &MetricTrace, i: usize, config: &FitConfig) -> bool {
    let p = trace.points();
    if i <= config.window || i >= p.len() {
        return false;
    }
    change_rate(p, i) > config.xi && (i - config.window..i).all(|j| change_rate(p, j) < config.epsilon)
}

/// Step intervals `[l, r)` between stage breaks, covering
/// `[0, last step + 1)`.
pub fn partition_stages(trace: &MetricTrace, config: &FitConfig) -> Vec<(u64, u64)> {
    let p = trace.points();
    let Some(last) = p.last() else {
        return Vec::new();
    };
    let mut bounds = vec![0];
    bounds.extend((0..p.len()).filter(|&i| stage_break(trace, i, config)).map(|i| p[i].step));
    bounds.push(last.step + 1);
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

/// True when the last `window` change rates are all below `epsilon`.
pub fn detect_plateau(trace: &MetricTrace, config: &FitConfig) -> bool {
    let p = trace.points();
    p.len() > config.window && (p.len() - config.window..p.len()).all(|j| change_rate(p, j) < config.epsilon)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    a: [f64; 4],
    rss: f64,
}

fn eval(a: &[f64; 4], k: f64) -> Option<f64> {
    let den = a[0] * k * k + a[1] * k + a[2];
    (den > 0.0).then(|| 1.0 / den + a[3])
}

/// Metric-space RSS, or `None` if the denominator vanishes anywhere in
/// `[l, last observed step]`. With non-negative coefficients the
/// denominator is smallest at `l`.
fn score(points: &[CurvePoint], l: u64, a: &[f64; 4]) -> Option<f64> {
    eval(a, l as f64)?;
    let mut rss = 0.0;
    for p in points {
        rss += (p.metric - eval(a, p.step as f64)?).powi(2);
    }
    rss.is_finite().then_some(rss)
}

/// Best `(a0, a1, a2)` for a fixed `a3`, from a weighted NNLS fit of the
/// reciprocal. Rows are weighted so residuals approximate relative metric
/// error.
fn fit_fixed_a3(points: &[CurvePoint], l: u64, a3: f64) -> Option<Candidate> {
    if points.iter().any(|p| p.metric - a3 <= 0.0) {
        return None;
    }
    let s = points.last()?.step.max(1) as f64;
    let n = points.len();
    let mut cols = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut b = Vec::with_capacity(n);
    for p in points {
        let d = p.metric - a3;
        let w = d * d / p.metric;
        let x = p.step as f64 / s;
        cols[0].push(w * x * x);
        cols[1].push(w * x);
        cols[2].push(w);
        b.push(w / d);
    }
    let c = nnls(&cols, &b);
    let a = [c[0] / (s * s), c[1] / s, c[2], a3];
    score(points, l, &a).map(|rss| Candidate { a, rss })
}

fn golden(points: &[CurvePoint], l: u64, mut lo: f64, mut hi: f64) -> Option<Candidate> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let f = |a3: f64| fit_fixed_a3(points, l, a3);
    let cost = |c: &Option<Candidate>| c.map_or(f64::INFINITY, |c| c.rss);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..100 {
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        if cost(&f1) <= cost(&f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    [f1, f2].into_iter().flatten().min_by(|a, b| a.rss.total_cmp(&b.rss))
}

fn fit_points(points: &[CurvePoint], l: u64, config: &FitConfig) -> Option<Candidate> {
    let min_l = points.iter().map(|p| p.metric).fold(f64::INFINITY, f64::min);
    let n = config.a3_grid;
    let grid: Vec<f64> = (0..=n).map(|j| min_l * j as f64 / (n + 1) as f64).collect();
    let fits: Vec<Option<Candidate>> = grid.iter().map(|&a3| fit_fixed_a3(points, l, a3)).collect();
    let (best_j, mut best) = fits
        .iter()
        .enumerate()
        .filter_map(|(j, c)| c.map(|c| (j, c)))
        .min_by(|a, b| a.1.rss.total_cmp(&b.1.rss))?;
    if config.refine {
        let lo = grid[best_j.saturating_sub(1)];
        let hi = if best_j < n { grid[best_j + 1] } else { min_l * (1.0 - 1e-9) };
        if let Some(c) = golden(points, l, lo, hi) {
            if c.rss < best.rss {
                best = c;
            }
        }
    }
    Some(best)
}

fn constant_stage(points: &[CurvePoint]) -> [f64; 4] {
    let mean = points.iter().map(|p| p.metric).sum::<f64>() / points.len() as f64;
    [0.0, 0.0, 1.0 / mean, 0.0]
}

fn stage(l: u64, r: u64, a: [f64; 4]) -> Stage {
    Stage { l, r, a0: a[0], a1: a[1], a2: a[2], a3: a[3] }
}

/// Fits one stage over `[l, r)` to `points` (which must lie in that range).
pub fn fit_stage(points: &[CurvePoint], l: u64, r: u64, config: &FitConfig) -> Result<Stage, CurveError> {
    if points.len() < 4 {
        return Err(CurveError::Underdetermined(points.len()));
    }
    let a = fit_points(points, l, config).map_or_else(|| constant_stage(points), |c| c.a);
    Ok(stage(l, r, a))
}

/// One stage over the whole trace.
pub fn fit_single(trace: &MetricTrace, config: &FitConfig) -> Result<StagedCurve, CurveError> {
    let horizon = trace.covered_steps();
    let s = fit_stage(trace.points(), 0, horizon, config)?;
    Ok(StagedCurve { horizon, stages: vec![s] })
}

/// Partitions the trace into stages and fits each one. A stage keeps the
/// whole-trace fit's coefficients when they describe it better than its own
/// fit, so the staged residual never exceeds the single-stage one. Stages
/// with fewer than four points are fitted as constants.
pub fn fit_curve(trace: &MetricTrace, config: &FitConfig) -> Result<StagedCurve, CurveError> {
    if trace.is_empty() {
        return Err(CurveError::Empty);
    }
    if trace.len() < 4 {
        return Err(CurveError::Underdetermined(trace.len()));
    }
    let single = fit_single(trace, config)?;
    let intervals = partition_stages(trace, config);
    if intervals.len() == 1 {
        return Ok(single);
    }
    let s = single.stages[0];
    let whole = [s.a0, s.a1, s.a2, s.a3];
    let p = trace.points();
    let stages = intervals
        .iter()
        .map(|&(l, r)| {
            let pts: Vec<CurvePoint> = p.iter().copied().filter(|q| l <= q.step && q.step < r).collect();
            let own = if pts.len() >= 4 {
                fit_points(&pts, l, config).map(|c| c.a)
            } else {
                None
            }
            .unwrap_or_else(|| constant_stage(&pts));
            let own_rss = score(&pts, l, &own).unwrap_or(f64::INFINITY);
            let whole_rss = score(&pts, l, &whole).unwrap_or(f64::INFINITY);
            stage(l, r, if whole_rss < own_rss { whole } else { own })
        })
        .collect();
    Ok(StagedCurve {
        horizon: trace.covered_steps(),
        stages,
    })
}

/// Predicted metric at `max_trial_steps` from a trace covering at least
/// `theta · max_trial_steps` steps.
pub fn predict_final(trace: &MetricTrace, max_trial_steps: u64, config: &FitConfig) -> Result<f64, CurveError> {
    let required = (config.theta * max_trial_steps as f64 - 1e-9).ceil().max(1.0) as u64;
    let have = trace.covered_steps();
    if have < required {
        return Err(CurveError::InsufficientSteps { required, have });
    }
    Ok(fit_curve(trace, config)?.predict(max_trial_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(v: &[f64]) -> MetricTrace {
        MetricTrace::from_metrics(v).unwrap()
    }

    fn model(a: [f64; 4], n: usize) -> Vec<f64> {
        (0..n).map(|k| eval(&a, k as f64).unwrap()).collect()
    }

    #[test]
    fn break_examples() {
        let c = FitConfig::default();
        let t = trace(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.4]);
        assert!(stage_break(&t, 6, &c));
        assert!(!stage_break(&t, 5, &c));
        assert_eq!(partition_stages(&t, &c), vec![(0, 6), (6, 7)]);
        let gentle: Vec<f64> = (0..50).map(|k| 1.0 - 0.001 * k as f64).collect();
        let g = trace(&gentle);
        assert!((0..50).all(|i| !stage_break(&g, i, &c)));
        assert_eq!(partition_stages(&g, &c), vec![(0, 50)]);
        // a jump right after another jump
        let t2 = trace(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.4, 0.1]);
        assert!(!stage_break(&t2, 7, &c));
    }

    #[test]
    fn two_breaks_three_stages() {
        let mut v = vec![1.0; 20];
        v.extend([0.4; 20]);
        v.extend([0.1; 20]);
        assert_eq!(partition_stages(&trace(&v), &FitConfig::default()), vec![(0, 20), (20, 40), (40, 60)]);
    }

    #[test]
    fn plateau_examples() {
        let c = FitConfig::default();
        assert!(detect_plateau(&trace(&[0.5; 6]), &c));
        let decay: Vec<f64> = (0..10).map(|k| 0.95f64.powi(k)).collect();
        assert!(!detect_plateau(&trace(&decay), &c));
        let noisy = [1.0, 0.8, 0.5, 0.5045, 0.5, 0.50449, 0.5, 0.5044];
        assert!(detect_plateau(&trace(&noisy), &c));
        assert!(!detect_plateau(&trace(&[0.5; 5]), &c));
    }

    #[test]
    fn recovers_reciprocal() {
        let v = model([0.0, 1.0, 1.0, 0.0], 40);
        let t = trace(&v);
        let c = fit_single(&t, &FitConfig::default()).unwrap();
        for p in t.points() {
            assert!((c.predict(p.step) - p.metric).abs() / p.metric < 1e-6);
        }
    }

    #[test]
    fn constant_trace() {
        let t = trace(&[0.7; 30]);
        let c = fit_single(&t, &FitConfig::default()).unwrap();
        assert!((c.predict(100) - 0.7).abs() < 1e-3);
    }

    #[test]
    fn zero_noise_extrapolation() {
        let a = [2e-5, 0.03, 1.0, 0.15];
        let full = model(a, 1000);
        let t = trace(&full[..700]);
        let p = predict_final(&t, 1000, &FitConfig::default()).unwrap();
        let truth = eval(&a, 1000.0).unwrap();
        assert!((p - truth).abs() / truth < 1e-6, "{p} vs {truth}");
        assert!(matches!(
            predict_final(&trace(&full[..699]), 1000, &FitConfig::default()),
            Err(CurveError::InsufficientSteps { required: 700, have: 699 })
        ));
    }

    #[test]
    fn second_stage_drives_prediction() {
        let mut v = model([1e-5, 0.02, 1.0, 0.3], 500);
        v.extend((500..800).map(|k| 0.4 * eval(&[1e-5, 0.02, 1.0, 0.3], k as f64).unwrap()));
        let t = trace(&v);
        let c = fit_curve(&t, &FitConfig::default()).unwrap();
        assert_eq!(c.stages.len(), 2);
        assert_eq!((c.stages[1].l, c.stages[1].r), (500, 800));
        assert!(c.is_partition());
        let staged = c.residual(&t);
        let single = fit_single(&t, &FitConfig::default()).unwrap().residual(&t);
        assert!(staged < single);
        let truth = 0.4 * eval(&[1e-5, 0.02, 1.0, 0.3], 1000.0).unwrap();
        let p = c.predict(1000);
        assert!((p - truth).abs() / truth < 0.05, "{p} vs {truth}");
    }

    #[test]
    fn short_stage_is_constant() {
        let mut v = vec![1.0; 20];
        v.extend([0.4, 0.4]);
        let c = fit_curve(&trace(&v), &FitConfig::default()).unwrap();
        assert_eq!(c.stages.len(), 2);
        assert!((c.predict(21) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_curve(&trace(&[1.0, 0.9, 0.8]), &FitConfig::default()), Err(CurveError::Underdetermined(3))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fits_are_valid_and_staged_never_worse(
            base in prop::collection::vec(0.05f64..2.0, 8..60),
            drop_at in 6usize..50,
        ) {
            let mut v = base.clone();
            if drop_at < v.len() {
                for x in &mut v[drop_at..] {
                    *x *= 0.3;
                }
            }
            let t = trace(&v);
            let cfg = FitConfig::default();
            let staged = fit_curve(&t, &cfg).unwrap();
            prop_assert!(staged.is_partition());
            for s in &staged.stages {
                prop_assert!(s.a0 >= 0.0 && s.a1 >= 0.0 && s.a2 >= 0.0 && s.a3 >= 0.0);
                prop_assert!(s.a0 * (s.l as f64).powi(2) + s.a1 * s.l as f64 + s.a2 > 0.0);
            }
            let single = fit_single(&t, &cfg).unwrap();
            prop_assert!(staged.residual(&t) <= single.residual(&t) * (1.0 + 1e-12) + 1e-300);
            prop_assert!(staged.predict(1000) > 0.0);
        }

        #[test]
        fn model_family_round_trip(
            a0 in 0.0f64..1e-3, a1 in 0.0f64..0.2, a2 in 0.2f64..5.0, a3 in 0.0f64..1.0,
        ) {
            let a = [a0, a1, a2, a3];
            let t = trace(&model(a, 60));
            let c = fit_single(&t, &FitConfig::default()).unwrap();
            for p in t.points() {
                prop_assert!((c.predict(p.step) - p.metric).abs() / p.metric < 1e-6);
            }
        }

        #[test]
        // Exponential decay is outside the model family, so the fit may sit
        // above the data at the last step; it never rises past its own value.
        fn extrapolation_never_rises(
            scale in 0.1f64..5.0, rate in 0.005f64..0.2, floor in 0.0f64..1.0, n in 10usize..200,
        ) {
            let v: Vec<f64> = (0..n).map(|k| scale * (-rate * k as f64).exp() + floor + 1e-3).collect();
            let t = trace(&v);
            let cfg = FitConfig::default();
            let last = fit_curve(&t, &cfg).unwrap().predict(n as u64 - 1);
            let p = predict_final(&t, n as u64 * 10 / 7, &cfg).unwrap();
            prop_assert!(p > 0.0 && p <= last + 1e-12, "{} > {}", p, last);
        }
    }
}
