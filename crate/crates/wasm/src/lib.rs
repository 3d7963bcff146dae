//! Browser entry points. Every function takes plain numbers and returns a
//! JSON string; failures come back as `{"error": "..."}`.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use spottune::earlycurve::{detect_plateau, fit_curve, fit_single, predict_final, FitConfig, StagedCurve};
use spottune::market::synth::{catalog_market, volatile_market, MarketShape};
use spottune::market::{bill, revocation_time, Acquisition, Catalog, EndReason};
use spottune::orchestrator::{theta_sweep, HistoricalEstimator, SimConfig, DEFAULT_THETAS};
use spottune::workload::{demo_workload, gen_curve, SyntheticModelSpec};

/// 2017-04-26 00:00:00 UTC.
const START: i64 = 1_493_164_800;
const DAY: i64 = 86_400;
const MARKET_DAYS: i64 = 3;
const SWEEP_DAYS: i64 = 10;

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
struct CurveFit {
    max_steps: u64,
    observed_steps: u64,
    actual: Vec<f64>,
    staged: Vec<f64>,
    single: Vec<f64>,
    staged_stages: usize,
    staged_rss: f64,
    single_rss: f64,
    staged_final: f64,
    single_final: f64,
    actual_final: f64,
    plateau: bool,
}

/// Generates a loss curve, fits the first `theta · max_steps` steps and
/// extrapolates both the staged and the single-stage fit to `max_steps`.
#[wasm_bindgen]
pub fn explore_curve(two_stage: bool, sigma: f64, theta: f64, max_steps: u32, seed: u32) -> String {
    to_json(curve(two_stage, sigma, theta, max_steps as u64, seed as u64))
}

fn curve(two_stage: bool, sigma: f64, theta: f64, max_steps: u64, seed: u64) -> Result<CurveFit, String> {
    if !(theta > 0.0 && theta <= 1.0) || !(0.0..=0.2).contains(&sigma) || !(20..=5000).contains(&max_steps) {
        return Err("need 0 < theta <= 1, 0 <= sigma <= 0.2 and 20 <= steps <= 5000".into());
    }
    let spec = if two_stage {
        let at = (max_steps as f64 * 0.45) as u64;
        SyntheticModelSpec::two_stage([1e-3, 0.3, 1.0, 0.25], at, 0.4, max_steps + 1, sigma, seed)
    } else {
        SyntheticModelSpec::single([2e-5, 0.03, 1.0, 0.15], max_steps + 1, sigma, seed)
    };
    let full = gen_curve(&spec, max_steps + 1);
    let cfg = FitConfig { theta, ..FitConfig::default() };
    let cut = (theta * max_steps as f64 - 1e-9).ceil() as u64;
    let observed = full.truncate_steps(cut);
    let staged = fit_curve(&observed, &cfg).map_err(|e| e.to_string())?;
    let single = fit_single(&observed, &cfg).map_err(|e| e.to_string())?;
    let path = |c: &StagedCurve| (0..=max_steps).map(|k| c.predict(k)).collect::<Vec<_>>();
    Ok(CurveFit {
        max_steps,
        observed_steps: observed.covered_steps(),
        actual: full.points().iter().map(|p| p.metric).collect(),
        staged: path(&staged),
        single: path(&single),
        staged_stages: staged.stages.len(),
        staged_rss: staged.residual(&observed),
        single_rss: single.residual(&observed),
        staged_final: predict_final(&observed, max_steps, &cfg).map_err(|e| e.to_string())?,
        single_final: single.predict(max_steps),
        actual_final: spec.value(max_steps),
        plateau: detect_plateau(&observed, &cfg),
    })
}

#[derive(Serialize)]
struct BillingView {
    /// Minute-by-minute prices from one hour before the start to one hour
    /// after the end.
    window_start: i64,
    prices: Vec<f64>,
    start: i64,
    end: i64,
    max_price: f64,
    reason: &'static str,
    charge: f64,
    gross: f64,
    refunded: bool,
}

/// Buys a spot instance on a synthetic market at `start_minute` with a
/// maximum price `premium` above the current price and keeps it for up to
/// `hours`, unless the market revokes it first.
#[wasm_bindgen]
pub fn explore_billing(seed: u32, start_minute: u32, hours: f64, premium: f64) -> String {
    to_json(billing(seed as u64, start_minute as i64, hours, premium))
}

fn billing(seed: u64, start_minute: i64, hours: f64, premium: f64) -> Result<BillingView, String> {
    let minutes = MARKET_DAYS * 1440;
    if !(hours > 0.0 && hours <= 12.0) || !(premium >= 0.0) {
        return Err("need 0 < hours <= 12 and a non-negative premium".into());
    }
    let trace = volatile_market("r4.large", START, minutes as usize, MarketShape::around(0.04), seed);
    let start = START + 60 * start_minute.clamp(60, minutes - 60 * 13);
    let price = trace.price_at(start).map_err(|e| e.to_string())?;
    let max_price = price + premium;
    let planned = start + (hours * 3600.0).round() as i64;
    let (end, reason) = match revocation_time(&trace, start, max_price).map_err(|e| e.to_string())? {
        Some(r) if r < planned => (r, EndReason::Revoked),
        _ => (planned, EndReason::SelfShutdown),
    };
    let acq = Acquisition { instance: "r4.large".into(), start_time: start, max_price, end_time: end, end_reason: reason };
    let b = bill(&trace, &acq).map_err(|e| e.to_string())?;
    let window_start = start - 3600;
    let window_end = (end + 3600).min(trace.end());
    let prices = (window_start..=window_end)
        .step_by(60)
        .map(|t| trace.price_at(t).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(BillingView {
        window_start,
        prices,
        start,
        end,
        max_price,
        reason: reason.as_str(),
        charge: b.charge,
        gross: b.gross,
        refunded: b.refunded,
    })
}

/// Simulates the demo workload once per θ in 0.1, 0.2, ..., 1.0 on a
/// synthetic market and returns one row per θ.
#[wasm_bindgen]
pub fn sweep_theta(seed: u32, max_steps: u32) -> String {
    to_json(sweep(seed as u64, max_steps as u64))
}

fn sweep(seed: u64, max_steps: u64) -> Result<Vec<spottune::orchestrator::SweepRow>, String> {
    if !(10..=120).contains(&max_steps) {
        return Err("steps must be between 10 and 120".into());
    }
    let catalog = Catalog::reference();
    let traces = catalog_market(&catalog, START, (SWEEP_DAYS * 1440) as usize, seed);
    let workload = demo_workload(&catalog, seed, max_steps);
    let config = SimConfig {
        max_trial_steps: max_steps,
        seed,
        start_time: Some(START + (SWEEP_DAYS - 2) * DAY),
        ..SimConfig::default()
    };
    theta_sweep(&config, &catalog, &traces, &workload, &HistoricalEstimator::default(), &DEFAULT_THETAS)
        .map_err(|e| e.to_string())
}
