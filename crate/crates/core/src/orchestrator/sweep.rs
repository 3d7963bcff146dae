use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::run_simulation;
use super::estimator::RevocationEstimator;
use super::{SimConfig, SimError};
use crate::market::{Catalog, PriceTrace};
use crate::workload::Workload;

pub const DEFAULT_THETAS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub total_cost: f64,
    pub gross_cost: f64,
    pub jct: i64,
    pub best_selected_fraction: f64,
    pub free_steps_fraction: f64,
    /// Billed cost fell relative to the previous θ while the cost before
    /// refunds did not, so the dip comes from refund timing.
    pub refund_reversal: bool,
}

/// Runs one simulation per θ (in parallel, each with its own state) and
/// returns rows in the order of `thetas`.
pub fn theta_sweep(
    config: &SimConfig,
    catalog: &Catalog,
    traces: &BTreeMap<String, PriceTrace>,
    workload: &Workload,
    estimator: &dyn RevocationEstimator,
    thetas: &[f64],
) -> Result<Vec<SweepRow>, SimError> {
    let results = crate::par::map(thetas, |&theta| {
        let cfg = SimConfig {
            theta,
            ..config.clone()
        };
        run_simulation(&cfg, catalog, traces, workload, estimator)
    });
    let mut rows: Vec<SweepRow> = Vec::with_capacity(thetas.len());
    for (theta, r) in thetas.iter().zip(results) {
        let r = r?;
        let refund_reversal = rows
            .last()
            .is_some_and(|prev| r.total_cost < prev.total_cost && r.gross_cost >= prev.gross_cost);
        rows.push(SweepRow {
            theta: *theta,
            total_cost: r.total_cost,
            gross_cost: r.gross_cost,
            jct: r.jct,
            best_selected_fraction: r.best_selected_fraction,
            free_steps_fraction: r.free_steps_fraction,
            refund_reversal,
        });
    }
    Ok(rows)
}
