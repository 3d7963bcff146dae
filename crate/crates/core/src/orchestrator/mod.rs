//! Deterministic simulation of the tuning workflow on spot instances.
//!
//! The simulator polls every `poll_interval` seconds. Each running job is
//! checked, in priority order, for an imminent revocation (checkpoint and
//! move), completion of its step budget or a plateau (checkpoint and stop),
//! and an hour without revocation (checkpoint and move to a fresh
//! acquisition, which keeps every acquisition inside the refund window).
//! Waiting jobs are then placed on the instance type with the lowest
//! expected step cost. When every job has stopped, the final metrics are
//! extrapolated and the best `mcnt` settings of each algorithm continue to
//! the full step budget.

mod config;
mod engine;
mod estimator;
mod matrix;
mod report;
mod sweep;

pub use config::{PerfInit, SimConfig};
pub use engine::{get_best_inst, run_simulation, simulate_baseline, Choice};
pub use estimator::{ConstantEstimator, HistoricalEstimator, PredictorEstimator, RevocationEstimator};
pub use matrix::{init_perf_matrix, step_cost, PerfMatrix};
pub use report::{normalize_pcr, write_ledger_csv, Event, JobSummary, LedgerRow, Report};
pub use sweep::{theta_sweep, SweepRow, DEFAULT_THETAS};

use thiserror::Error;

use crate::earlycurve::CurveError;
use crate::market::MarketError;
use crate::workload::WorkloadError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no price trace for instance {0}")]
    MissingTrace(String),
    #[error("unknown instance {0}")]
    UnknownInstance(String),
    #[error("price traces end at {horizon}; the simulation needs {t}")]
    Horizon { t: i64, horizon: i64 },
    #[error("no instance available for job {job} at {t}")]
    NoInstance { job: String, t: i64 },
    #[error("step time observation must be positive, got {0}")]
    InvalidObservation(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
