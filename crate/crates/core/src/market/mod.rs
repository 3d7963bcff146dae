//! Spot market traces, revocation semantics and per-second billing.

mod billing;
mod catalog;
mod ingest;
pub mod synth;
mod trace;

pub use billing::{bill, Acquisition, Bill, BillingLedger, EndReason, LedgerRecord};
pub use catalog::{Catalog, InstanceType};
pub use ingest::{ingest_trace, parse_timestamp, write_traces, Ingested, RowError};
pub use trace::{
    avg_price, regularize, revocation_time, PricePoint, PriceTrace, GRID_SECONDS,
};

use thiserror::Error;

/// Tolerance used when comparing currency amounts.
pub const USD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("price trace is empty")]
    EmptyTrace,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("instant {t} is outside the trace span [{start}, {end}]")]
    OutOfRange { t: i64, start: i64, end: i64 },
    #[error("insufficient history at {t}: need data from {needed_from}, trace starts at {start}")]
    InsufficientHistory { t: i64, needed_from: i64, start: i64 },
    #[error("acquisition rejected at {t}: market price {price} exceeds maximum price {max_price}")]
    AcquisitionRejected { t: i64, price: f64, max_price: f64 },
    #[error("duplicate instance type {0} in catalog")]
    DuplicateInstance(String),
    #[error("invalid instance type {name}: {reason}")]
    InvalidInstance { name: String, reason: String },
}
