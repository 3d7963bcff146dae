//! Cost-aware hyper-parameter tuning on revocable (spot) cloud instances.
//!
//! The crate is organised by subsystem:
//!
//! * [`market`] ingests spot price traces and answers price, revocation and
//!   billing queries, including the first-hour refund rule.
//! * [`revpred`] builds labelled datasets from price traces and trains the
//!   revocation-probability predictor.
//! * [`earlycurve`] fits staged reciprocal-quadratic models to partial
//!   training curves and extrapolates their final metric.
//! * [`workload`] generates synthetic tuning workloads (metric curves, step
//!   duration and checkpoint profiles) and replays recorded metric traces.
//! * [`orchestrator`] runs the tuning workflow as a deterministic
//!   discrete-event simulation and produces cost / JCT / PCR reports.

pub mod earlycurve;
pub mod market;
pub mod orchestrator;
mod par;
pub mod revpred;
pub mod workload;

/// Seconds in one hour.
pub const HOUR: i64 = 3600;
