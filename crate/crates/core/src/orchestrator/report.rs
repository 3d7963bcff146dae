use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SimError;

/// One acquisition as billed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub job: String,
    pub instance: String,
    pub start: i64,
    pub end: i64,
    pub reason: String,
    pub charge: f64,
    pub refunded: bool,
    pub gross: f64,
    /// Steps completed on this acquisition.
    pub steps: u64,
    /// Of those, steps lost to a failed checkpoint.
    pub lost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSummary {
    pub id: String,
    pub algorithm: String,
    pub steps_done: u64,
    /// Steps completed when the extrapolation ran.
    pub explored_steps: u64,
    pub plateau: bool,
    pub predicted_final: f64,
    pub true_final: f64,
    pub selected: bool,
    pub acquisitions: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: i64,
    pub job: String,
    pub kind: String,
    pub instance: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub theta: f64,
    pub start_time: i64,
    /// USD after refunds.
    pub total_cost: f64,
    /// USD before refunds.
    pub gross_cost: f64,
    /// Seconds from submission to the last acquisition's end.
    pub jct: i64,
    /// `1 / (jct · total_cost)`; absent when either is zero.
    pub pcr: Option<f64>,
    pub executed_steps: u64,
    pub free_steps: u64,
    pub lost_steps: u64,
    pub free_steps_fraction: f64,
    /// Settings continued to the full budget, per algorithm.
    pub selected: BTreeMap<String, Vec<String>>,
    /// Fraction of algorithms whose truly best setting was selected.
    pub best_selected_fraction: f64,
    pub jobs: Vec<JobSummary>,
    pub ledger: Vec<LedgerRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Event>,
}

impl Report {
    /// Completed steps per USD-charged step: total cost over executed steps.
    pub fn cost_per_step(&self) -> f64 {
        if self.executed_steps == 0 {
            0.0
        } else {
            self.total_cost / (self.executed_steps - self.lost_steps).max(1) as f64
        }
    }
}

/// PCR relative to `reference`, whose own normalised PCR is exactly one.
pub fn normalize_pcr(report: &Report, reference: &Report) -> Option<f64> {
    let denom = report.jct as f64 * report.total_cost;
    let num = reference.jct as f64 * reference.total_cost;
    if report.jct == reference.jct && report.total_cost == reference.total_cost {
        return Some(1.0);
    }
    (denom > 0.0 && num > 0.0).then(|| num / denom)
}

/// Writes the ledger as CSV, optionally preceded by `#` comment lines.
pub fn write_ledger_csv<W: Write>(mut out: W, report: &Report, comment: Option<&str>) -> Result<(), SimError> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["job", "instance", "start", "end", "reason", "charge", "refunded", "gross", "steps", "lost"])?;
    for r in &report.ledger {
        w.write_record([
            r.job.clone(),
            r.instance.clone(),
            r.start.to_string(),
            r.end.to_string(),
            r.reason.clone(),
            format!("{:.9}", r.charge),
            r.refunded.to_string(),
            format!("{:.9}", r.gross),
            r.steps.to_string(),
            r.lost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
