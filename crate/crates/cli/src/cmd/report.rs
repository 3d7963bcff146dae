use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spottune::orchestrator::normalize_pcr;

use super::simulate::ReportFile;
use crate::error::{data, CliError};
use crate::output::{csv_text, write_bytes, Provenance};

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Report files, or directories holding `report-*.json`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Policy whose PCR is normalised to 1; defaults to `spottune` when
    /// present, else the first report.
    #[arg(long)]
    pub reference: Option<String>,
    /// Print per-algorithm selections.
    #[arg(long)]
    pub detail: bool,
    /// Also write the summary as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load(args: &ReportArgs) -> Result<Vec<(PathBuf, ReportFile)>, CliError> {
    let mut paths = Vec::new();
    for p in &args.inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("report-") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(p.clone());
        }
    }
    if paths.is_empty() {
        return Err(data("no report files found"));
    }
    paths
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(|e| data(format!("{}: {e}", p.display())))?;
            let rf: ReportFile = serde_json::from_slice(&bytes).map_err(|e| data(format!("{}: {e}", p.display())))?;
            Ok((p, rf))
        })
        .collect()
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let reports = load(args)?;
    let wanted = args.reference.clone().unwrap_or_else(|| "spottune".into());
    let reference = reports
        .iter()
        .find(|(_, r)| r.policy == wanted)
        .or(if args.reference.is_none() { reports.first() } else { None })
        .ok_or_else(|| data(format!("no report with policy {wanted}")))?;
    let seed = reference.1.provenance.seed;
    let prov = Provenance::new(seed, &(args, reports.iter().map(|(_, r)| &r.provenance).collect::<Vec<_>>()));
    println!(
        "{:<9} {:<12} {:>5} {:>11} {:>9} {:>9} {:>6} {:>6} {:>8}  config",
        "policy", "instance", "theta", "cost_usd", "jct_s", "steps", "free", "top", "pcr"
    );
    let mut rows = Vec::new();
    for (_, rf) in &reports {
        let r = &rf.report;
        let pcr = normalize_pcr(r, &reference.1.report);
        let inst = rf.instance.clone().unwrap_or_else(|| "-".into());
        println!(
            "{:<9} {:<12} {:>5} {:>11.4} {:>9} {:>9} {:>6.3} {:>6.3} {:>8}  {}",
            rf.policy,
            inst,
            r.theta,
            r.total_cost,
            r.jct,
            r.executed_steps - r.lost_steps,
            r.free_steps_fraction,
            r.best_selected_fraction,
            pcr.map_or("-".into(), |p| format!("{p:.4}")),
            &rf.provenance.config_hash[..12]
        );
        rows.push(vec![
            rf.policy.clone(),
            inst,
            r.theta.to_string(),
            r.total_cost.to_string(),
            r.jct.to_string(),
            (r.executed_steps - r.lost_steps).to_string(),
            r.free_steps_fraction.to_string(),
            r.best_selected_fraction.to_string(),
            pcr.map_or(String::new(), |p| p.to_string()),
        ]);
        if args.detail {
            for (alg, ids) in &r.selected {
                let best = r
                    .jobs
                    .iter()
                    .filter(|j| &j.algorithm == alg)
                    .min_by(|a, b| a.true_final.total_cmp(&b.true_final))
                    .map_or("-", |j| j.id.as_str());
                println!("    {alg:<10} selected {}  (true best {best})", ids.join(" "));
            }
        }
    }
    if let Some(out) = &args.out {
        let header = ["policy", "instance", "theta", "total_cost", "jct_seconds", "steps", "free_steps_fraction", "best_selected_fraction", "normalized_pcr"];
        write_bytes(out, csv_text(&prov, &header, &rows).as_bytes())?;
    }
    Ok(())
}
