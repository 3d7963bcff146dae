use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use spottune::market::Catalog;
use spottune::orchestrator::{
    normalize_pcr, run_simulation, simulate_baseline, theta_sweep, write_ledger_csv, ConstantEstimator,
    HistoricalEstimator, PredictorEstimator, Report, RevocationEstimator, SimConfig, SweepRow, DEFAULT_THETAS,
};
use spottune::revpred::{Architecture, PredictorModel};
use spottune::workload::Workload;

use crate::error::{data, usage, CliError};
use crate::manifest::Manifest;
use crate::output::{csv_text, write_bytes, write_json, Provenance};

/// θ of the run every PCR is normalised against.
pub const REFERENCE_THETA: f64 = 0.7;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `predictor`, `historical` or `constant:<p>`.
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Also run θ = 0.1, 0.2, ..., 1.0.
    #[arg(long)]
    pub theta_sweep: bool,
    /// Record the event log in the reports.
    #[arg(long)]
    pub events: bool,
}

#[derive(Debug, Serialize)]
struct SimResolved {
    command: &'static str,
    traces: PathBuf,
    workload: PathBuf,
    models: Option<PathBuf>,
    out: PathBuf,
    estimator: String,
    predictor_architecture: String,
    catalog: Catalog,
    cheapest: String,
    fastest: String,
    simulation: SimConfig,
    theta_sweep: bool,
}

/// A report as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub provenance: Provenance,
    /// `spottune`, `cheapest` or `fastest`.
    pub policy: String,
    /// The single instance type of a baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    pub report: Report,
}

fn default_baselines(catalog: &Catalog) -> (String, String) {
    let mut it = catalog.iter();
    let first = it.next().expect("non-empty catalog");
    let (mut cheap, mut fast) = (first, first);
    for i in it {
        if i.on_demand_price < cheap.on_demand_price {
            cheap = i;
        }
        if i.cpus > fast.cpus {
            fast = i;
        }
    }
    (cheap.name.clone(), fast.name.clone())
}

fn build_estimator(
    spec: &str,
    models: Option<&Path>,
    arch: &str,
    catalog: &Catalog,
) -> Result<Box<dyn RevocationEstimator>, CliError> {
    if spec == "historical" {
        return Ok(Box::new(HistoricalEstimator::default()));
    }
    if let Some(p) = spec.strip_prefix("constant:") {
        let p: f64 = p.parse().map_err(|_| usage(format!("bad constant probability {p:?}")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(usage("constant probability must be in [0, 1]"));
        }
        return Ok(Box::new(ConstantEstimator(p)));
    }
    if spec != "predictor" {
        return Err(usage(format!("unknown estimator {spec:?}")));
    }
    let dir = models.ok_or_else(|| usage("the predictor estimator needs a models directory"))?;
    let arch = match arch {
        "sequence" => "sequence",
        "logistic" => Architecture::Logistic.name(),
        other => return Err(usage(format!("unknown predictor architecture {other:?}"))),
    };
    let mut loaded = BTreeMap::new();
    for inst in catalog.iter() {
        let path = dir.join(format!("{}.{arch}.json", super::file_stem(&inst.name)));
        let model = PredictorModel::load(&path).map_err(|e| {
            data(format!("{}: {e} (run train-revpred or choose another estimator)", path.display()))
        })?;
        loaded.insert(inst.name.clone(), model);
    }
    Ok(Box::new(PredictorEstimator::new(loaded)))
}

fn f(v: f64) -> String {
    v.to_string()
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let mut m = Manifest::load(args.config.as_deref())?;
    let catalog = m.catalog()?;
    let (cheap, fast) = default_baselines(&catalog);
    let mut sim = m.simulation.clone();
    sim.seed = args.seed.unwrap_or(m.seed());
    m.seed = Some(sim.seed);
    if let Some(t) = args.theta {
        sim.theta = t;
    }
    sim.record_events |= args.events;
    sim.validate()?;
    let r = SimResolved {
        command: "simulate",
        traces: args.traces.clone().map_or_else(|| Manifest::require(&m.traces, "traces"), Ok)?,
        workload: args.workload.clone().map_or_else(|| Manifest::require(&m.workload, "workload"), Ok)?,
        models: args.models.clone().or(m.models.clone()),
        out: args.out.clone().map_or_else(|| Manifest::require(&m.out, "out"), Ok)?,
        estimator: args.estimator.clone().or(m.estimator.clone()).unwrap_or_else(|| "historical".into()),
        predictor_architecture: m.revpred.architecture.clone(),
        cheapest: m.baselines.cheapest.clone().unwrap_or(cheap),
        fastest: m.baselines.fastest.clone().unwrap_or(fast),
        catalog,
        simulation: sim,
        theta_sweep: args.theta_sweep,
    };
    let prov = Provenance::new(r.simulation.seed, &r);
    let traces = super::load_traces(&r.traces)?;
    let workload = Workload::load(&r.workload).map_err(|e| data(format!("{}: {e}", r.workload.display())))?;
    let estimator = build_estimator(&r.estimator, r.models.as_deref(), &r.predictor_architecture, &r.catalog)?;
    let est = estimator.as_ref();

    let spot = run_simulation(&r.simulation, &r.catalog, &traces, &workload, est)?;
    let reference = if r.simulation.theta == REFERENCE_THETA {
        spot.clone()
    } else {
        let cfg = SimConfig {
            theta: REFERENCE_THETA,
            ..r.simulation.clone()
        };
        run_simulation(&cfg, &r.catalog, &traces, &workload, est)?
    };
    let cheapest = simulate_baseline(&r.simulation, &r.catalog, &traces, &workload, &r.cheapest)?;
    let fastest = simulate_baseline(&r.simulation, &r.catalog, &traces, &workload, &r.fastest)?;

    let runs = [
        ("spottune", None, &spot),
        ("cheapest", Some(r.cheapest.clone()), &cheapest),
        ("fastest", Some(r.fastest.clone()), &fastest),
    ];
    let mut rows = Vec::new();
    println!(
        "{:<9} {:<12} {:>5} {:>11} {:>11} {:>9} {:>6} {:>6} {:>8}",
        "policy", "instance", "theta", "cost_usd", "gross_usd", "jct_s", "free", "top", "pcr"
    );
    for (policy, instance, report) in runs {
        let file = ReportFile {
            provenance: prov.clone(),
            policy: policy.into(),
            instance: instance.clone(),
            report: report.clone(),
        };
        write_json(&r.out.join(format!("report-{policy}.json")), &file)?;
        let mut ledger = Vec::new();
        write_ledger_csv(&mut ledger, report, Some(&prov.comment()))?;
        write_bytes(&r.out.join(format!("ledger-{policy}.csv")), &ledger)?;
        let pcr = normalize_pcr(report, &reference);
        let inst = instance.unwrap_or_else(|| "-".into());
        println!(
            "{:<9} {:<12} {:>5} {:>11.4} {:>11.4} {:>9} {:>6.3} {:>6.3} {:>8}",
            policy,
            inst,
            report.theta,
            report.total_cost,
            report.gross_cost,
            report.jct,
            report.free_steps_fraction,
            report.best_selected_fraction,
            pcr.map_or("-".into(), |p| format!("{p:.4}"))
        );
        rows.push(vec![
            policy.to_string(),
            inst,
            f(report.theta),
            f(report.total_cost),
            f(report.gross_cost),
            report.jct.to_string(),
            f(report.free_steps_fraction),
            f(report.best_selected_fraction),
            pcr.map_or(String::new(), f),
        ]);
    }
    let header = [
        "policy",
        "instance",
        "theta",
        "total_cost",
        "gross_cost",
        "jct_seconds",
        "free_steps_fraction",
        "best_selected_fraction",
        "normalized_pcr",
    ];
    write_bytes(&r.out.join("pcr.csv"), csv_text(&prov, &header, &rows).as_bytes())?;

    if r.theta_sweep {
        let sweep = theta_sweep(&r.simulation, &r.catalog, &traces, &workload, est, &DEFAULT_THETAS)?;
        write_bytes(&r.out.join("theta-sweep.csv"), sweep_csv(&prov, &sweep, r.simulation.poll_interval).as_bytes())?;
        println!("\n{:>5} {:>11} {:>11} {:>9} {:>6} {:>6}  flags", "theta", "cost_usd", "gross_usd", "jct_s", "top", "free");
        for (i, s) in sweep.iter().enumerate() {
            let mut flags = Vec::new();
            if s.refund_reversal {
                flags.push("refund-reversal");
            }
            if jct_drop(&sweep, i, r.simulation.poll_interval) {
                flags.push("jct-drop");
            }
            println!(
                "{:>5.1} {:>11.4} {:>11.4} {:>9} {:>6.3} {:>6.3}  {}",
                s.theta,
                s.total_cost,
                s.gross_cost,
                s.jct,
                s.best_selected_fraction,
                s.free_steps_fraction,
                flags.join(" ")
            );
        }
    }
    println!("\nreports written to {}", r.out.display());
    Ok(())
}

/// JCT fell by more than `tolerance` seconds relative to the previous θ.
pub fn jct_drop(rows: &[SweepRow], i: usize, tolerance: i64) -> bool {
    i > 0 && rows[i].jct < rows[i - 1].jct - tolerance
}

fn sweep_csv(prov: &Provenance, rows: &[SweepRow], tolerance: i64) -> String {
    let header = [
        "theta",
        "total_cost",
        "gross_cost",
        "jct_seconds",
        "best_selected_fraction",
        "free_steps_fraction",
        "refund_reversal",
        "jct_drop",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                f(s.theta),
                f(s.total_cost),
                f(s.gross_cost),
                s.jct.to_string(),
                f(s.best_selected_fraction),
                f(s.free_steps_fraction),
                s.refund_reversal.to_string(),
                jct_drop(rows, i, tolerance).to_string(),
            ]
        })
        .collect();
    csv_text(prov, &header, &body)
}
