use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spottune::earlycurve::{
    detect_plateau, fit_curve, fit_single, predict_final, read_metric_trace, FitConfig, StagedCurve,
};

use crate::error::{data, usage, CliError};
use crate::output::{write_json, Provenance};

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Metric trace (`step,metric` CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Step budget whose final metric is predicted.
    #[arg(long)]
    pub max_steps: u64,
    /// Fraction of the budget observed; later points in the file are held
    /// out and reported as the actual final value.
    #[arg(long, default_value_t = 0.7)]
    pub theta: f64,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// JSON output file; stdout only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    curve: StagedCurve,
    rss: f64,
    predicted_final: f64,
}

#[derive(Debug, Serialize)]
struct FitOutput {
    provenance: Provenance,
    input: PathBuf,
    max_steps: u64,
    theta: f64,
    observed_points: usize,
    plateau: bool,
    staged: FitSummary,
    single: FitSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    actual_final: Option<f64>,
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    if !(args.theta > 0.0 && args.theta <= 1.0) || args.max_steps == 0 {
        return Err(usage("need 0 < theta <= 1 and a positive --max-steps"));
    }
    let mut cfg = FitConfig { theta: args.theta, ..FitConfig::default() };
    if let Some(x) = args.xi {
        cfg.xi = x;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    let file = fs::File::open(&args.input).map_err(|e| data(format!("{}: {e}", args.input.display())))?;
    let full = read_metric_trace(file).map_err(|e| data(format!("{}: {e}", args.input.display())))?;
    let cut = ((args.theta * args.max_steps as f64) - 1e-9).ceil() as u64;
    let observed = full.truncate_steps(cut);
    let actual_final = full
        .points()
        .iter()
        .rev()
        .find(|p| p.step <= args.max_steps)
        .filter(|p| p.step >= cut)
        .map(|p| p.metric);

    let staged = fit_curve(&observed, &cfg)?;
    let single = fit_single(&observed, &cfg)?;
    let predicted = predict_final(&observed, args.max_steps, &cfg)?;
    let out = FitOutput {
        provenance: Provenance::new(0, args),
        input: args.input.clone(),
        max_steps: args.max_steps,
        theta: args.theta,
        observed_points: observed.len(),
        plateau: detect_plateau(&observed, &cfg),
        staged: FitSummary {
            rss: staged.residual(&observed),
            predicted_final: predicted,
            curve: staged,
        },
        single: FitSummary {
            rss: single.residual(&observed),
            predicted_final: single.predict(args.max_steps),
            curve: single,
        },
        actual_final,
    };
    println!("observed {} points up to step {}", out.observed_points, observed.covered_steps());
    for s in &out.staged.curve.stages {
        println!(
            "  stage [{}, {}): a0={:.6e} a1={:.6e} a2={:.6e} a3={:.6}",
            s.l, s.r, s.a0, s.a1, s.a2, s.a3
        );
    }
    println!("staged  rss {:.6e}  predicted final {:.6}", out.staged.rss, out.staged.predicted_final);
    println!("single  rss {:.6e}  predicted final {:.6}", out.single.rss, out.single.predicted_final);
    if let Some(a) = actual_final {
        println!("actual final {a:.6}");
    }
    if out.plateau {
        println!("plateau detected");
    }
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    Ok(())
}
