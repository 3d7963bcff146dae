//! `spottune`: spot-market hyper-parameter tuning simulator.

mod cmd;
mod error;
mod manifest;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spottune", version, about = "Simulate hyper-parameter tuning on revocable spot instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic market, workload and config to try the other commands on.
    Demo(cmd::demo::DemoArgs),
    /// Regularize raw price records into one-minute per-instance traces.
    Ingest(cmd::ingest::IngestArgs),
    /// Train revocation predictors on the part of each trace before a cut-off.
    TrainRevpred(cmd::revpred::TrainArgs),
    /// Score trained predictors on the part of each trace after a cut-off.
    EvalRevpred(cmd::revpred::EvalArgs),
    /// Run the tuning workflow and the single-instance baselines.
    Simulate(cmd::simulate::SimulateArgs),
    /// Fit a staged learning curve and predict the final metric.
    FitCurve(cmd::curve::FitArgs),
    /// Summarize report files.
    Report(cmd::report::ReportArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Demo(a) => cmd::demo::run(&a),
        Command::Ingest(a) => cmd::ingest::run(&a),
        Command::TrainRevpred(a) => cmd::revpred::run_train(&a),
        Command::EvalRevpred(a) => cmd::revpred::run_eval(&a),
        Command::Simulate(a) => cmd::simulate::run(&a),
        Command::FitCurve(a) => cmd::curve::run(&a),
        Command::Report(a) => cmd::report::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spottune: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
