use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spottune::earlycurve::write_metric_trace;
use spottune::market::synth::catalog_market;
use spottune::market::{write_traces, Catalog, PriceTrace};
use spottune::workload::demo_workload;

use crate::error::CliError;
use crate::output::{write_bytes, Provenance};

/// 2017-04-26 00:00:00 UTC.
const DEMO_START: i64 = 1_493_164_800;
const DAY: i64 = 86_400;

#[derive(Debug, Args, Serialize)]
pub struct DemoArgs {
    /// Directory to populate.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Length of the synthetic market in days (at least 10).
    #[arg(long, default_value_t = 14)]
    pub days: i64,
    #[arg(long, default_value_t = 60)]
    pub max_steps: u64,
}

/// Writes a synthetic market (raw change events and regularized traces), the
/// 96-setting demo workload, sample metric curves and a config file.
pub fn run(args: &DemoArgs) -> Result<(), CliError> {
    if args.days < 10 {
        return Err(crate::error::usage("--days must be at least 10"));
    }
    let prov = Provenance::new(args.seed, args);
    let catalog = Catalog::reference();
    let traces = catalog_market(&catalog, DEMO_START, (args.days * 1440) as usize, args.seed);

    let mut raw = Vec::new();
    let changes: Vec<PriceTrace> = traces.values().map(change_points).collect();
    write_traces(&mut raw, changes.iter(), Some(&prov.comment()))?;
    write_bytes(&args.out.join("raw/spot_prices.csv"), &raw)?;
    for (name, tr) in &traces {
        let mut buf = Vec::new();
        write_traces(&mut buf, [tr], Some(&prov.comment()))?;
        write_bytes(&args.out.join(format!("traces/{}.csv", super::file_stem(name))), &buf)?;
    }

    let workload = demo_workload(&catalog, args.seed, args.max_steps);
    workload.save(&args.out.join("workload.json"))?;
    for id in ["AlexNet-10", "ResNet-14", "SVM-05"] {
        let Some(job) = workload.job(id) else { continue };
        let mut buf = Vec::new();
        write_metric_trace(&mut buf, &job.curve.metrics(args.max_steps))?;
        let mut text = format!("# {}\n", prov.comment()).into_bytes();
        text.extend(buf);
        write_bytes(&args.out.join(format!("curves/{id}.csv")), &text)?;
    }

    let train_until = DEMO_START + 8 * DAY;
    let eval_from = DEMO_START + 9 * DAY;
    let config = format!(
        "# {comment}\n\
         seed = {seed}\n\
         traces = \"traces\"\n\
         workload = \"workload.json\"\n\
         models = \"models\"\n\
         out = \"out\"\n\
         # predictor (needs `spottune train-revpred`), historical, or constant:<p>\n\
         estimator = \"predictor\"\n\
         \n\
         [simulation]\n\
         max_trial_steps = {steps}\n\
         theta = 0.7\n\
         mcnt = 3\n\
         start_time = {eval_from}\n\
         \n\
         [revpred]\n\
         train_until = {train_until}\n\
         eval_from = {eval_from}\n\
         stride = 600\n\
         epochs = 10\n\
         hidden = 16\n",
        comment = prov.comment(),
        seed = args.seed,
        steps = args.max_steps,
    );
    write_bytes(&args.out.join("spottune.toml"), config.as_bytes())?;
    println!(
        "wrote demo bundle to {} ({} instance types, {} jobs)",
        args.out.display(),
        traces.len(),
        workload.jobs.len()
    );
    Ok(())
}

/// Keeps only the points where the price changes, like a provider's price
/// history feed.
fn change_points(tr: &PriceTrace) -> PriceTrace {
    let mut pts = Vec::new();
    for p in tr.points() {
        if pts.last().is_none_or(|q: &spottune::market::PricePoint| q.price != p.price) {
            pts.push(*p);
        }
    }
    let last = *tr.points().last().expect("non-empty trace");
    if pts.last() != Some(&last) {
        pts.push(last);
    }
    PriceTrace::new(tr.instance(), pts).expect("subset of a valid trace")
}
