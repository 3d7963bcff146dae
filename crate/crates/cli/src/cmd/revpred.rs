use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use spottune::market::{Catalog, PriceTrace};
use spottune::revpred::{
    build_dataset, evaluate, train, Architecture, DatasetConfig, Evaluation, ModelConfig, PredictorModel,
    RevPredError,
};

use crate::error::{data, usage, CliError};
use crate::manifest::{Instant, Manifest};
use crate::output::{csv_text, write_bytes, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchChoice {
    Sequence,
    Logistic,
    Both,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Model directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training labels must close by this time (epoch seconds or ISO date).
    #[arg(long)]
    pub train_until: Option<Instant>,
    /// Restrict to these instance types.
    #[arg(long = "instance")]
    pub instances: Vec<String>,
    #[arg(long, value_enum, default_value = "both")]
    pub arch: ArchChoice,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub stride: Option<i64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct TrainResolved {
    command: &'static str,
    traces: PathBuf,
    out: PathBuf,
    train_until: i64,
    instances: Vec<String>,
    architectures: Vec<Architecture>,
    stride: i64,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    logistic_learning_rate: f64,
    seed: u64,
}

pub fn model_file_name(instance: &str, arch: &Architecture) -> String {
    format!("{}.{}.json", super::file_stem(instance), arch.name())
}

fn selected<'a>(
    traces: &'a BTreeMap<String, PriceTrace>,
    names: &[String],
) -> Result<Vec<(&'a String, &'a PriceTrace)>, CliError> {
    for n in names {
        if !traces.contains_key(n) {
            return Err(data(format!("no price trace for {n}")));
        }
    }
    Ok(traces.iter().filter(|(k, _)| names.is_empty() || names.contains(k)).collect())
}

fn price_scale(catalog: &Catalog, instance: &str) -> f64 {
    catalog.get(instance).map_or(1.0, |i| i.on_demand_price)
}

pub fn run_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut m = Manifest::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        m.seed = Some(s);
    }
    let rp = &m.revpred;
    let hidden = args.hidden.unwrap_or(rp.hidden);
    let architectures = match args.arch {
        ArchChoice::Sequence => vec![Architecture::sequence(hidden)],
        ArchChoice::Logistic => vec![Architecture::Logistic],
        ArchChoice::Both => vec![Architecture::sequence(hidden), Architecture::Logistic],
    };
    let train_until = args
        .train_until
        .clone()
        .or(rp.train_until.clone())
        .ok_or_else(|| usage("no training cut-off: pass --train-until or set revpred.train_until"))?
        .resolve()?;
    let r = TrainResolved {
        command: "train-revpred",
        traces: args.traces.clone().map_or_else(|| Manifest::require(&m.traces, "traces"), Ok)?,
        out: args.out.clone().map_or_else(|| Manifest::require(&m.models, "out"), Ok)?,
        train_until,
        instances: args.instances.clone(),
        architectures,
        stride: args.stride.unwrap_or(rp.stride),
        epochs: args.epochs.unwrap_or(rp.epochs),
        batch_size: rp.batch_size,
        learning_rate: rp.learning_rate,
        logistic_learning_rate: rp.logistic_learning_rate,
        seed: m.seed(),
    };
    if r.stride <= 0 || r.stride % 60 != 0 {
        return Err(usage("stride must be a positive multiple of 60 seconds"));
    }
    let prov = Provenance::new(r.seed, &r);
    let catalog = m.catalog()?;
    let traces = super::load_traces(&r.traces)?;
    let chosen = selected(&traces, &r.instances)?;

    let mut jobs = Vec::new();
    for (name, tr) in &chosen {
        let ds = build_dataset(tr, DatasetConfig { stride: r.stride, ..Default::default() })
            .map_err(|e| data(format!("{name}: {e}")))?;
        let (train_set, _) = ds.split(r.train_until, r.train_until)?;
        for arch in &r.architectures {
            jobs.push((name.as_str(), *arch, train_set.clone()));
        }
    }
    let results: Vec<Result<PredictorModel, RevPredError>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(name, arch, ds)| {
                let cfg = ModelConfig {
                    architecture: *arch,
                    epochs: r.epochs,
                    batch_size: r.batch_size,
                    learning_rate: if *arch == Architecture::Logistic {
                        r.logistic_learning_rate
                    } else {
                        r.learning_rate
                    },
                    seed: r.seed,
                    ..ModelConfig::default()
                };
                let scale = price_scale(&catalog, name);
                s.spawn(move || train(ds, &cfg, scale))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread")).collect()
    });

    println!("{:<14} {:<9} {:>7} {:>8} {:>10}", "instance", "model", "samples", "positive", "final_loss");
    for ((name, arch, ds), res) in jobs.iter().zip(results) {
        let mut model = res.map_err(|e| data(format!("{name} ({}): {e}", arch.name())))?;
        model.tags = BTreeMap::from([
            ("train_until".to_string(), r.train_until.to_string()),
            ("stride".to_string(), r.stride.to_string()),
            ("provenance".to_string(), prov.comment()),
        ]);
        let path = r.out.join(model_file_name(name, arch));
        write_bytes(&path, &[serde_json::to_vec(&model)?, b"\n".to_vec()].concat())?;
        println!(
            "{:<14} {:<9} {:>7} {:>8.4} {:>10.5}",
            name,
            arch.name(),
            ds.len(),
            ds.balance.phi_plus,
            model.loss_history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Evaluate samples at or after this time.
    #[arg(long)]
    pub eval_from: Option<Instant>,
    #[arg(long = "instance")]
    pub instances: Vec<String>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EvalResolved {
    command: &'static str,
    traces: PathBuf,
    models: PathBuf,
    eval_from: i64,
    instances: Vec<String>,
}

pub fn run_eval(args: &EvalArgs) -> Result<(), CliError> {
    let m = Manifest::load(args.config.as_deref())?;
    let r = EvalResolved {
        command: "eval-revpred",
        traces: args.traces.clone().map_or_else(|| Manifest::require(&m.traces, "traces"), Ok)?,
        models: args.models.clone().map_or_else(|| Manifest::require(&m.models, "models"), Ok)?,
        eval_from: args
            .eval_from
            .clone()
            .or(m.revpred.eval_from.clone())
            .ok_or_else(|| usage("no evaluation start: pass --eval-from or set revpred.eval_from"))?
            .resolve()?,
        instances: args.instances.clone(),
    };
    let prov = Provenance::new(m.seed(), &r);
    let traces = super::load_traces(&r.traces)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&r.models)
        .map_err(|e| data(format!("{}: {e}", r.models.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut rows: Vec<(String, String, Evaluation)> = Vec::new();
    for f in files {
        let model = PredictorModel::load(&f).map_err(|e| data(format!("{}: {e}", f.display())))?;
        if !r.instances.is_empty() && !r.instances.contains(&model.trace_id) {
            continue;
        }
        let trace = traces
            .get(&model.trace_id)
            .ok_or_else(|| data(format!("no price trace for {}", model.trace_id)))?;
        let tag = |k: &str| model.tags.get(k).and_then(|v| v.parse::<i64>().ok());
        let stride = tag("stride").unwrap_or(DatasetConfig::default().stride);
        let train_until = tag("train_until").unwrap_or(i64::MIN);
        let ds = build_dataset(trace, DatasetConfig { stride, ..Default::default() })?;
        let (_, eval_set) = ds.split(train_until, r.eval_from)?;
        let e = evaluate(&model, &eval_set).map_err(|e| data(format!("{}: {e}", model.trace_id)))?;
        rows.push((model.trace_id.clone(), model.architecture().name().to_string(), e));
    }
    if rows.is_empty() {
        return Err(data(format!("no models in {}", r.models.display())));
    }
    println!(
        "{:<14} {:<9} {:>7} {:>5} {:>5} {:>5} {:>5} {:>8} {:>9} {:>7} {:>7}",
        "instance", "model", "samples", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1"
    );
    let mut csv_rows = Vec::new();
    for (inst, arch, e) in &rows {
        println!(
            "{:<14} {:<9} {:>7} {:>5} {:>5} {:>5} {:>5} {:>8.4} {:>9.4} {:>7.4} {:>7.4}",
            inst,
            arch,
            e.samples,
            e.true_positives,
            e.false_positives,
            e.true_negatives,
            e.false_negatives,
            e.accuracy,
            e.precision,
            e.recall,
            e.f1
        );
        csv_rows.push(vec![
            inst.clone(),
            arch.clone(),
            e.samples.to_string(),
            e.true_positives.to_string(),
            e.false_positives.to_string(),
            e.true_negatives.to_string(),
            e.false_negatives.to_string(),
            format!("{:.6}", e.accuracy),
            format!("{:.6}", e.precision),
            format!("{:.6}", e.recall),
            format!("{:.6}", e.f1),
        ]);
    }
    if let Some(out) = &args.out {
        let header = ["instance", "model", "samples", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1"];
        write_bytes(out, csv_text(&prov, &header, &csv_rows).as_bytes())?;
    }
    Ok(())
}
