use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spottune::market::{ingest_trace, regularize, write_traces, PricePoint, PriceTrace, GRID_SECONDS};

use crate::error::{data, CliError};
use crate::output::{write_bytes, Provenance};

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Raw price files, or directories of `*.csv` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory for one regularized file per instance type.
    #[arg(long)]
    pub out: PathBuf,
    /// Drop malformed rows with a warning instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
}

pub fn run(args: &IngestArgs) -> Result<(), CliError> {
    let mut files = Vec::new();
    for p in &args.inputs {
        if p.is_dir() {
            files.extend(super::csv_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(data("no input files"));
    }
    let mut merged: BTreeMap<String, Vec<PricePoint>> = BTreeMap::new();
    for f in &files {
        let file = fs::File::open(f).map_err(|e| data(format!("{}: {e}", f.display())))?;
        let got = ingest_trace(file, args.skip_bad).map_err(|e| data(format!("{}: {e}", f.display())))?;
        for bad in &got.skipped {
            eprintln!("warning: {}: skipped {bad}", f.display());
        }
        for (name, tr) in got.traces {
            merged.entry(name).or_default().extend_from_slice(tr.points());
        }
    }
    if merged.is_empty() {
        return Err(data("inputs contain no price records"));
    }
    let prov = Provenance::new(0, args);
    for (name, mut points) in merged {
        // Later files win on duplicate timestamps.
        points.sort_by_key(|p| p.timestamp);
        points.dedup_by(|later, earlier| {
            if later.timestamp == earlier.timestamp {
                *earlier = *later;
                true
            } else {
                false
            }
        });
        let tr = regularize(&PriceTrace::new(name.clone(), points)?, GRID_SECONDS);
        let mut buf = Vec::new();
        write_traces(&mut buf, [&tr], Some(&prov.comment()))?;
        let path = args.out.join(format!("{}.csv", super::file_stem(&name)));
        write_bytes(&path, &buf)?;
        println!("{name}: {} minutes -> {}", tr.len(), path.display());
    }
    Ok(())
}
