pub mod curve;
pub mod demo;
pub mod ingest;
pub mod report;
pub mod revpred;
pub mod simulate;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use spottune::market::{ingest_trace, PriceTrace};

use crate::error::{data, CliError};

/// `*.csv` files directly inside `dir`, sorted by name.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every price file in `dir` into one trace per instance type.
pub fn load_traces(dir: &Path) -> Result<BTreeMap<String, PriceTrace>, CliError> {
    let mut out = BTreeMap::new();
    for f in csv_files(dir)? {
        let file = fs::File::open(&f)?;
        let got = ingest_trace(file, false).map_err(|e| data(format!("{}: {e}", f.display())))?;
        for (name, tr) in got.traces {
            if out.insert(name.clone(), tr).is_some() {
                return Err(data(format!("instance {name} appears in more than one file in {}", dir.display())));
            }
        }
    }
    if out.is_empty() {
        return Err(data(format!("no price traces in {}", dir.display())));
    }
    Ok(out)
}

/// File-name-safe form of an instance or job name.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' }).collect()
}
