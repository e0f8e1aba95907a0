//! CSV and JSON writers. Every file starts with the schema version and the
//! resolved configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::CliError;

/// `results/run.csv` with suffix `roofline` becomes `results/run_roofline.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes serializable rows as CSV below two `#` comment lines.
pub fn write_csv<R: Serialize>(path: &Path, cfg: &RunConfig, rows: &[R]) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(w, "# config={}", serde_json::to_string(cfg).map_err(std::io::Error::other)?)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r).map_err(std::io::Error::other)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, cfg: &RunConfig, results: Value) -> Result<(), CliError> {
    let doc = json!({ "schema_version": SCHEMA_VERSION, "config": cfg, "results": results });
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(std::io::Error::other)?;
    writeln!(w)?;
    Ok(())
}

/// Header and records of a CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(std::io::Error::other)?;
    let header = r.headers().map_err(std::io::Error::other)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(std::io::Error::other)?;
    Ok((header, rows))
}
