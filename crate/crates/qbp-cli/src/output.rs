use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const NA: &str = "NA";

/// Fixed 17-significant-digit scientific notation.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_else(|| NA.to_string())
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    jobs: usize,
    versions: Versions,
    files: Vec<String>,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct Versions {
    qbp: &'static str,
    qbp_cli: &'static str,
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub raw_config: &'a [u8],
    pub seed: u64,
    pub jobs: usize,
    pub files: &'a [PathBuf],
    pub elapsed: Duration,
}

pub fn write_manifest(dir: &Path, info: &RunInfo) -> Result<(), CliError> {
    let manifest = Manifest {
        command: info.command,
        config_sha256: format!("{:x}", Sha256::digest(info.raw_config)),
        seed: info.seed,
        jobs: info.jobs,
        versions: Versions {
            qbp: qbp::VERSION,
            qbp_cli: env!("CARGO_PKG_VERSION"),
        },
        files: info
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        wall_time_seconds: info.elapsed.as_secs_f64(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}
