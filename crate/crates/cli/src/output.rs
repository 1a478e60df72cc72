//! CSV tables and the JSON run manifest.

use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

/// One CSV file held in memory.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Table {
    pub fn from_rows<R: Serialize>(name: &str, rows: &[R]) -> Result<Table, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Run(format!("{name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Run(format!("{name}: {e}")))?;
        Ok(Table { name: name.to_string(), bytes })
    }
}

/// Tables produced by an experiment.
#[derive(Debug, Clone, Default)]
pub struct Results {
    pub tables: Vec<Table>,
    /// The wall-clock cap cut the run short.
    pub partial: bool,
    /// Lines for the terminal.
    pub summary: Vec<String>,
    /// Rows of a pass/fail table that failed.
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub elapsed_secs: f64,
    pub partial: bool,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: Vec<String>,
    pub failed: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_run(
    config: &ExperimentConfig,
    raw: &[u8],
    threads: usize,
    elapsed: Duration,
    results: Results,
) -> Result<RunOutcome, CliError> {
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for t in &results.tables {
        let path = dir.join(&t.name);
        std::fs::write(&path, &t.bytes).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
        files.push(FileEntry { name: t.name.clone(), sha256: sha256_hex(&t.bytes), bytes: t.bytes.len() });
    }
    let manifest = Manifest {
        experiment: config.experiment.name().to_string(),
        config_sha256: sha256_hex(raw),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        threads,
        elapsed_secs: elapsed.as_secs_f64(),
        partial: results.partial,
        files,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Run(e.to_string()))?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, json).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    let outcome = RunOutcome { dir, manifest, summary: results.summary, failed: results.failed };
    if outcome.manifest.partial {
        return Err(CliError::Budget(format!(
            "wall-clock cap reached; partial results in {}",
            outcome.dir.display()
        )));
    }
    Ok(outcome)
}
