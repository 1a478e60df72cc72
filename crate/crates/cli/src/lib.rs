//! Experiment runner for the `gibbs-forge` engine: config parsing, worker
//! pools, CSV tables and run manifests.

pub mod config;
pub mod experiments;
pub mod explain;
pub mod output;
pub mod validate;

use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig};
pub use output::{Manifest, RunOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Run(_) => 1,
        }
    }
}

impl From<gibbs_forge::Error> for CliError {
    fn from(e: gibbs_forge::Error) -> Self {
        match e {
            gibbs_forge::Error::InvalidParameter(m) => CliError::Validation(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

/// Worker count: `GIBBS_FORGE_THREADS`, then the config, then the machine.
pub fn resolve_threads(configured: Option<usize>) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("GIBBS_FORGE_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Validation(format!("GIBBS_FORGE_THREADS must be a positive integer, got {v:?}"))),
        };
    }
    Ok(configured.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Wall-clock cap shared by the experiments.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    start: Instant,
    cap: Option<Duration>,
}

impl Clock {
    pub fn new(cap_secs: Option<f64>) -> Self {
        Clock { start: Instant::now(), cap: cap_secs.map(Duration::from_secs_f64) }
    }

    pub fn expired(&self) -> bool {
        self.cap.is_some_and(|c| self.start.elapsed() >= c)
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Loads, validates and runs a config file, writing tables and a manifest
/// into the configured output directory.
pub fn run_file(path: &Path) -> Result<RunOutcome, CliError> {
    let (config, bytes) = ExperimentConfig::load(path)?;
    run_config(config, &bytes)
}

pub fn run_config(config: ExperimentConfig, raw: &[u8]) -> Result<RunOutcome, CliError> {
    let validated = config.validate()?;
    let threads = resolve_threads(validated.config.budget.threads)?;
    let clock = Clock::new(validated.config.budget.wall_clock_secs);
    let result = with_pool(threads, || experiments::execute(&validated, &clock))??;
    output::write_run(&validated.config, raw, threads, clock.elapsed(), result)
}
