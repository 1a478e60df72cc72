use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gibbs_forge_cli::config::{Budget, ExperimentConfig, Output, Params};
use gibbs_forge_cli::{explain, run_config, run_file, CliError, Experiment};

#[derive(Parser)]
#[command(name = "gibbs-forge", version, about = "Exact simulation and Poisson approximation of Gibbs point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON config.
    Run { config: PathBuf },
    /// Self-check over the model corpus.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Multiplier for the default replicate counts.
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        #[arg(long, default_value = "out/validate")]
        out: PathBuf,
    },
    /// Describe an experiment and its output columns.
    Explain { experiment: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    let outcome = match cmd {
        Command::Explain { experiment } => {
            let e = Experiment::parse(&experiment).ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                CliError::Parse(format!("unknown experiment {experiment:?}; expected one of {}", names.join(", ")))
            })?;
            print!("{}", explain::describe(e));
            return Ok(());
        }
        Command::Run { config } => run_file(&config)?,
        Command::Validate { seed, budget, out } => {
            let config = ExperimentConfig {
                experiment: Experiment::Validate,
                seed,
                model: None,
                window: None,
                boundary: Vec::new(),
                boundary_prime: Vec::new(),
                budget: Budget::default(),
                output: Output { dir: out },
                params: Params { scale: Some(budget), ..Default::default() },
            };
            let raw = serde_json::to_vec(&config).map_err(|e| CliError::Run(e.to_string()))?;
            let outcome = run_config(config, &raw)?;
            for line in &outcome.summary {
                println!("{line}");
            }
            if outcome.failed > 0 {
                return Err(CliError::Run("validation checks failed".into()));
            }
            return Ok(());
        }
    };
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("wrote {} ({} files)", outcome.dir.display(), outcome.manifest.files.len());
    Ok(())
}
