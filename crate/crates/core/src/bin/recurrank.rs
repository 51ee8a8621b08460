use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use recurrank::harness::{audit, report, run_experiment, ExperimentConfig, Failure};

#[derive(Parser)]
#[command(name = "recurrank", about = "Online learning-to-rank experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) pair and write traces and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: recurrank, cascadelinucb, toprank.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override any config key, e.g. `--set workers=4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check the click-model assumptions and the design bound on a small instance.
    Audit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarise a directory of trace files.
    Report {
        #[arg(long)]
        traces: PathBuf,
    },
}

fn load(path: &PathBuf, overrides: &[(String, String)]) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::Config(recurrank::Error::InvalidArgument(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })?;
    ExperimentConfig::parse_with_overrides(&text, overrides).map_err(Failure::Config)
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run {
            config,
            algo,
            seeds,
            horizon,
            out,
            set,
        } => {
            let mut overrides = Vec::new();
            for kv in &set {
                match kv.split_once('=') {
                    Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                    None => {
                        eprintln!("error: --set expects KEY=VALUE, got `{kv}`");
                        return ExitCode::from(2);
                    }
                }
            }
            let pairs = [
                ("algos", algo),
                ("seeds", seeds.map(|s| s.to_string())),
                ("horizon", horizon.map(|h| h.to_string())),
                ("out", out.map(|o| o.display().to_string())),
            ];
            overrides.extend(
                pairs
                    .into_iter()
                    .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
            );
            load(&config, &overrides).and_then(|c| {
                let outcome = run_experiment(&c)?;
                print!("{}", outcome.summary);
                Ok(())
            })
        }
        Command::Audit { config } => load(&config, &[]).and_then(|c| {
            let outcome = audit(&c)?;
            print!("{outcome}");
            if outcome.passed() {
                Ok(())
            } else {
                Err(Failure::Run(recurrank::Error::Invariant(
                    "audit failed".into(),
                )))
            }
        }),
        Command::Report { traces } => match report(&traces) {
            Ok(summary) => {
                print!("{summary}");
                Ok(())
            }
            Err(e) => Err(Failure::Run(e)),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
