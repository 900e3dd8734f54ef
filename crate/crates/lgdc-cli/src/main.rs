//! `lgdc <command> --config <path> [--seed N] [--out DIR]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing upstream
//! artifact, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lgdc_core::config::RunConfig;
use lgdc_core::pipeline::{self, Command};
use lgdc_core::Error;

#[derive(Parser)]
#[command(name = "lgdc", version, about = "Hybrid graph generation pipeline")]
struct Cli {
    /// One of: gen-data, coarsen, train, sample, eval, flops, export-dot
    command: String,
    /// Run configuration file (flat key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Root directory for data, checkpoints, and reports
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// LGDC_THREADS caps rayon's global pool; unset means all cores.
fn init_threads() -> lgdc_core::Result<()> {
    match std::env::var("LGDC_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => {
            let n: usize = v.parse().map_err(|_| {
                Error::Config(format!("LGDC_THREADS must be a thread count, got {v:?}"))
            })?;
            if n == 0 {
                return Err(Error::Config("LGDC_THREADS must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))
        }
    }
}

fn dispatch(cli: &Cli) -> lgdc_core::Result<String> {
    init_threads()?;
    let command = Command::parse(&cli.command)?;
    let cfg = RunConfig::load(&cli.config)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    pipeline::run(&cfg, command, &cli.out, seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::MissingArtifact(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
