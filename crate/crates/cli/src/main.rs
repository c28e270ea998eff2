//! `chemotaxis`: steady states, sweeps, flows and oracles from a TOML run file.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::{run, RunError};
use crate::config::{parse_config, ConfigError};

#[derive(Parser, Debug)]
#[command(name = "chemotaxis", version, about = "Radial two-species chemotaxis toolkit")]
struct Args {
    /// Run file
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for random initial data and test directions
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", args.config.display())))?;
    let cfg = parse_config(&text)?;
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("threads: {e}")))?;
    }
    let tables = run(&cfg, args.seed)?;
    let echo = format!("{}seed = {}\n", cfg.echo(), args.seed);
    tables.iter().map(|t| t.write(&args.out, &echo).map_err(RunError::from)).collect()
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
