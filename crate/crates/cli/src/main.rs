//! `thinplate`: command line front end for plate evolutions and SL(3)
//! dissipation bounds.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thinplate::config::{parse_config, RunConfig};
use thinplate::run::{self, Outcome};

/// Exit code for unreadable or invalid configurations and I/O failures.
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "thinplate", version, about = "Quasistatic elastoplastic evolution of thin plates")]
struct Cli {
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed, overriding `[output] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Suppress progress messages and the report on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the time-incremental evolution and its diagnostics.
    Simulate { config: PathBuf },
    /// Print upper bounds on the SL(3) dissipation distance as CSV.
    Dissipation { config: PathBuf },
    /// Rerun the diagnostics on a stored snapshot.
    Check { config: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> thinplate::Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn conclude(outcome: &Outcome, quiet: bool) -> ExitCode {
    if !quiet {
        print!("{}", outcome.report());
    }
    if let Some(phase) = &outcome.failed_phase {
        match &outcome.failure {
            Some(msg) => eprintln!("error: phase {phase} failed: {msg}"),
            None => eprintln!("error: check {phase} failed"),
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let mut log = |msg: &str| {
        if !quiet || msg.starts_with("warning") {
            eprintln!("{msg}");
        }
    };
    let (path, phase) = match &cli.command {
        Command::Simulate { config } => (config, "simulate"),
        Command::Dissipation { config } => (config, "dissipation"),
        Command::Check { config } => (config, "check"),
    };
    let cfg = match load(path, &cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: phase config failed: {}: {e}", path.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = match &cli.command {
        Command::Simulate { .. } => run::simulate(&cfg, &mut log).map(|o| conclude(&o, quiet)),
        Command::Check { .. } => run::check(&cfg, &mut log).map(|o| conclude(&o, quiet)),
        Command::Dissipation { .. } => run::dissipation(&cfg, &mut log).map(|(o, table)| {
            print!("{table}");
            conclude(&o, true)
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: phase {phase} failed: {e}");
        ExitCode::from(EXIT_USAGE)
    })
}
