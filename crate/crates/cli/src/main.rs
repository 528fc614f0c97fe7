use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pinlab_cli::config::Command;
use pinlab_cli::{run, Overrides};

/// Random walk pinning experiments.
#[derive(Debug, Parser)]
#[command(name = "pinlab", version)]
struct Args {
    /// green | annealed | quenched | lowtemp | smoothing | sandwich | renewal-mc
    #[arg(value_parser = parse_command)]
    command: Command,
    /// key = value config file with optional [subcommand] sections
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default pinlab-out)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to PINLAB_THREADS
    #[arg(long)]
    threads: Option<usize>,
    /// Solver truncation tolerance
    #[arg(long)]
    tolerance: Option<f64>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let ov = Overrides {
        config: args.config,
        out: args.out,
        seed: args.seed,
        threads: args.threads,
        tolerance: args.tolerance,
    };
    ExitCode::from(run(args.command, &ov) as u8)
}
