use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symtest_cli::{execute, Command, Overrides};

#[derive(Parser)]
#[command(name = "symtest", version, about = "Hypothesis tests for distributional symmetry")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one invariance test on replication 0.
    Invariance(Flags),
    /// Run one conditional equivariance test on replication 0.
    Equivariance(Flags),
    /// Repeat the test over N replications and report rejection rates.
    Simulate(Flags),
    /// Bootstrap power estimate on a single dataset.
    Power(Flags),
    /// Grid-search kernel bandwidths on training simulations.
    Tune(Flags),
}

#[derive(clap::Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    /// Report path; `.csv` selects CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "N")]
    replications: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, f) = match cli.command {
        Cmd::Invariance(f) => (Command::Invariance, f),
        Cmd::Equivariance(f) => (Command::Equivariance, f),
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::Power(f) => (Command::Power, f),
        Cmd::Tune(f) => (Command::Tune, f),
    };
    let overrides = Overrides {
        n: f.n,
        replications: f.replications,
        b: f.b,
        m: f.m,
        alpha: f.alpha,
        seed: f.seed,
        group: f.group,
        kernel: f.kernel,
        threads: f.threads,
        output: f.out,
    };
    match execute(cmd, &f.config, &overrides) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("symtest: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
