use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use asympcharge::cli::{self, Command, Options};

/// Asymptotic total charges of initial data given in a chart at infinity,
/// with verification drivers for the structural facts behind their
/// coordinate invariance.
#[derive(Parser)]
#[command(name = "asympcharge", version, about)]
struct Args {
    #[command(subcommand)]
    command: Cli,
}

#[derive(Subcommand)]
enum Cli {
    /// Compute total charges for the configured potentials.
    Compute(Common),
    /// Charge invariance under a change of chart asymptotic to the identity.
    Invariance(Common),
    /// Cancellation of ∮𝕌(V, 𝓛_ζh₀) over closed surfaces.
    Cancel(Common),
    /// Kernel (KID) residuals of the configured potentials.
    Kid(Common),
    /// Equivariance m(h,Ψ,A*V) = m(h,Ψ∘A⁻¹,V) under the configured isometry.
    Equivariance(Common),
    /// Remainder-bound measurements and quasi-isometry certificates.
    Bounds(Common),
    /// Validate a config without computing.
    Validate(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: machine parallelism). Results are
    /// bit-identical for any worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Charge normalization: raw | adm.
    #[arg(long)]
    normalize: Option<String>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include a wall-clock timestamp in report metadata (off by default so
    /// repeated runs are byte-identical).
    #[arg(long)]
    timestamp: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, common) = match args.command {
        Cli::Compute(c) => (Command::Compute, c),
        Cli::Invariance(c) => (Command::Invariance, c),
        Cli::Cancel(c) => (Command::Cancel, c),
        Cli::Kid(c) => (Command::Kid, c),
        Cli::Equivariance(c) => (Command::Equivariance, c),
        Cli::Bounds(c) => (Command::Bounds, c),
        Cli::Validate(c) => (Command::Validate, c),
    };
    let code = cli::execute(&Options {
        command,
        config_path: common.config,
        workers: common.workers,
        normalize: common.normalize,
        out_dir: common.out,
        timestamp: common.timestamp,
    });
    ExitCode::from(code as u8)
}
