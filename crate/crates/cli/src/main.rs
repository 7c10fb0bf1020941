use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exact transport duality laboratory.
#[derive(Parser)]
#[command(name = "tdl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a finite transport instance and certify the result.
    Solve(SolveArgs),
    /// Build a tower and its levels and write the artifacts.
    Construct(ConstructArgs),
    /// Build the double-indexed family and report the truncated gap evidence.
    Gap(GapArgs),
    /// Re-run the invariant suites on saved artifacts.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct SolveArgs {
    /// Instance JSON file.
    pub instance: PathBuf,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Compliant,
    Relaxed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub m1: u64,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, value_enum, default_value_t = Mode::Relaxed)]
    pub mode: Mode,
    /// Number of levels to build; defaults to the depth.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Floors for m_2, m_3, … in relaxed mode.
    #[arg(long, value_delimiter = ',')]
    pub growth_floor: Vec<u64>,
    /// Format for step-function data.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "tdl-out")]
    pub out: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("tower").required(true).args(["primes", "m1"]))]
pub struct GapArgs {
    /// Number of graphs beyond the identity.
    #[arg(long = "M")]
    pub graphs: usize,
    #[arg(long)]
    pub jmax: usize,
    /// Level of the truncation; defaults to jmax.
    #[arg(long)]
    pub j: Option<usize>,
    /// Explicit tower, e.g. 5,11.
    #[arg(long, value_delimiter = ',')]
    pub primes: Vec<u64>,
    #[arg(long)]
    pub m1: Option<u64>,
    #[arg(long, value_enum, default_value_t = Mode::Relaxed)]
    pub mode: Mode,
    #[arg(long, value_delimiter = ',')]
    pub growth_floor: Vec<u64>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 24)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// A construct output directory or a gap report file.
    pub path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Construct(a) => commands::construct(&a),
        Command::Gap(a) => commands::gap(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
