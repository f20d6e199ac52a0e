//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad input or configuration (including unwritable
//! output locations), 3 numeric failure.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{IdentifyConfig, THREADS_ENV};

use crate::error::Error;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => CliError::Input(m),
            Error::NumericFailure(m) => CliError::Numeric(m),
        }
    }
}

impl From<crate::io::FormatError> for CliError {
    fn from(e: crate::io::FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "sparse-sysid", version, about = "Sparse recursive identification of stochastic regression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo campaign on the ten-parameter state-space example.
    Example1(Example1Args),
    /// Stream a `phi_1..phi_r,y` CSV through the sparse identifier.
    Identify(IdentifyArgs),
    /// Simulate a Hammerstein system and recover its effective basis.
    Hammerstein(HammersteinArgs),
    /// Evaluate the finite-sample support bound.
    Bound(BoundArgs),
    /// Excitation statistics trace of a `phi_1..phi_r,y` CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Example1Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Identification settings, or a bare threshold schedule.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct HammersteinArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Simulation settings (`sim.json`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Also write `bound.json` and `manifest.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Example1(a) => commands::example1(&a),
        Command::Identify(a) => commands::identify(&a),
        Command::Hammerstein(a) => commands::hammerstein(&a),
        Command::Bound(a) => commands::bound(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Runs the example campaign from an optional config file into `out_dir`.
pub fn cmd_example1(config_path: Option<&Path>, out_dir: &Path) -> i32 {
    let args = Example1Args {
        config: config_path.map(Path::to_path_buf),
        out: out_dir.to_path_buf(),
        seed: None,
        replicates: None,
        n: None,
        format: OutputFormat::Csv,
    };
    report(commands::example1(&args))
}

pub fn cmd_identify(data_csv: &Path, config_json: Option<&Path>, out_dir: &Path) -> i32 {
    let args = IdentifyArgs {
        data: data_csv.to_path_buf(),
        config: config_json.map(Path::to_path_buf),
        out: out_dir.to_path_buf(),
        format: OutputFormat::Csv,
    };
    report(commands::identify(&args))
}

pub fn cmd_hammerstein(model_json: &Path, sim_json: Option<&Path>, out_dir: &Path) -> i32 {
    let args = HammersteinArgs {
        model: model_json.to_path_buf(),
        config: sim_json.map(Path::to_path_buf),
        out: out_dir.to_path_buf(),
        seed: None,
        n: None,
        format: OutputFormat::Csv,
    };
    report(commands::hammerstein(&args))
}

pub fn cmd_bound(inputs_json: &Path) -> i32 {
    report(commands::bound(&BoundArgs { config: inputs_json.to_path_buf(), out: None }))
}

fn report(result: CliResult<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
