//! Command-line interface: fit mixtures from images, compute transport
//! distances, render displacement interpolations, and reproduce the bundled
//! demonstration fixtures.
//!
//! Exit codes: 0 success, 1 failed recipe checks, 2 input error,
//! 3 infeasible under graph restriction, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod recipes;

#[derive(Debug)]
pub enum CliError {
    Core(gmmot::Error),
    Infeasible,
    ChecksFailed(usize),
    Input(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Infeasible => write!(f, "infeasible under graph restriction"),
            CliError::ChecksFailed(n) => write!(f, "{n} qualitative check(s) failed"),
            CliError::Input(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<gmmot::Error> for CliError {
    fn from(e: gmmot::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                gmmot::Error::NumericalFailure(_)
                | gmmot::Error::NotPositiveSemidefinite { .. }
                | gmmot::Error::SingularCovariance { .. } => 4,
                _ => 2,
            },
            CliError::Infeasible => 3,
            CliError::ChecksFailed(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "gmmot",
    version,
    about = "Optimal transport for (vector, unbalanced) Gaussian mixture models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by `distance` and `interpolate`.
#[derive(Debug, clap::Args)]
pub struct TransportArgs {
    /// First input: model JSON, or an image with --fit.
    pub(crate) input0: PathBuf,
    /// Second input: model JSON, or an image with --fit.
    pub(crate) input1: PathBuf,
    /// Coupling strategy: 0 restricted, 1 linear cost, 2 quadratic cost.
    #[arg(long, default_value_t = 2)]
    pub(crate) approach: u8,
    /// Channel-movement price.
    #[arg(long, default_value_t = 1.0)]
    pub(crate) gamma: f64,
    /// Price per unit of created/destroyed mass (defaults to --gamma).
    #[arg(long)]
    pub(crate) gamma_source: Option<f64>,
    /// Treat inputs as unbalanced (masses may differ).
    #[arg(long)]
    pub(crate) unbalanced: bool,
    /// Fit the inputs from images before transporting.
    #[arg(long)]
    pub(crate) fit: bool,
    /// Components per channel when fitting.
    #[arg(long, default_value_t = 10)]
    pub(crate) k: usize,
    /// RNG seed for fitting.
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub(crate) out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Transport distance between two mixture models.
    Distance(TransportArgs),
    /// Displacement interpolation: PPM frames plus per-step JSON.
    Interpolate {
        #[command(flatten)]
        args: TransportArgs,
        /// Number of interpolation steps (steps + 1 frames).
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Evaluation grid "x0:x1:nx" or "x0:x1:nx,y0:y1:ny"; derived from
        /// the models when omitted.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Fit a vector mixture model to an image (one mixture per channel).
    Fit {
        /// Input image (PPM/PGM/PNG).
        image: PathBuf,
        /// Components per channel.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a named demonstration recipe and its qualitative checks.
    Repro {
        /// Recipe name; use `list` to print the available names.
        name: String,
        /// Number of interpolation steps.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Distance(args) => commands::distance(&args),
        Command::Interpolate { args, steps, grid } => {
            commands::interpolate(&args, steps, grid.as_deref())
        }
        Command::Fit { image, k, seed, out } => commands::fit(&image, k, seed, &out),
        Command::Repro { name, steps, out } => recipes::run(&name, steps, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
