mod commands;
mod output;
mod profile;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use profile::ToleranceProfile;

/// Term-structure geometry: distances, geodesics, density dynamics and
/// moment analysis of yield curves.
#[derive(Debug, Parser, Serialize)]
#[command(name = "termgeom", version)]
pub struct Cli {
    /// Tolerance profile for admissibility and solver checks.
    #[arg(
        long,
        global = true,
        env = "TERMGEOM_TOLERANCE_PROFILE",
        default_value = "standard"
    )]
    pub tolerance_profile: ToleranceProfile,

    /// Overrides the profile's allowed |∫ρ + tail − 1| for gridded densities.
    #[arg(long, global = true)]
    pub norm_tol: Option<f64>,

    /// Overrides the profile's largest discount factor allowed at the end of
    /// the grid.
    #[arg(long, global = true)]
    pub tail_tol: Option<f64>,

    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Distance between two or more curves.
    Distance(DistanceArgs),
    /// Geodesic between two members of a parametric family.
    Geodesic(GeodesicArgs),
    /// Monte Carlo simulation of the density dynamics from a JSON config.
    Simulate(SimulateArgs),
    /// Maximum-entropy density with prescribed moments.
    Calibrate(CalibrateArgs),
    /// Moments, existence flags and entropy of a curve.
    Moments(MomentsArgs),
    /// Pathwise moment and sphere-pairing checks on a simulation config.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct GridArgs {
    /// Longest maturity of the grid, in years.
    #[arg(long, default_value_t = 200.0)]
    pub x_max: f64,
    /// Number of grid nodes.
    #[arg(long, default_value_t = 4096)]
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bhattacharyya,
    FisherRao,
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    /// Curve CSV files (`maturity_years,discount_factor`) or `flat:R[:κ]`.
    #[arg(required = true, num_args = 2..)]
    pub curves: Vec<String>,
    #[arg(long, value_enum, default_value = "bhattacharyya")]
    pub method: Method,
    /// Family for `fisher-rao`: `flat-kappa:K`.
    #[arg(long)]
    pub family: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GeodesicArgs {
    /// `normal` or `flat-kappa:K`.
    #[arg(long)]
    pub family: String,
    /// Start point: `μ,σ` for normals, the rate `R` for flat curves.
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
    /// Points on the written path, including both ends.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Integration steps of the shooting method.
    #[arg(long, default_value_t = 512)]
    pub steps: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Simulation config (JSON).
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's number of paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Path whose moment series is written.
    #[arg(long, default_value_t = 0)]
    pub moment_path: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Target mean maturity, in years.
    #[arg(long)]
    pub mean: f64,
    /// Target variance.
    #[arg(long)]
    pub central2: Option<f64>,
    /// Target third central moment.
    #[arg(long, requires = "central2", allow_hyphen_values = true)]
    pub central3: Option<f64>,
    /// Target fourth central moment.
    #[arg(long, requires = "central3")]
    pub central4: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    /// Curve CSV, density CSV (`maturity_years,density_per_year`) or
    /// `flat:R[:κ]`.
    pub curve: String,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Simulation config (JSON).
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's number of paths.
    #[arg(long)]
    pub paths: Option<usize>,
}

/// A failure with its exit code: 2 for bad input, 3 for numerical failure,
/// 4 for infeasible calibration targets.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<termgeom::Error> for Failure {
    fn from(e: termgeom::Error) -> Self {
        let code = match &e {
            termgeom::Error::Infeasible(_) => 4,
            e if e.is_input_error() => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
