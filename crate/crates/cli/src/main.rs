//! `pendulum`: trajectories, period and action tables, verification
//! reports and momentum-map plots for the spherical pendulum.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "pendulum", version, about = "Spherical pendulum flows, periods and action-angle coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the H-flow from a section point or an explicit initial point.
    Trajectory(TrajectoryArgs),
    /// Table of periods and the second action over a (j, h) grid.
    Actions(GridArgs),
    /// Shipped, published and measured periods over a (j, h) grid.
    Periods(GridArgs),
    /// Run the oracle comparisons and write a JSON report.
    Verify(VerifyArgs),
    /// Plot the image of the momentum map.
    MapImage(MapArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PotentialArgs {
    /// Use V(z) = z² (the default).
    #[arg(long, conflicts_with_all = ["potential", "dpotential"])]
    pub quadratic: bool,
    /// Expression for V in the variable z, e.g. "z^2 + 0.3*z^3".
    #[arg(long, requires = "dpotential", allow_hyphen_values = true)]
    pub potential: Option<String>,
    /// Expression for V′ in the variable z.
    #[arg(long, requires = "potential", allow_hyphen_values = true)]
    pub dpotential: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Fiber of the section start; (0.4, 1.2) when no start is given.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "x0", requires = "h")]
    pub j: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "x0", requires = "j")]
    pub h: Option<f64>,
    /// Initial point x,y,z,u,v,w on T*S².
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write a plot of the path to this file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[command(flatten)]
    pub selection: GridSelection,
    /// Relative formula/oracle mismatch that raises the discrepancy flag.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write a heat map of T to this file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub grid: GridSelection,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Enforce the published formulas to this relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comparison times per period for the flow check.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fibers given as the product of `--j` and `--h` lists, an `n×n` grid,
/// or by default a 5×5 grid.
#[derive(Args, Debug, Clone)]
pub struct GridSelection {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Comma-separated j values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub j: Vec<f64>,
    /// Comma-separated h values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h: Vec<f64>,
    /// Use an n×n grid over j ∈ [−1.2, 1.2], h ∈ [0.05, 2.2].
    #[arg(long, conflicts_with_all = ["j", "h"])]
    pub grid: Option<usize>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Number of random phase-space points.
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or a point outside the domain: exit 2.
    Usage(String),
    /// A verification record failed: exit 1.
    Verification(String),
}

impl From<pendulum_core::Error> for CliError {
    fn from(e: pendulum_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Trajectory(a) => commands::trajectory(&a),
        Command::Actions(a) => commands::actions(&a),
        Command::Periods(a) => commands::periods(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::MapImage(a) => commands::map_image(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Verification(msg)) => {
            eprintln!("pendulum: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("pendulum: {msg}");
            ExitCode::from(2)
        }
    }
}
