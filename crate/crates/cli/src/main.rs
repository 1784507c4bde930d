mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::Format;

#[derive(Debug, Parser)]
#[command(name = "polynet", version, about = "Exact polynomial networks, sigma-network Taylor approximants and regression sweeps")]
pub struct Cli {
    /// Root seed; every random stream is derived from it by name.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output format of the main report (defaults per command).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Main output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a polynomial into an exact rho-network.
    Represent(RepresentArgs),
    /// Convert between network activations.
    #[command(subcommand)]
    Convert(ConvertCommand),
    /// Width bound 2(R+d)^d and the exact unit count of the construction.
    Bound(BoundArgs),
    /// Evaluate or tabulate the activation functions.
    #[command(subcommand)]
    Activations(ActivationCommand),
    /// Localized Taylor sigma-networks.
    #[command(subcommand)]
    Taylor(TaylorCommand),
    /// Covering-number bounds and audits.
    #[command(subcommand)]
    Entropy(EntropyCommand),
    /// Regression rate experiments.
    #[command(subcommand)]
    Regress(RegressCommand),
}

#[derive(Debug, Args)]
pub struct RepresentArgs {
    /// Polynomial JSON file.
    #[arg(long)]
    pub poly: PathBuf,
    /// Check the network against the polynomial at random rational points.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Emit floating-point parameters instead of exact rationals.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Subcommand)]
pub enum ConvertCommand {
    /// Replace every relu unit by the identical rho unit.
    ReluToRho {
        #[arg(long)]
        net: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long = "R")]
    pub r: u32,
    #[arg(long)]
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ActivationName {
    Rho,
    Sigma,
    Relu,
}

#[derive(Debug, Subcommand)]
pub enum ActivationCommand {
    Eval {
        #[arg(long = "fn", value_enum)]
        func: ActivationName,
        /// Argument; a `p/q` rational when `--exact` is given.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        exact: bool,
    },
    Table {
        #[arg(long = "fn", value_enum)]
        func: ActivationName,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        step: f64,
    },
}

#[derive(Debug, Args)]
pub struct FunctionArgs {
    /// Test function: poly, sin, exp, weierstrass or cusp.
    #[arg(long = "fn", default_value = "sin")]
    pub func: String,
    #[arg(long)]
    pub beta: f64,
}

#[derive(Debug, Subcommand)]
pub enum TaylorCommand {
    /// Build the sigma-network equal to the localized Taylor approximant.
    Build {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long = "M")]
        m: usize,
        /// Derivative table (CSV with columns l, r, value) used instead of `--fn`.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Sup error of the approximant against its bound for several M.
    Error {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long = "M-list", value_delimiter = ',', required = true)]
        m_list: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        grid: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[arg(long = "P")]
    pub p: usize,
    #[arg(long = "R")]
    pub r: f64,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Debug, Subcommand)]
pub enum EntropyCommand {
    Bound {
        #[command(flatten)]
        cover: CoverArgs,
    },
    /// Snap random networks to the cover and measure the sup distance.
    Audit {
        #[command(flatten)]
        cover: CoverArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Mesh size for the sup distance.
        #[arg(long, default_value_t = 2001)]
        grid: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RegressCommand {
    Sweep {
        #[command(flatten)]
        function: FunctionArgs,
        /// Constraint radius; defaults to the function's Hölder norm bound.
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long = "n", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 20_000)]
        mc_points: usize,
        /// Noise standard deviation.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
