//! `fadyn`: simulations, step-size budgets, implicit-regularization runs, the autoencoder
//! experiment and the acceptance suite.

mod commands;
mod output;
mod settings;
mod simulate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use settings::Eta;

#[derive(Parser, Debug)]
#[command(name = "fadyn", version, about = "Feedback Alignment dynamics in deep linear networks")]
pub struct Cli {
    /// Directory for CSV and JSON outputs [default: .]
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed recorded in manifests; seeds the autoencoder data when --data-seed is absent
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with one table per command, e.g. [simulate.euler] or [autoencoder]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate or iterate one scheme and write trajectory CSV plus manifest
    Simulate {
        #[command(subcommand)]
        scheme: SimScheme,
    },
    /// Print step-size budgets as JSON
    Bounds {
        #[command(subcommand)]
        scheme: BoundScheme,
    },
    /// Threshold times, plateau values and rescaled trajectories
    ImplicitReg(ImplicitArgs),
    /// Linear-autoencoder FA vs GD experiment
    Autoencoder(AutoencoderArgs),
    /// Run the acceptance suite
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum SimScheme {
    ScalarOde(ScalarOdeArgs),
    DeepOde(DeepOdeArgs),
    Euler(DiscreteArgs),
    Midpoint(DiscreteArgs),
    MidpointDeep(DeepDiscreteArgs),
}

#[derive(Subcommand, Debug)]
pub enum BoundScheme {
    Euler(BoundArgs),
    Midpoint(BoundArgs),
    MidpointDeep(DeepBoundArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarOdeArgs {
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// θ₁(0) [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    /// θ₂(0) [default: 0, or θ₁(0)²/(2d) with --scheme-k0]
    #[arg(long = "theta2-0", allow_hyphen_values = true)]
    pub theta2_0: Option<f64>,
    /// Aligned start θ₂(0) = θ₁(0)²/(2d), so K = 0
    #[arg(long)]
    #[serde(default)]
    pub scheme_k0: bool,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Keep every n-th sample
    #[arg(long)]
    pub every: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepOdeArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    /// FA constants d₁,…,d_{L−1}
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub every: Option<usize>,
    /// Integrate the single θ₁ equation and rebuild the other layers
    #[arg(long)]
    #[serde(default)]
    pub reduced: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteArgs {
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Step size, or `auto` for 0.9 of the budget [default: auto]
    #[arg(long)]
    pub eta: Option<Eta>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub every: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepDiscreteArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<Eta>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundArgs {
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Evaluate the rate constants at this step size [default: 0.9 of the budget]
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepBoundArgs {
    /// Number of layers L
    #[arg(long = "L", visible_alias = "depth")]
    pub depth: Option<usize>,
    /// FA constants d₁,…,d_{L−1}
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<f64>>,
    /// [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplicitArgs {
    /// Three distinct roots r₁<r₂<r₃
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub roots: Option<Vec<f64>>,
    #[arg(long)]
    pub d: Option<f64>,
    /// Integration constant K shared by all components
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Aligned components (K = 0): report vanishing times T₀
    #[arg(long)]
    #[serde(default)]
    pub k0: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    /// Start offset e^{−δ} from r₂ [default: 30]
    #[arg(long)]
    pub delta: Option<f64>,
    /// above | below [default: above]
    #[arg(long)]
    pub side: Option<String>,
    /// Rescaled time step [default: T/2000]
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct AutoencoderArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    /// 2 or 3
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    /// One feedback seed per repeat
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Draw fresh noise in every repeat
    #[arg(long)]
    pub resample_noise: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Criterion id (e.g. 5 or c5), tag (euler, midpoint, matrix, …) or title fragment
    #[arg(long)]
    pub filter: Option<String>,
    /// Negative control: scale the continuous rate constant by 1.5
    #[arg(long)]
    pub inject_wrong_rate: bool,
}

/// A command outcome other than success.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: 1, message: format!("{}: {e}", path.display()) }
    }

    /// Exits through clap so the usage line is printed.
    pub fn missing(flag: &str) -> Self {
        Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, format!("--{flag} is required (flag or config key)"))
            .exit()
    }
}

impl From<fa_core::Error> for Failure {
    fn from(e: fa_core::Error) -> Self {
        use fa_core::Error::*;
        let code = match e {
            Diverged { .. } => 3,
            Io(_) | Csv(_) | Json(_) => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

pub fn required<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::missing(flag))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = settings::ConfigFile::load(cli.config.as_deref())?;
    let output = match (&cli.output, config.top("output")) {
        (Some(p), _) => p.clone(),
        (None, Some(serde_json::Value::String(s))) => PathBuf::from(s),
        (None, Some(_)) => return Err(Failure::invalid("config key 'output' must be a string")),
        (None, None) => PathBuf::from("."),
    };
    let seed = match (cli.seed, config.top("seed")) {
        (Some(s), _) => Some(s),
        (None, Some(v)) => Some(v.as_u64().ok_or_else(|| Failure::invalid("config key 'seed' must be an unsigned integer"))?),
        (None, None) => None,
    };
    let ctx = commands::Context { out: output::OutDir::new(&output), seed, config };
    match cli.command {
        Command::Simulate { scheme } => simulate::run(&ctx, scheme),
        Command::Bounds { scheme } => commands::bounds(&ctx, scheme),
        Command::ImplicitReg(args) => commands::implicit_reg(&ctx, args),
        Command::Autoencoder(args) => commands::autoencoder(&ctx, args),
        Command::Verify(args) => commands::verify(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
