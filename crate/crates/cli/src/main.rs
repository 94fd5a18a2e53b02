//! Command-line front end for the variance/volatility swap laboratory.
//!
//! Exit codes: 0 success, 1 config or usage error, 2 finiteness refusal,
//! 3 numerical breakdown.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::{Format, Overrides};

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad flags, or any library-level validation failure.
    Config(String),
    /// The requested computation is refused because an expectation
    /// diverges (or the convergence premise fails) and --force is absent.
    Refusal(String),
    /// Simulation produced non-finite values.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Refusal(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Refusal(msg) => write!(f, "refused: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical breakdown: {msg}"),
        }
    }
}

impl From<varswap::Error> for CliError {
    fn from(e: varswap::Error) -> Self {
        match e {
            varswap::Error::NumericalBreakdown(msg) => CliError::Numerical(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "varswap",
    version,
    about = "Discretely sampled variance and volatility swaps versus their continuous approximations",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// Override mc.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override mc.paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override grid.n.
    #[arg(long)]
    n: Option<usize>,
    /// Output directory (falls back to output.dir, then $VARSWAP_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, e.g. --format csv,json.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Run despite an Infinite verdict / failed convergence conditions.
    #[arg(long)]
    force: bool,
    /// Include wall-clock timestamps in outputs (off for reproducibility).
    #[arg(long)]
    timestamps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Price all four payoffs at one sampling count.
    Price {
        config: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
        /// Also report estimates scaled by 252/n.
        #[arg(long)]
        annualize: bool,
        /// Dump a capped raw-path CSV with a JSON sidecar.
        #[arg(long)]
        dump_paths: bool,
    },
    /// Paired convergence study over grid.n_list plus a rate fit.
    Converge {
        config: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Hill tail-index diagnostic on fresh simulations.
    Tail {
        config: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
        /// Order-statistics fraction (default 0.05).
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Second-moment explosion time of the vol-of-vol variance.
    #[command(allow_negative_numbers = true)]
    Explode {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        rho: f64,
        /// theta is only needed for the measure change.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Measure-change tilt; defaults to the least tilt killing the explosion.
        #[arg(long)]
        gamma: Option<f64>,
        /// Also apply the measure change and report transformed parameters.
        #[arg(long)]
        q_transform: bool,
        /// Write a JSON report to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Closed-form Laplace transform of the 3/2 integrated variance.
    #[command(allow_negative_numbers = true)]
    Laplace {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        v0: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Finiteness and values of 3/2 variance moments.
    #[command(allow_negative_numbers = true)]
    Moments {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        v0: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_delimiter = ',')]
        orders: Vec<f64>,
        /// Also evaluate the moment formula exactly as printed in its
        /// source (fails the sampler cross-check; kept for comparison).
        #[arg(long)]
        as_printed: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_formats(raw: &Option<Vec<String>>) -> Result<Option<Vec<Format>>, CliError> {
    let Some(raw) = raw else { return Ok(None) };
    let mut formats = Vec::with_capacity(raw.len());
    for f in raw {
        match f.as_str() {
            "csv" => formats.push(Format::Csv),
            "json" => formats.push(Format::Json),
            other => {
                return Err(CliError::Config(format!(
                    "unknown format `{other}` (expected csv or json)"
                )))
            }
        }
    }
    Ok(Some(formats))
}

fn overrides_from(common: &CommonFlags) -> Result<Overrides, CliError> {
    Ok(Overrides {
        seed: common.seed,
        paths: common.paths,
        n: common.n,
        out: common.out.clone(),
        formats: parse_formats(&common.format)?,
        force: common.force,
        timestamps: common.timestamps,
        ..Overrides::default()
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price { config, common, annualize, dump_paths } => {
            let mut ov = overrides_from(&common)?;
            ov.annualize = annualize;
            ov.dump_paths = dump_paths;
            let resolved = config::resolve("price", &config, &ov)?;
            commands::price::run(&resolved)
        }
        Command::Converge { config, common } => {
            let ov = overrides_from(&common)?;
            let resolved = config::resolve("converge", &config, &ov)?;
            commands::converge::run(&resolved)
        }
        Command::Tail { config, common, fraction } => {
            let mut ov = overrides_from(&common)?;
            ov.fraction = fraction;
            let resolved = config::resolve("tail", &config, &ov)?;
            commands::tail::run(&resolved)
        }
        Command::Explode { kappa, eta, rho, theta, gamma, q_transform, json } => {
            commands::analytic::explode(kappa, eta, rho, theta, gamma, q_transform, json.as_deref())
        }
        Command::Laplace { p, q, epsilon, v0, horizon, lambdas, json } => {
            commands::analytic::laplace(p, q, epsilon, v0, horizon, &lambdas, json.as_deref())
        }
        Command::Moments { p, q, epsilon, v0, t, orders, as_printed, json } => {
            commands::analytic::moments(p, q, epsilon, v0, t, &orders, as_printed, json.as_deref())
        }
    }
}

fn main() -> ExitCode {
    // clap's own usage-error exit code is 2, which this tool reserves for
    // finiteness refusals; remap usage errors to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
