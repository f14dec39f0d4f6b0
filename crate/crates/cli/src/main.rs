//! `rfp`: foreseeable scenario ranges and preventable collision probabilities
//! from scenario data.

mod commands;
mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rfp_core::{Orientation, ScenarioFamily};

use crate::config::LoadedConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rfp_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) | CliError::Config(_) => "validation",
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
        }
    }
}

macro_rules! core_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_error_from!(
    rfp_core::scenario_store::StoreError,
    rfp_core::density::DensityError,
    rfp_core::evt::EvtError,
    rfp_core::foreseeable::ForeseeableError,
    rfp_core::driver_sim::SimError,
    rfp_core::preventable::PreventableError
);

#[derive(Debug, Parser)]
#[command(
    name = "rfp",
    version,
    about = "Foreseeable scenario ranges and preventable collision probabilities"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrientationArg {
    Upper,
    Lower,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Upper => Orientation::Upper,
            OrientationArg::Lower => Orientation::Lower,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Foreseeable parameter range from a kernel density estimate.
    ForeseeableKde {
        #[arg(long)]
        category: String,
        /// Residual rate per hour; repeat for several (overrides the config).
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
    },
    /// One-sided foreseeable bound from a generalized Pareto tail fit.
    ForeseeableEvt {
        #[arg(long)]
        category: String,
        /// Parameter name to bound.
        #[arg(long)]
        dimension: String,
        #[arg(long, value_enum, default_value = "upper")]
        orientation: OrientationArg,
        /// Fraction of the sample above the threshold (overrides the config).
        #[arg(long)]
        fraction: Option<f64>,
        /// Physical limit of the parameter; the tail is renormalized below it.
        #[arg(long, allow_hyphen_values = true)]
        truncate_at: Option<f64>,
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
    },
    /// Category collision probability: crude Monte Carlo, then importance sampling.
    PreventableCategory {
        #[arg(long)]
        category: String,
        #[arg(long)]
        n_pilot: Option<usize>,
        #[arg(long)]
        n_is: Option<usize>,
    },
    /// Collision-probability boundary over a parameter grid from the config.
    PreventableGrid {
        #[arg(long)]
        grid: String,
    },
    /// Finds scenarios in tagged object tracks.
    Mine {
        /// CSV with columns object_id,tag,start,end.
        #[arg(long)]
        tracks: PathBuf,
        /// Tags that must hold together, comma-separated; repeat for consecutive phases.
        #[arg(long = "phase", required = true)]
        phases: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        slack: f64,
        #[arg(long, default_value_t = 0.0)]
        min_duration: f64,
        /// Hours of driving, to report an exposure rate.
        #[arg(long)]
        hours: Option<f64>,
        /// Name used for the output files.
        #[arg(long, default_value = "mined")]
        label: String,
    },
    /// Simulates one scenario, optionally dumping the trajectory.
    Simulate {
        #[arg(long)]
        family: ScenarioFamily,
        /// Raw parameter vector, comma-separated.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        theta: Vec<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Fixed reaction delay instead of a sampled one.
        #[arg(long)]
        reaction_delay: Option<f64>,
        /// Write the trajectory CSV.
        #[arg(long)]
        trace: bool,
    },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = LoadedConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.config.base_seed = seed;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let out = cli.out.as_path();

    match cli.command {
        Command::ForeseeableKde { category, lambdas } => {
            if !lambdas.is_empty() {
                cfg.config.lambda_fs = lambdas;
            }
            cfg.validate()?;
            commands::foreseeable_kde(&cfg, &category, out)
        }
        Command::ForeseeableEvt {
            category,
            dimension,
            orientation,
            fraction,
            truncate_at,
            lambdas,
        } => {
            if !lambdas.is_empty() {
                cfg.config.lambda_fs = lambdas;
            }
            if let Some(f) = fraction {
                cfg.config.evt.exceed_fraction = f;
            }
            cfg.validate()?;
            commands::foreseeable_evt(
                &cfg,
                &category,
                &dimension,
                orientation.into(),
                truncate_at,
                out,
            )
        }
        Command::PreventableCategory {
            category,
            n_pilot,
            n_is,
        } => {
            if let Some(n) = n_pilot {
                cfg.config.mc.n_pilot = n;
            }
            if let Some(n) = n_is {
                cfg.config.mc.n_is = n;
            }
            cfg.validate()?;
            commands::preventable_category(&cfg, &category, out)
        }
        Command::PreventableGrid { grid } => {
            cfg.validate()?;
            commands::preventable_grid(&cfg, &grid, out)
        }
        Command::Mine {
            tracks,
            phases,
            slack,
            min_duration,
            hours,
            label,
        } => {
            cfg.validate()?;
            let opts = commands::MineArgs {
                tracks,
                phases,
                slack,
                min_duration,
                hours,
                label,
            };
            commands::mine(&cfg, &opts, out)
        }
        Command::Simulate {
            family,
            theta,
            dt,
            reaction_delay,
            trace,
        } => {
            cfg.validate()?;
            commands::simulate(&cfg, family, theta, dt, reaction_delay, trace, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json_errors {
                let body = serde_json::json!({
                    "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }
                });
                eprintln!("{body}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
