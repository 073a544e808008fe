//! Command-line front end of `kerrtraj`: configuration, scenario presets and
//! CSV/JSON/SVG output.

pub mod config;
pub mod run;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kerrtraj::Protocol;

pub use config::{parse_config, Overrides, RunConfig, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] kerrtraj::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration errors, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kerrtraj", version, about = "Quantum trajectories of a two-photon driven Kerr resonator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state of the master equation and its two-component fit.
    SteadyState,
    /// Master-equation evolution from the vacuum.
    Evolve,
    /// A single quantum trajectory.
    Traj {
        #[arg(value_enum)]
        protocol: ProtocolArg,
    },
    /// Trajectory ensemble averaged on a time grid, compared with the
    /// master equation.
    Ensemble {
        #[arg(long, value_enum, default_value = "counting")]
        protocol: ProtocolArg,
    },
    /// Wigner function of the steady state.
    Wigner {
        /// Half-width of the square phase-space window.
        #[arg(long, default_value_t = 4.0)]
        extent: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
    },
    /// Regenerate the data behind one of the reference figures.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    #[value(alias = "counting")]
    Count,
    Homodyne,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::Count => Protocol::Counting,
            ProtocolArg::Homodyne => Protocol::Homodyne,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Parity switching under photon counting.
    Fig1a,
    /// Phase switching under homodyne detection.
    Fig1bc,
    /// The one-photon driven comparison case.
    Fig2,
}

#[allow(non_snake_case)]
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parameter preset.
    #[arg(long, global = true, value_enum)]
    pub scenario: Option<Scenario>,
    /// Allow parameters that differ from a figure preset.
    #[arg(long = "override", global = true)]
    pub allow_override: bool,
    /// Worker threads for ensembles (0: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory [default: $KERRTRAJ_OUTPUT_DIR or ./kerrtraj-output].
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long = "u", global = true, allow_negative_numbers = true)]
    pub U: Option<f64>,
    #[arg(long = "g", global = true, allow_negative_numbers = true)]
    pub G: Option<f64>,
    #[arg(long = "f", global = true, allow_negative_numbers = true)]
    pub F: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    #[arg(long, global = true)]
    pub t_final: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub sample_every: Option<f64>,
    #[arg(long, global = true)]
    pub n_traj: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Start of the stationary window.
    #[arg(long, global = true)]
    pub burn_in: Option<f64>,
    /// Ensemble grid points.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            scenario: self.scenario,
            params: config::ParamsFile {
                U: self.U,
                G: self.G,
                F: self.F,
                gamma: self.gamma,
                eta: self.eta,
                n_max: self.n_max,
            },
            t_final: self.t_final,
            dt: self.dt,
            sample_every: self.sample_every,
            n_traj: self.n_traj,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            workers: self.workers,
            burn_in: self.burn_in,
            grid_points: self.grid_points,
            allow_override: self.allow_override,
        }
    }

    /// Output directory without reading the configuration file, for error
    /// reports.
    pub fn fallback_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(config::OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUTPUT_DIR))
    }
}

pub use run::execute;
