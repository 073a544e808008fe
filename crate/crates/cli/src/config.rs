//! Run configuration: scenario presets, TOML files and command-line
//! overrides, resolved in that order.

use std::path::{Path, PathBuf};

use kerrtraj::{ModelParams, Protocol};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "KERRTRAJ_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "kerrtraj-output";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    Fig1aCounting,
    Fig1bcHomodyne,
    #[serde(rename = "fig2a_counting_1ph")]
    #[value(name = "fig2a_counting_1ph")]
    Fig2aCounting1ph,
    #[serde(rename = "fig2b_homodyne_1ph")]
    #[value(name = "fig2b_homodyne_1ph")]
    Fig2bHomodyne1ph,
    SteadyState,
    MeEvolve,
    Ensemble,
    Wigner,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1aCounting => "fig1a_counting",
            Scenario::Fig1bcHomodyne => "fig1bc_homodyne",
            Scenario::Fig2aCounting1ph => "fig2a_counting_1ph",
            Scenario::Fig2bHomodyne1ph => "fig2b_homodyne_1ph",
            Scenario::SteadyState => "steady_state",
            Scenario::MeEvolve => "me_evolve",
            Scenario::Ensemble => "ensemble",
            Scenario::Wigner => "wigner",
            Scenario::Custom => "custom",
        }
    }

    /// Model parameters the scenario starts from.
    pub fn base_params(self) -> ModelParams {
        match self {
            Scenario::Fig2aCounting1ph | Scenario::Fig2bHomodyne1ph => ModelParams::one_photon_reference(),
            _ => ModelParams::two_photon_reference(),
        }
    }

    /// Figure presets fix the physical parameters; the rest only suggest them.
    pub fn is_pinned(self) -> bool {
        matches!(
            self,
            Scenario::Fig1aCounting | Scenario::Fig1bcHomodyne | Scenario::Fig2aCounting1ph | Scenario::Fig2bHomodyne1ph
        )
    }

    /// Measurement protocol implied by the scenario, if any.
    pub fn protocol(self) -> Option<Protocol> {
        match self {
            Scenario::Fig1aCounting | Scenario::Fig2aCounting1ph => Some(Protocol::Counting),
            Scenario::Fig1bcHomodyne | Scenario::Fig2bHomodyne1ph => Some(Protocol::Homodyne),
            _ => None,
        }
    }

    fn default_t_final(self) -> f64 {
        match self {
            Scenario::MeEvolve | Scenario::Ensemble => 10.0,
            _ => 500.0,
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    /// Duration in `1/eta`.
    pub t_final: f64,
    pub dt: f64,
    pub sample_every: f64,
    pub n_traj: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for ensembles; 0 uses every available core.
    pub workers: usize,
    /// Start of the stationary window of trajectory statistics.
    pub burn_in: f64,
    /// Number of ensemble grid points on `[0, t_final]`.
    pub grid_points: usize,
}

/// The optional keys accepted in a configuration file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: Option<Scenario>,
    params: Option<ParamsFile>,
    t_final: Option<f64>,
    dt: Option<f64>,
    sample_every: Option<f64>,
    n_traj: Option<u64>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    burn_in: Option<f64>,
    grid_points: Option<usize>,
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub U: Option<f64>,
    pub G: Option<f64>,
    pub F: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub n_max: Option<usize>,
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub params: ParamsFile,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub sample_every: Option<f64>,
    pub n_traj: Option<u64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub burn_in: Option<f64>,
    pub grid_points: Option<usize>,
    /// Allow parameters that differ from a figure preset.
    pub allow_override: bool,
}

/// Resolves a run configuration. `default_scenario` applies when neither the
/// file nor the flags name one; `protocol` selects the default step when the
/// scenario does not imply it.
pub fn parse_config(
    file: Option<&Path>,
    flags: &Overrides,
    default_scenario: Scenario,
    protocol: Option<Protocol>,
) -> Result<RunConfig, CliError> {
    let from_file = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_file(&text)?
        }
        None => ConfigFile::default(),
    };
    resolve(from_file, flags, default_scenario, protocol)
}

/// Parses the text of a configuration file on its own.
pub fn parse_config_str(text: &str, default_scenario: Scenario, protocol: Option<Protocol>) -> Result<RunConfig, CliError> {
    resolve(parse_file(text)?, &Overrides::default(), default_scenario, protocol)
}

fn parse_file(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("invalid configuration: {}", e.message())))
}

fn resolve(
    file: ConfigFile,
    flags: &Overrides,
    default_scenario: Scenario,
    protocol: Option<Protocol>,
) -> Result<RunConfig, CliError> {
    let scenario = flags.scenario.or(file.scenario).unwrap_or(default_scenario);
    let base = scenario.base_params();
    let fp = file.params.unwrap_or_default();
    let op = &flags.params;
    let params = ModelParams {
        U: op.U.or(fp.U).unwrap_or(base.U),
        G: op.G.or(fp.G).unwrap_or(base.G),
        F: op.F.or(fp.F).unwrap_or(base.F),
        gamma: op.gamma.or(fp.gamma).unwrap_or(base.gamma),
        eta: op.eta.or(fp.eta).unwrap_or(base.eta),
        n_max: op.n_max.or(fp.n_max).unwrap_or(base.n_max),
    };
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if scenario.is_pinned() && !flags.allow_override {
        let pinned = [
            ("U", params.U, base.U),
            ("G", params.G, base.G),
            ("F", params.F, base.F),
            ("gamma", params.gamma, base.gamma),
            ("eta", params.eta, base.eta),
            ("n_max", params.n_max as f64, base.n_max as f64),
        ];
        for (name, value, preset) in pinned {
            if value != preset {
                return Err(CliError::Config(format!(
                    "scenario {} fixes {name} = {preset}; got {value} (pass --override to change it)",
                    scenario.name()
                )));
            }
        }
    }
    let protocol = scenario.protocol().or(protocol);
    let default_dt = protocol.map_or(1e-3, Protocol::default_dt);
    let output_dir = flags
        .output_dir
        .clone()
        .or(file.output_dir)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let config = RunConfig {
        scenario,
        params,
        t_final: flags.t_final.or(file.t_final).unwrap_or(scenario.default_t_final()),
        dt: flags.dt.or(file.dt).unwrap_or(default_dt),
        sample_every: flags.sample_every.or(file.sample_every).unwrap_or(0.1),
        n_traj: flags.n_traj.or(file.n_traj).unwrap_or(500),
        seed: flags.seed.or(file.seed).unwrap_or(1),
        output_dir,
        workers: flags.workers.or(file.workers).unwrap_or(0),
        burn_in: flags.burn_in.or(file.burn_in).unwrap_or(50.0),
        grid_points: flags.grid_points.or(file.grid_points).unwrap_or(50),
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let positive = [("t_final", self.t_final), ("dt", self.dt), ("sample_every", self.sample_every)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(CliError::Config(format!("burn_in = {} must be non-negative", self.burn_in)));
        }
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 || self.n_traj > i64::MAX as u64 {
            return Err(CliError::Config("seed and n_traj must be below 2^63".into()));
        }
        if self.n_traj == 0 {
            return Err(CliError::Config("n_traj must be at least 1".into()));
        }
        if self.grid_points < 2 {
            return Err(CliError::Config("grid_points must be at least 2".into()));
        }
        Ok(())
    }

    /// The configuration as a complete TOML document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Parses a document written by [`to_toml`](Self::to_toml).
    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid configuration: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }
}
