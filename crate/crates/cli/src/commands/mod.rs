pub mod evaluate;
pub mod gen_data;
pub mod partition;
pub mod simulate;
pub mod stress;
pub mod train;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use avoidnet_core::canet::{load_checkpoint, CaNet};
use avoidnet_core::dataset::VelocityPartition;
use avoidnet_core::policy::PolicyConfig;
use avoidnet_core::sim::{build_scenario, run, Controller, LearnedController, Scenario, Trace};
use avoidnet_core::OrcaParams;
use rand::Rng;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit code 1.
    Usage(String),
    /// Failure while doing the work: exit code 2.
    Runtime(anyhow::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<avoidnet_core::Error> for CliError {
    fn from(e: avoidnet_core::Error) -> Self {
        match e {
            avoidnet_core::Error::InvalidParameter(_)
            | avoidnet_core::Error::UnknownScenario(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CmdResult = Result<(), CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Uses the configured seed or draws and records a fresh one.
pub fn resolve_seed(seed: &mut Option<u64>) -> u64 {
    *seed.get_or_insert_with(|| rand::rng().random())
}

pub fn prepare_out(dir: &str) -> Result<PathBuf, CliError> {
    if dir.is_empty() {
        return Err(usage("`out` must name a directory"));
    }
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(path)
}

pub fn write_manifest<C: RunConfig>(
    out: &Path,
    cfg: &C,
    notes: &BTreeMap<String, String>,
) -> CmdResult {
    let path = out.join(format!("{}.manifest", C::COMMAND));
    fs::write(&path, cfg.manifest(notes)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Parameters shared by the simulation subcommands.
#[derive(Clone, Debug)]
pub struct SimSettings {
    pub params: OrcaParams,
    pub controller: ControllerKind,
    pub checkpoint: String,
    pub policy: PolicyConfig,
    pub noise_sigma: f64,
    pub time_limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerKind {
    Orca,
    Learned,
}

impl std::str::FromStr for ControllerKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "orca" => Ok(ControllerKind::Orca),
            "learned" => Ok(ControllerKind::Learned),
            other => Err(usage(format!(
                "controller must be `orca` or `learned`, got `{other}`"
            ))),
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> CmdResult {
        self.params.validate()?;
        self.policy.validate()?;
        if !(self.time_limit > 0.0) {
            return Err(usage("`time_limit` must be positive"));
        }
        if self.controller == ControllerKind::Learned && self.checkpoint.is_empty() {
            return Err(usage("the learned controller needs `checkpoint`"));
        }
        Ok(())
    }

    pub fn load_model(&self) -> Result<Option<CaNet<f32>>, CliError> {
        if self.controller == ControllerKind::Orca {
            return Ok(None);
        }
        let (model, _) = load_checkpoint::<f32>(Path::new(&self.checkpoint))
            .with_context(|| format!("loading checkpoint {}", self.checkpoint))?;
        Ok(Some(model))
    }

    /// Builds and runs one world; `seed` drives both the world and the
    /// controller's noise.
    pub fn run_one(
        &self,
        scenario: Scenario,
        agents: usize,
        seed: u64,
        model: Option<&CaNet<f32>>,
        partition: &VelocityPartition,
    ) -> Result<Trace, CliError> {
        let n = if agents == 0 {
            scenario.default_agents()
        } else {
            agents
        };
        let mut world = build_scenario(scenario, n, seed, &self.params)?;
        world.info.insert(
            "controller".into(),
            format!("{:?}", self.controller).to_lowercase(),
        );
        let trace = match model {
            None => run(world, &mut Controller::<f32>::Orca, self.time_limit)?,
            Some(model) => {
                let mut learned = LearnedController::new(model, partition, self.policy, seed);
                learned.noise_sigma = self.noise_sigma;
                run(world, &mut Controller::Learned(learned), self.time_limit)?
            }
        };
        Ok(trace)
    }
}

/// Declares the simulation keys inside a `run_config!` body.
macro_rules! sim_settings {
    ($cfg:expr) => {{
        let c = &$cfg;
        $crate::commands::SimSettings {
            params: avoidnet_core::OrcaParams {
                max_speed: c.max_speed,
                max_neighbors: c.max_neighbors,
                neighbor_dist: c.neighbor_dist,
                protect_radius: c.protect_radius,
                radius: c.radius,
                time_horizon: c.time_horizon,
                time_horizon_obs: c.time_horizon_obs,
            },
            controller: c.controller.parse()?,
            checkpoint: c.checkpoint.clone(),
            policy: avoidnet_core::policy::PolicyConfig {
                samples_per_class: c.samples_per_class,
                margin_horizon: c.margin_horizon,
                slowdown_steps: c.slowdown_steps,
                advected: c.advected,
                max_speed: c.max_speed,
                radius: c.radius,
            },
            noise_sigma: c.noise_sigma,
            time_limit: c.time_limit,
        }
    }};
}

pub(crate) use sim_settings;
