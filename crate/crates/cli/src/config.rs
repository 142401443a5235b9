//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::PathBuf;

use gse_core::asymptotics::{HorizonSpec, PickandsInputs, QueueParams, TailMode};
use gse_core::pickands::DEFAULT_S_SCHEDULE;
use gse_core::storage::{Engine, McConfig, MeshPolicy, Mode, DEFAULT_SAFETY};
use gse_core::variance::ModelDescriptor;
use gse_core::VarianceModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelDescriptor,
    pub queue: QueueConfig,
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub tail_mode: TailMode,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub pickands: PickandsSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueConfig {
    pub c: f64,
    pub beta: f64,
}

fn default_horizon() -> HorizonSpec {
    HorizonSpec::rho_times_delta(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_mc_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mesh: MeshPolicy,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub engine: Option<Engine>,
    /// Event estimated by `simulate` and `compare`.
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mc_n() -> u64 {
    100_000
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

fn default_mode() -> Mode {
    Mode::Sup
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            n: default_mc_n(),
            seed: None,
            mesh: MeshPolicy::default(),
            safety: DEFAULT_SAFETY,
            engine: None,
            mode: default_mode(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickandsSection {
    #[serde(default = "default_pickands_n")]
    pub n: u64,
    /// Grid divisions per interval; default by roughness of the local process.
    #[serde(default)]
    pub divisions: Option<usize>,
    #[serde(default = "default_schedule")]
    pub s_schedule: Vec<f64>,
    /// Known constants; when present nothing is estimated.
    #[serde(default)]
    pub constants: Option<PickandsInputs>,
}

fn default_pickands_n() -> u64 {
    100_000
}

fn default_schedule() -> Vec<f64> {
    DEFAULT_S_SCHEDULE.to_vec()
}

impl Default for PickandsSection {
    fn default() -> Self {
        PickandsSection {
            n: default_pickands_n(),
            divisions: None,
            s_schedule: default_schedule(),
            constants: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

/// A config whose numeric constraints have been checked.
#[derive(Debug)]
pub struct Checked {
    pub config: ExperimentConfig,
    pub model: VarianceModel,
    pub queue: QueueParams,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn check(self) -> Result<Checked, String> {
        let model = self.model.build().map_err(|e| format!("model: {e}"))?;
        let queue = QueueParams::new(self.queue.c, self.queue.beta).map_err(|e| format!("queue: {e}"))?;
        queue.check_for(&model).map_err(|e| format!("queue: {e}"))?;
        self.horizon.check().map_err(|e| format!("horizon: {e}"))?;
        if let Some(bad) = self.levels.iter().find(|u| !(**u > 0.0 && u.is_finite())) {
            return Err(format!("levels: {bad} is not a positive level"));
        }
        if self.mc.n < 100 {
            return Err(format!("mc.n: need at least 100 replicates, got {}", self.mc.n));
        }
        if !(self.mc.safety >= 0.0 && self.mc.safety.is_finite()) {
            return Err(format!("mc.safety: {} must be finite and >= 0", self.mc.safety));
        }
        match self.mc.mesh {
            MeshPolicy::Fixed { dt } | MeshPolicy::Adaptive { dt: Some(dt), .. } if !(dt > 0.0 && dt.is_finite()) => {
                return Err(format!("mc.mesh: step {dt} must be positive"));
            }
            _ => {}
        }
        if self.pickands.n < 2 {
            return Err("pickands.n: need at least two replicates".into());
        }
        if self.pickands.divisions == Some(0) {
            return Err("pickands.divisions: must be positive".into());
        }
        let s = &self.pickands.s_schedule;
        if s.len() < 2 || s.iter().any(|x| !(*x > 0.0 && x.is_finite())) || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format!("pickands.s_schedule: {s:?} must hold at least two increasing positive lengths"));
        }
        if let Some(c) = &self.pickands.constants {
            for (name, v) in [("sup_interval", c.sup_interval), ("inf_interval", c.inf_interval), ("rate", c.rate)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(format!("pickands.constants.{name}: {v} must be positive"));
                    }
                }
            }
        }
        Ok(Checked { config: self, model, queue })
    }
}

impl Checked {
    pub fn mc_config(&self, seed: u64) -> McConfig {
        let mc = &self.config.mc;
        McConfig { n: mc.n, seed, mesh: mc.mesh, safety: mc.safety, engine: mc.engine }
    }
}
