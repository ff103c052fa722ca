use serde::{Deserialize, Serialize};

use crate::continual::threshold::DEFAULT_ADJUST_INTERVAL;
use crate::error::{NclError, Result};
use crate::harness::energy::EnergyModel;
use crate::network::NetworkConfig;
use crate::replay::codec::Codec;
use crate::training::optim::{OptimizerConfig, OptimizerKind};

/// Continual-phase learning rate: one hundredth of the pre-training rate.
pub fn lr_policy(eta_pre: f64) -> f64 {
    eta_pre / 100.0
}

/// How the continual phase is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    /// Reduced timesteps, adaptive thresholds, reduced learning rate, latent replay.
    AdaptiveReplay,
    /// Long-timestep latent replay with static thresholds and the pre-training rate.
    StaticReplay,
    /// Same settings as `AdaptiveReplay` without any replay data.
    NoReplay,
}

impl ExperimentMode {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentMode::AdaptiveReplay => "adaptive-replay",
            ExperimentMode::StaticReplay => "static-replay",
            ExperimentMode::NoReplay => "no-replay",
        }
    }

    pub fn uses_replay(self) -> bool {
        self != ExperimentMode::NoReplay
    }
}

impl std::str::FromStr for ExperimentMode {
    type Err = NclError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive-replay" => Ok(ExperimentMode::AdaptiveReplay),
            "static-replay" => Ok(ExperimentMode::StaticReplay),
            "no-replay" => Ok(ExperimentMode::NoReplay),
            other => Err(NclError::Config(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Reduced timestep count for latent generation and continual training.
    pub t_step: usize,
    /// Timesteps used while pre-training, and by `StaticReplay` throughout.
    pub t_pre: usize,
    /// Insertion layer, 1-based.
    pub l_ins: usize,
    pub e_pre: usize,
    pub e_cl: usize,
    pub eta_pre: f64,
    /// Explicit continual rate; ignored while `lr_policy_enabled` is set.
    pub eta_cl: f64,
    pub lr_policy_enabled: bool,
    pub adaptive_threshold: bool,
    pub adjust_interval: usize,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    /// Minibatch size of the continual phase; `0` means `batch_size`.
    pub cl_batch_size: usize,
    /// Logit per unit output spike rate.
    pub readout_scale: f64,
    /// Pre-train with the softmax restricted to the pre-training classes.
    pub mask_absent_classes: bool,
    pub codec: Codec,
    /// Ratechunk window; 0 selects `t_step / 4`.
    pub chunk: usize,
    pub replay_fraction: f64,
    /// Class learned in the continual phase; `None` holds out the last class.
    pub held_out_class: Option<usize>,
    pub seed: u64,
    pub network: NetworkConfig,
    pub energy: EnergyModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t_step: 20,
            t_pre: 100,
            l_ins: 3,
            e_pre: 20,
            e_cl: 50,
            eta_pre: 1e-3,
            eta_cl: 1e-5,
            lr_policy_enabled: true,
            adaptive_threshold: true,
            adjust_interval: DEFAULT_ADJUST_INTERVAL,
            optimizer: OptimizerKind::Adam,
            batch_size: 32,
            cl_batch_size: 0,
            readout_scale: 10.0,
            mask_absent_classes: true,
            codec: Codec::Ratechunk,
            chunk: 0,
            replay_fraction: 0.1,
            held_out_class: None,
            seed: 42,
            network: NetworkConfig::default(),
            energy: EnergyModel::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NclError::Config(m));
        if self.t_step == 0 || self.t_pre == 0 {
            return bad("timestep counts must be >= 1".into());
        }
        if self.network.layer_widths.len() < 2 {
            return bad("network needs at least two layers".into());
        }
        if self.l_ins == 0 || self.l_ins > self.network.layer_widths.len() {
            return bad(format!("l_ins {} outside 1..={}", self.l_ins, self.network.layer_widths.len()));
        }
        if !(self.eta_pre > 0.0) || !(self.eta_cl >= 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.adjust_interval == 0 {
            return bad("batch size and adjust interval must be >= 1".into());
        }
        if !(self.replay_fraction > 0.0 && self.replay_fraction <= 1.0) {
            return bad(format!("replay fraction {} outside (0, 1]", self.replay_fraction));
        }
        if self.chunk > u16::MAX as usize {
            return bad(format!("chunk {} too large", self.chunk));
        }
        self.network.params.validate().map_err(|e| NclError::Config(e.to_string()))
    }

    /// Continual learning rate after applying the policy, if enabled.
    pub fn effective_eta_cl(&self) -> f64 {
        if self.lr_policy_enabled {
            lr_policy(self.eta_pre)
        } else {
            self.eta_cl
        }
    }

    pub fn effective_cl_batch_size(&self) -> usize {
        if self.cl_batch_size == 0 {
            self.batch_size
        } else {
            self.cl_batch_size
        }
    }

    pub fn effective_chunk(&self) -> usize {
        if self.chunk == 0 {
            (self.t_step / 4).max(1)
        } else {
            self.chunk
        }
    }

    pub fn optimizer_config(&self, eta: f64) -> OptimizerConfig {
        match self.optimizer {
            OptimizerKind::Adam => OptimizerConfig::adam(eta),
            OptimizerKind::Sgd => OptimizerConfig::sgd(eta),
        }
    }

    /// The concrete settings a mode runs with.
    pub fn for_mode(&self, mode: ExperimentMode) -> RunConfig {
        match mode {
            ExperimentMode::AdaptiveReplay | ExperimentMode::NoReplay => self.clone(),
            ExperimentMode::StaticReplay => RunConfig {
                t_step: self.t_pre,
                adaptive_threshold: false,
                lr_policy_enabled: false,
                eta_cl: self.eta_pre,
                ..self.clone()
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| NclError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
