//! Run configuration with per-algorithm defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::envs::NewsvendorConfig;
use crate::error::{Error, Result};
use crate::pda::{NoiseMode, PdaUpdateConfig, ProxMode, SmoothingMode};
use crate::ppo::PpoUpdateConfig;
use crate::rollout::ReturnMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Pda,
    Ppo,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Pda => "pda",
            Algo::Ppo => "ppo",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pda" => Ok(Algo::Pda),
            "ppo" => Ok(Algo::Ppo),
            _ => Err(Error::InvalidArgument(format!("unknown algo {s}"))),
        }
    }
}

/// Every knob of a training run. Serialised in full to `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Algo,
    pub env: String,
    pub seed: u64,
    pub iterations: usize,
    pub steps_per_collect: usize,
    pub num_envs: usize,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub passes: usize,
    /// PDA actor passes when different from `passes`.
    #[serde(default)]
    pub actor_passes: Option<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    pub return_mode: ReturnMode,
    /// Multiplies rewards seen by the learner; reported returns are unscaled.
    pub reward_scale: f64,
    pub test_episodes: usize,
    /// Write a checkpoint every this many iterations (0: final only).
    pub checkpoint_every: usize,
    pub lambda: f64,
    pub sigma0: f64,
    pub noise: NoiseMode,
    pub smoothing: SmoothingMode,
    pub prox: ProxMode,
    pub clip: f64,
    pub vf_coeff: f64,
    pub ent_coeff: f64,
    /// Linear decay of the learning rate to zero over the run (on for PPO).
    pub lr_decay: bool,
    pub newsvendor: NewsvendorConfig,
    pub out: Option<PathBuf>,
}

/// Test episodes per evaluation: the newsvendor's returns are noisy enough
/// to need many more.
pub fn default_test_episodes(env: &str) -> usize {
    match env {
        "newsvendor" => 500,
        _ => 10,
    }
}

/// Default reward scale for the learner, per environment id.
pub fn default_reward_scale(env: &str) -> f64 {
    match env {
        "pendulum" => 0.01,
        "newsvendor" => 1e-4,
        _ => 1.0,
    }
}

impl RunConfig {
    pub fn defaults(algo: Algo, env: &str) -> Self {
        let steps_per_collect = 2048;
        let (lr, batch_size, minibatch_size, max_grad_norm) = match algo {
            Algo::Pda => (1e-3, 1000, 250, 0.1),
            Algo::Ppo => (3e-4, steps_per_collect, 64, 0.5),
        };
        Self {
            algo,
            env: env.to_string(),
            seed: 0,
            iterations: 50,
            steps_per_collect,
            num_envs: 1,
            batch_size,
            minibatch_size,
            passes: 10,
            actor_passes: None,
            lr,
            gamma: 0.99,
            gae_lambda: 0.95,
            max_grad_norm,
            return_mode: ReturnMode::LambdaReturn,
            reward_scale: default_reward_scale(env),
            test_episodes: default_test_episodes(env),
            checkpoint_every: 10,
            lambda: 0.5,
            sigma0: 1.3,
            noise: NoiseMode::Decaying,
            smoothing: SmoothingMode::DualAveraging,
            prox: ProxMode::Zero,
            clip: 0.2,
            vf_coeff: 0.25,
            ent_coeff: 0.0,
            lr_decay: algo == Algo::Ppo,
            newsvendor: NewsvendorConfig::default(),
            out: None,
        }
    }

    /// Number of iterations that fit in an env-step budget.
    pub fn iterations_for_budget(&self, env_steps: usize) -> usize {
        env_steps / self.steps_per_collect
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("config: {msg}")));
        if self.iterations == 0 || self.steps_per_collect == 0 || self.num_envs == 0 {
            return bad("iterations, steps_per_collect and num_envs must be positive");
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.passes == 0 || self.actor_passes == Some(0) {
            return bad("batch_size, minibatch_size and passes must be positive");
        }
        if !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) || !(self.reward_scale > 0.0) {
            return bad("lr, max_grad_norm and reward_scale must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma must be in [0, 1) and gae_lambda in [0, 1]");
        }
        if self.test_episodes == 0 {
            return bad("test_episodes must be positive");
        }
        if !(self.clip > 0.0) || self.vf_coeff < 0.0 || self.ent_coeff < 0.0 {
            return bad("clip must be positive, vf_coeff and ent_coeff nonnegative");
        }
        self.smoothing.validate()?;
        self.newsvendor.validate()?;
        Ok(())
    }

    pub fn pda_update(&self) -> PdaUpdateConfig {
        PdaUpdateConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            minibatch_size: self.minibatch_size,
            passes: self.passes,
            actor_passes: self.actor_passes,
            max_grad_norm: self.max_grad_norm,
            smoothing: self.smoothing,
        }
    }

    pub fn ppo_update(&self) -> PpoUpdateConfig {
        PpoUpdateConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            minibatch_size: self.minibatch_size,
            passes: self.passes,
            max_grad_norm: self.max_grad_norm,
            clip: self.clip,
            vf_coeff: self.vf_coeff,
            ent_coeff: self.ent_coeff,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
