//! Continuous-action environments implemented natively.
//!
//! Agents act in the normalised cube `[-1, 1]^act_dim`; [`EnvSpec::to_env_action`]
//! maps those actions affinely onto the environment's box.

pub mod newsvendor;
pub mod pendulum;
pub mod synthetic;

use serde::{Deserialize, Serialize};

pub use newsvendor::{DemandKind, Newsvendor, NewsvendorConfig, NewsvendorState};
pub use pendulum::{Pendulum, PendulumState};
pub use synthetic::SyntheticEnv;

use crate::error::{Error, Result};
use crate::theorylab::SyntheticInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub act_low: Vec<f64>,
    pub act_high: Vec<f64>,
    pub horizon: usize,
    pub gamma: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        let boxes_ok = self.act_low.len() == self.act_dim
            && self.act_high.len() == self.act_dim
            && self.act_low.iter().zip(&self.act_high).all(|(l, h)| l < h);
        if self.obs_dim == 0 || self.act_dim == 0 || !boxes_ok || self.horizon == 0 || !(0.0..1.0).contains(&self.gamma)
        {
            return Err(Error::InvalidArgument(format!("invalid env spec {self:?}")));
        }
        Ok(())
    }

    /// Affine map from `[-1, 1]` onto the box, clipping first.
    pub fn to_env_action(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .zip(self.act_low.iter().zip(&self.act_high))
            .map(|(a, (lo, hi))| lo + (a.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo))
            .collect()
    }

    pub fn to_normalized(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.act_low.iter().zip(&self.act_high))
            .map(|(a, (lo, hi))| 2.0 * (a - lo) / (hi - lo) - 1.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The episode ended on a time limit rather than a terminal state.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub enum Env {
    Pendulum(Pendulum),
    Newsvendor(Newsvendor),
    Synthetic(SyntheticEnv),
}

impl Env {
    /// Builds an environment from its string id: `pendulum`, `newsvendor`
    /// or `synthetic:<quadratic|piecewise|cosine>`.
    pub fn from_id(id: &str, gamma: f64) -> Result<Self> {
        Self::from_id_with(id, gamma, &NewsvendorConfig::default())
    }

    pub fn from_id_with(id: &str, gamma: f64, newsvendor: &NewsvendorConfig) -> Result<Self> {
        let env = match id {
            "pendulum" => Env::Pendulum(Pendulum::new(gamma)),
            "newsvendor" => Env::Newsvendor(Newsvendor::new(newsvendor.clone(), gamma)?),
            other => match other.strip_prefix("synthetic:") {
                Some(family) => {
                    let inst = SyntheticInstance::by_name(family).ok_or_else(|| Error::UnknownEnv(id.to_string()))?;
                    Env::Synthetic(SyntheticEnv::new(inst, gamma))
                }
                None => return Err(Error::UnknownEnv(id.to_string())),
            },
        };
        env.spec().validate()?;
        Ok(env)
    }

    pub fn spec(&self) -> &EnvSpec {
        match self {
            Env::Pendulum(e) => e.spec(),
            Env::Newsvendor(e) => e.spec(),
            Env::Synthetic(e) => e.spec(),
        }
    }

    /// Reseeds the environment's own RNG and samples an initial state.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        match self {
            Env::Pendulum(e) => e.reset(seed),
            Env::Newsvendor(e) => e.reset(seed),
            Env::Synthetic(e) => e.reset(seed),
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        match self {
            Env::Pendulum(e) => e.observe(),
            Env::Newsvendor(e) => e.observe(),
            Env::Synthetic(e) => e.observe(),
        }
    }

    /// Steps with an action in environment units.
    pub fn step(&mut self, action: &[f64]) -> Result<Step> {
        let dim = self.spec().act_dim;
        if action.len() != dim {
            return Err(Error::LengthMismatch {
                what: "action",
                expected: dim,
                got: action.len(),
            });
        }
        match self {
            Env::Pendulum(e) => e.step(action),
            Env::Newsvendor(e) => e.step(action),
            Env::Synthetic(e) => e.step(action),
        }
    }

    /// Steps with an action in the normalised cube.
    pub fn step_normalized(&mut self, action: &[f64]) -> Result<Step> {
        let a = self.spec().to_env_action(action);
        self.step(&a)
    }
}
