//! Single-state, single-step bandit wrapper around a [`SyntheticInstance`].

use super::{EnvSpec, Step};
use crate::error::{Error, Result};
use crate::theorylab::SyntheticInstance;

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    instance: SyntheticInstance,
    spec: EnvSpec,
}

impl SyntheticEnv {
    pub fn new(instance: SyntheticInstance, gamma: f64) -> Self {
        let spec = EnvSpec {
            obs_dim: 1,
            act_dim: 1,
            act_low: vec![instance.low],
            act_high: vec![instance.high],
            horizon: 1,
            gamma,
        };
        Self { instance, spec }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn instance(&self) -> &SyntheticInstance {
        &self.instance
    }

    pub fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        vec![1.0]
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Step> {
        let a = action[0];
        if !a.is_finite() {
            return Err(Error::NonFinite("synthetic action"));
        }
        Ok(Step {
            obs: self.observe(),
            reward: -self.instance.cost(a),
            done: true,
            truncated: false,
        })
    }
}
