use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{EnvSpec, Step};
use crate::error::{Error, Result};

/// Scale applied to prices and costs in the observation.
const MONEY_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandKind {
    Poisson,
    /// Uniform on `[0, 2μ]`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewsvendorConfig {
    pub lead_time: usize,
    pub price: f64,
    pub cost: f64,
    pub holding: f64,
    pub penalty: f64,
    pub max_order: f64,
    pub demand_mean_low: f64,
    pub demand_mean_high: f64,
    pub horizon: usize,
    pub demand: DemandKind,
}

impl Default for NewsvendorConfig {
    fn default() -> Self {
        Self {
            lead_time: 5,
            price: 100.0,
            cost: 50.0,
            holding: 2.0,
            penalty: 10.0,
            max_order: 200.0,
            demand_mean_low: 20.0,
            demand_mean_high: 100.0,
            horizon: 40,
            demand: DemandKind::Poisson,
        }
    }
}

impl NewsvendorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lead_time >= 1
            && self.price > self.cost
            && self.cost > 0.0
            && self.holding >= 0.0
            && self.penalty >= 0.0
            && self.max_order > 0.0
            && self.demand_mean_low > 0.0
            && self.demand_mean_low <= self.demand_mean_high
            && self.horizon >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid newsvendor config {self:?}")))
        }
    }

    /// Single-period reward for on-hand `inventory`, realised `demand` and order `q`.
    pub fn reward(&self, inventory: f64, demand: f64, q: f64) -> f64 {
        let sold = inventory.min(demand);
        let leftover = (inventory - demand).max(0.0);
        let shortage = (demand - inventory).max(0.0);
        self.price * sold - self.cost * q - self.holding * leftover - self.penalty * shortage
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewsvendorState {
    /// Outstanding orders; the head arrives next period.
    pub pipeline: Vec<f64>,
    pub demand_mean: f64,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct Newsvendor {
    cfg: NewsvendorConfig,
    spec: EnvSpec,
    state: NewsvendorState,
    rng: ChaCha8Rng,
    last_delivery: f64,
}

impl Newsvendor {
    pub fn new(cfg: NewsvendorConfig, gamma: f64) -> Result<Self> {
        cfg.validate()?;
        let spec = EnvSpec {
            obs_dim: 5 + cfg.lead_time,
            act_dim: 1,
            act_low: vec![0.0],
            act_high: vec![cfg.max_order],
            horizon: cfg.horizon,
            gamma,
        };
        let state = NewsvendorState {
            pipeline: vec![0.0; cfg.lead_time],
            demand_mean: cfg.demand_mean_low,
            t: 0,
        };
        Ok(Self {
            cfg,
            spec,
            state,
            rng: ChaCha8Rng::seed_from_u64(0),
            last_delivery: 0.0,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn config(&self) -> &NewsvendorConfig {
        &self.cfg
    }

    pub fn state(&self) -> &NewsvendorState {
        &self.state
    }

    /// Units that arrived in the most recent step.
    pub fn last_delivery(&self) -> f64 {
        self.last_delivery
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.cfg.demand_mean_low, self.cfg.demand_mean_high);
        let mu = if lo < hi { self.rng.random_range(lo..hi) } else { lo };
        self.state = NewsvendorState {
            pipeline: vec![0.0; self.cfg.lead_time],
            demand_mean: mu,
            t: 0,
        };
        self.last_delivery = 0.0;
        self.observe()
    }

    /// Economic parameters followed by the pipeline, all rescaled to O(1).
    pub fn observe(&self) -> Vec<f64> {
        let c = &self.cfg;
        let mut obs = vec![
            c.price / MONEY_SCALE,
            c.cost / MONEY_SCALE,
            c.holding / MONEY_SCALE,
            c.penalty / MONEY_SCALE,
            self.state.demand_mean / c.max_order,
        ];
        obs.extend(self.state.pipeline.iter().map(|q| q / c.max_order));
        obs
    }

    fn sample_demand(&mut self) -> f64 {
        let mu = self.state.demand_mean;
        match self.cfg.demand {
            DemandKind::Poisson => Poisson::new(mu).map(|d| d.sample(&mut self.rng)).unwrap_or(0.0),
            DemandKind::Uniform => self.rng.random_range(0.0..=2.0 * mu),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Step> {
        if !action[0].is_finite() {
            return Err(Error::NonFinite("newsvendor action"));
        }
        let demand = self.sample_demand();
        self.step_with_demand(action[0], demand)
    }

    /// Step with an externally chosen demand realisation.
    pub fn step_with_demand(&mut self, order: f64, demand: f64) -> Result<Step> {
        if !order.is_finite() || !demand.is_finite() {
            return Err(Error::NonFinite("newsvendor step"));
        }
        let q = order.clamp(0.0, self.cfg.max_order);
        let inventory = self.state.pipeline[0];
        let reward = self.cfg.reward(inventory, demand, q);
        self.state.pipeline.rotate_left(1);
        *self.state.pipeline.last_mut().unwrap() = q;
        self.state.t += 1;
        self.last_delivery = inventory;
        Ok(Step {
            obs: self.observe(),
            reward,
            done: self.state.t >= self.cfg.horizon,
            truncated: false,
        })
    }
}
