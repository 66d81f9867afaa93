use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, Step};
use crate::error::{Error, Result};

pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const DT: f64 = 0.05;
pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// One explicit Euler step of the swing-up dynamics. Returns the next state
/// and the reward. The torque is clipped to `[-2, 2]`.
pub fn dynamics(state: PendulumState, torque: f64) -> (PendulumState, f64) {
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * state.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let theta_dot = (state.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let theta = state.theta + theta_dot * DT;
    let th = wrap_angle(state.theta);
    let reward = -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
    (PendulumState { theta, theta_dot }, reward)
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    state: PendulumState,
    t: usize,
    rng: ChaCha8Rng,
}

impl Pendulum {
    pub fn new(gamma: f64) -> Self {
        Self {
            spec: EnvSpec {
                obs_dim: 3,
                act_dim: 1,
                act_low: vec![-MAX_TORQUE],
                act_high: vec![MAX_TORQUE],
                horizon: HORIZON,
                gamma,
            },
            state: PendulumState {
                theta: PI,
                theta_dot: 0.0,
            },
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
        self.t = 0;
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = PendulumState {
            theta: self.rng.random_range(-PI..PI),
            theta_dot: self.rng.random_range(-1.0..1.0),
        };
        self.t = 0;
        self.state.observation()
    }

    pub fn observe(&self) -> Vec<f64> {
        self.state.observation()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Step> {
        let torque = action[0];
        if !torque.is_finite() {
            return Err(Error::NonFinite("pendulum action"));
        }
        let (next, reward) = dynamics(self.state, torque);
        self.state = next;
        self.t += 1;
        Ok(Step {
            obs: next.observation(),
            reward,
            done: self.t >= self.spec.horizon,
            truncated: self.t >= self.spec.horizon,
        })
    }
}
