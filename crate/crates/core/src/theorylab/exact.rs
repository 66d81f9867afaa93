//! Exact PDA on single-state instances.
//!
//! With one state the cumulative objective after iteration `k` is
//! `Ψ̃_k(a) = B_k·c(a) − Σ β_t c(π̂_t) + L_k·a + λ_k·½(a − π₀)²` where
//! `B_k = Σ_{t≤k} β_t` and `L_k` collects the linear evaluator perturbations.

use serde::{Deserialize, Serialize};

use super::instance::{Family, SyntheticInstance};
use crate::error::{Error, Result};

/// Step-size schedule for `λ_k` (always with `β_t = t + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ScheduleCase {
    /// `λ_k = μ̃_d`, for strongly convex costs.
    MuPos,
    /// `λ_k = λ·(k+1)^{3/2}`, for convex costs.
    MuZero { lambda: f64 },
    /// `λ_k = K(K+1)·|μ̃_d|` for run horizon `K`, for weakly convex costs.
    MuNeg,
}

impl ScheduleCase {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleCase::MuPos => "mu_pos",
            ScheduleCase::MuZero { .. } => "mu_zero",
            ScheduleCase::MuNeg => "mu_neg",
        }
    }

    /// Rejects schedules whose curvature assumption does not match the instance.
    pub fn check(&self, inst: &SyntheticInstance) -> Result<()> {
        let mu = inst.mu_d();
        let ok = match self {
            ScheduleCase::MuPos => mu > 0.0,
            ScheduleCase::MuZero { lambda } => mu == 0.0 && *lambda > 0.0,
            ScheduleCase::MuNeg => mu < 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ScheduleMismatch {
                case: format!("{}/{}", inst.name, self.name()),
                mu_d: mu,
            })
        }
    }

    pub fn lambda_at(&self, k: usize, horizon: usize, mu_d: f64) -> f64 {
        match *self {
            ScheduleCase::MuPos => mu_d,
            ScheduleCase::MuZero { lambda } => lambda * ((k + 1) as f64).powf(1.5),
            ScheduleCase::MuNeg => (horizon * (horizon + 1)) as f64 * mu_d.abs(),
        }
    }
}

/// Coefficients of `Ψ̃_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sum_beta: f64,
    /// `Σ β_t c(π̂_t)`, subtracted.
    pub offset: f64,
    pub linear: f64,
    pub lambda: f64,
    pub prox: f64,
}

impl Objective {
    pub fn value(&self, inst: &SyntheticInstance, a: f64) -> f64 {
        self.sum_beta * inst.cost(a) - self.offset
            + self.linear * a
            + 0.5 * self.lambda * (a - self.prox) * (a - self.prox)
    }

    /// A subgradient (the cost's zero subgradient at a kink).
    pub fn derivative(&self, inst: &SyntheticInstance, a: f64) -> f64 {
        self.sum_beta * inst.cost_grad(a) + self.linear + self.lambda * (a - self.prox)
    }

    /// Strong-convexity modulus `μ̃_d·B_k + λ_k`.
    pub fn modulus(&self, inst: &SyntheticInstance) -> f64 {
        inst.mu_d() * self.sum_beta + self.lambda
    }

    /// Exact minimiser over the box. Closed form for quadratics; otherwise
    /// bisection on the monotone subgradient.
    pub fn argmin(&self, inst: &SyntheticInstance) -> Result<f64> {
        if self.modulus(inst) < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "objective is not convex (modulus {})",
                self.modulus(inst)
            )));
        }
        if let Family::Quadratic { center, weight } = inst.family {
            let denom = 2.0 * weight * self.sum_beta + self.lambda;
            if denom > 0.0 {
                let a = (2.0 * weight * self.sum_beta * center - self.linear + self.lambda * self.prox) / denom;
                return Ok(inst.clamp(a));
            }
        }
        let (mut lo, mut hi) = (inst.low, inst.high);
        if self.derivative(inst, lo) >= 0.0 {
            return Ok(lo);
        }
        if self.derivative(inst, hi) <= 0.0 {
            return Ok(hi);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.derivative(inst, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(if self.value(inst, lo) <= self.value(inst, hi) {
            lo
        } else {
            hi
        })
    }

    /// Moves away from the minimiser `pi` towards the farther box edge until
    /// the objective gap reaches `eps` (or the edge). Returns the perturbed
    /// action and its achieved gap, which lies in `[0, eps]`.
    pub fn inject(&self, inst: &SyntheticInstance, pi: f64, eps: f64) -> (f64, f64) {
        if eps <= 0.0 {
            return (pi, 0.0);
        }
        let base = self.value(inst, pi);
        let gap = |x: f64| (self.value(inst, x) - base).max(0.0);
        let (dir, reach) = if inst.high - pi >= pi - inst.low {
            (1.0, inst.high - pi)
        } else {
            (-1.0, pi - inst.low)
        };
        let edge = pi + dir * reach;
        if gap(edge) <= eps {
            return (edge, gap(edge));
        }
        let (mut lo, mut hi) = (0.0, reach);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if gap(pi + dir * mid) <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = pi + dir * lo;
        (x, gap(x))
    }
}

/// One iteration `k`: the objective `Ψ̃_k` and its exact and perturbed minimisers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub beta: f64,
    pub lambda: f64,
    pub mu_tilde: f64,
    pub objective: Objective,
    /// `π_{k+1}`
    pub pi_exact: f64,
    /// `π̂_{k+1}`
    pub pi_hat: f64,
    pub eps_opt: f64,
    /// `(1−γ)·(V^{π̂_{k+1}} − V*)`, i.e. `c(π̂_{k+1}) − c*`.
    pub cost_gap: f64,
    /// `2/((k+1)(k+2)) Σ_{t≤k} (t+1)(c(π̂_t) − c*)`, the weighted average gap
    /// at horizon `k+1`.
    pub weighted_gap: f64,
    /// `½(π_{k+1} − π*)²`
    pub bregman_to_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTrace {
    pub instance: SyntheticInstance,
    pub case: ScheduleCase,
    pub horizon: usize,
    pub eps_inject: f64,
    pub gamma: f64,
    /// Bound on the evaluator error terms; zero for exact advantages.
    pub varsigma: f64,
    pub optimum: f64,
    pub records: Vec<IterationRecord>,
}

impl ExactTrace {
    /// `π̂_t` for `t = 0..=K`, starting from the prox-centre.
    pub fn pi_hat(&self) -> Vec<f64> {
        std::iter::once(self.instance.prox_center)
            .chain(self.records.iter().map(|r| r.pi_hat))
            .collect()
    }

    pub fn eps_opt(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps_opt).collect()
    }
}

pub const THEORY_GAMMA: f64 = 0.99;

/// Runs `K` iterations of exact PDA, optionally degrading each update to an
/// `eps_inject`-suboptimal policy.
pub fn run_exact_pda(
    inst: &SyntheticInstance,
    case: ScheduleCase,
    horizon: usize,
    eps_inject: f64,
) -> Result<ExactTrace> {
    case.check(inst)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if !(eps_inject >= 0.0 && eps_inject.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps_inject must be ≥ 0, got {eps_inject}"
        )));
    }
    let mu_d = inst.mu_d();
    let optimum = inst.optimum();
    let c_star = inst.cost(optimum);
    let mut pi_hat = inst.prox_center;
    let mut obj = Objective {
        sum_beta: 0.0,
        offset: 0.0,
        linear: 0.0,
        lambda: 0.0,
        prox: inst.prox_center,
    };
    let mut weighted = 0.0;
    let mut records = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let beta = (k + 1) as f64;
        obj.sum_beta += beta;
        obj.offset += beta * inst.cost(pi_hat);
        obj.linear += beta * inst.perturbation(k, 1.0);
        obj.lambda = case.lambda_at(k, horizon, mu_d);
        weighted += beta * (inst.cost(pi_hat) - c_star);

        let pi_exact = obj.argmin(inst)?;
        let (next_hat, eps_opt) = obj.inject(inst, pi_exact, eps_inject);
        records.push(IterationRecord {
            k,
            beta,
            lambda: obj.lambda,
            mu_tilde: obj.modulus(inst),
            objective: obj,
            pi_exact,
            pi_hat: next_hat,
            eps_opt,
            cost_gap: inst.cost(next_hat) - c_star,
            weighted_gap: 2.0 * weighted / ((k + 1) * (k + 2)) as f64,
            bregman_to_opt: 0.5 * (pi_exact - optimum) * (pi_exact - optimum),
        });
        pi_hat = next_hat;
    }
    let bound = inst.low.abs().max(inst.high.abs());
    Ok(ExactTrace {
        instance: inst.clone(),
        case,
        horizon,
        eps_inject,
        gamma: THEORY_GAMMA,
        varsigma: 2.0 * inst.evaluator_noise * bound,
        optimum,
        records,
    })
}
