//! Exact solver for the per-state actor sub-problem, used to measure how well
//! the actor tracks `argmin_a ψ^Σ(s, a) + coeff·‖a − π₀(s)‖²`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::pda::{actor_objective, PdaState};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// A box-constrained objective over actions (`act_dim ≤ 2`).
pub struct SubProblem<F> {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub objective: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Argmin {
    pub action: Vec<f64>,
    pub value: f64,
    /// Width of the final refinement bracket per dimension.
    pub tolerance: f64,
}

impl<F: Fn(&[f64]) -> Result<f64>> SubProblem<F> {
    pub fn new(low: Vec<f64>, high: Vec<f64>, objective: F) -> Result<Self> {
        let ok =
            !low.is_empty() && low.len() <= 2 && low.len() == high.len() && low.iter().zip(&high).all(|(l, h)| l <= h);
        if !ok {
            return Err(Error::Dimension(format!("sub-problem box {low:?} / {high:?}")));
        }
        Ok(Self { low, high, objective })
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn eval(&self, a: &[f64]) -> Result<f64> {
        let v = (self.objective)(a)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("sub-problem objective"));
        }
        Ok(v)
    }

    fn grid_point(&self, d: usize, i: usize, n: usize) -> f64 {
        self.low[d] + (self.high[d] - self.low[d]) * i as f64 / (n - 1) as f64
    }

    /// Golden-section search along dimension `d` on `[lo, hi]`, other
    /// coordinates taken from `at`.
    fn golden(&self, at: &[f64], d: usize, mut lo: f64, mut hi: f64, iters: usize) -> Result<(Vec<f64>, f64)> {
        let with = |x: f64| {
            let mut p = at.to_vec();
            p[d] = x;
            p
        };
        let mut c = hi - INV_PHI * (hi - lo);
        let mut e = lo + INV_PHI * (hi - lo);
        let mut fc = self.eval(&with(c))?;
        let mut fe = self.eval(&with(e))?;
        for _ in 0..iters {
            if fc <= fe {
                hi = e;
                e = c;
                fe = fc;
                c = hi - INV_PHI * (hi - lo);
                fc = self.eval(&with(c))?;
            } else {
                lo = c;
                c = e;
                fc = fe;
                e = lo + INV_PHI * (hi - lo);
                fe = self.eval(&with(e))?;
            }
        }
        Ok(if fc <= fe { (with(c), fc) } else { (with(e), fe) })
    }

    /// Grid scan with `grid_n` points per dimension, then golden-section
    /// refinement inside the neighbouring cells of the best grid point. The
    /// result is never worse than the best grid point.
    pub fn exact_argmin(&self, grid_n: usize, refine_iters: usize) -> Result<Argmin> {
        if grid_n < 3 {
            return Err(Error::InvalidArgument(format!("grid_n must be ≥ 3, got {grid_n}")));
        }
        let dim = self.dim();
        let total = grid_n.pow(dim as u32);
        let mut best = (vec![0.0; dim], f64::INFINITY, vec![0usize; dim]);
        for flat in 0..total {
            let mut idx = vec![0; dim];
            let mut r = flat;
            for slot in idx.iter_mut() {
                *slot = r % grid_n;
                r /= grid_n;
            }
            let a: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(d, &i)| self.grid_point(d, i, grid_n))
                .collect();
            let v = self.eval(&a)?;
            if v < best.1 {
                best = (a, v, idx);
            }
        }
        let (mut action, mut value, idx) = best;
        let brackets: Vec<(f64, f64)> = (0..dim)
            .map(|d| {
                let lo = self.grid_point(d, idx[d].saturating_sub(1), grid_n);
                let hi = self.grid_point(d, (idx[d] + 1).min(grid_n - 1), grid_n);
                (lo, hi)
            })
            .collect();
        let rounds = if dim == 1 { 1 } else { refine_iters.max(1) };
        let per_line = if dim == 1 { refine_iters } else { refine_iters.max(20) };
        for _ in 0..rounds {
            for (d, &(lo, hi)) in brackets.iter().enumerate() {
                let (cand, v) = self.golden(&action, d, lo, hi, per_line)?;
                if v <= value {
                    action = cand;
                    value = v;
                }
            }
        }
        let width = brackets.iter().map(|(l, h)| h - l).fold(0.0, f64::max);
        Ok(Argmin {
            action,
            value,
            tolerance: width * INV_PHI.powi(per_line as i32),
        })
    }
}

/// The actor sub-problem of `state` at `obs`, in normalised action units.
pub fn pda_subproblem<'a>(
    state: &'a PdaState,
    obs: &'a [f64],
    coeff: f64,
) -> Result<SubProblem<impl Fn(&[f64]) -> Result<f64> + 'a>> {
    let obs_t = Tensor::new(vec![1, obs.len()], obs.to_vec())?;
    let pi0 = state.prox_actions(&obs_t)?.into_data();
    let n = state.act_dim();
    SubProblem::new(vec![-1.0; n], vec![1.0; n], move |a: &[f64]| {
        let mut x = obs.to_vec();
        x.extend_from_slice(a);
        let psi = state.psi_sum.predict_one(&x)?[0];
        actor_objective(psi, a, &pi0, coeff)
    })
}

/// Solver settings for tracking diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub grid_n: usize,
    pub refine_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grid_n: 401,
            refine_iters: 30,
        }
    }
}

/// Mean absolute gap between the actor and the exact minimiser over
/// `states`, averaged over action dims, multiplied by `unit_scale` to express
/// it in environment units.
pub fn tracking_mae(
    state: &PdaState,
    coeff: f64,
    states: &[Vec<f64>],
    solver: SolverSettings,
    unit_scale: f64,
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("tracking needs at least one state".into()));
    }
    let mut total = 0.0;
    for s in states {
        let exact = pda_subproblem(state, s, coeff)?.exact_argmin(solver.grid_n, solver.refine_iters)?;
        let actor = state.actor_mean(&Tensor::new(vec![1, s.len()], s.clone())?)?;
        let gap: f64 = actor.data().iter().zip(&exact.action).map(|(a, b)| (a - b).abs()).sum();
        total += gap / exact.action.len() as f64;
    }
    Ok(unit_scale * total / states.len() as f64)
}

/// Pendulum observations `[cos θ, sin θ, θ̇]` on a θ grid over `[−π, π]`.
pub fn pendulum_states(n_theta: usize, theta_dot: f64) -> Vec<Vec<f64>> {
    linspace(-PI, PI, n_theta)
        .into_iter()
        .map(|t| vec![t.cos(), t.sin(), theta_dot])
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeRow {
    pub theta: f64,
    pub tau: f64,
    pub psi_prime: f64,
    pub argmin_tau: f64,
    pub actor_tau: f64,
}

pub const LANDSCAPE_HEADER: &str = "theta,tau,psi_prime,argmin_tau,actor_tau";

/// Sub-problem landscape of a pendulum agent over a `θ × τ` grid at fixed
/// `θ̇`. Torques are in environment units (`max_torque` maps to `1`).
pub fn landscape(
    state: &PdaState,
    coeff: f64,
    n_theta: usize,
    n_tau: usize,
    theta_dot: f64,
    max_torque: f64,
    solver: SolverSettings,
) -> Result<Vec<LandscapeRow>> {
    let mut rows = Vec::with_capacity(n_theta * n_tau);
    for theta in linspace(-PI, PI, n_theta) {
        let obs = vec![theta.cos(), theta.sin(), theta_dot];
        let problem = pda_subproblem(state, &obs, coeff)?;
        let exact = problem.exact_argmin(solver.grid_n, solver.refine_iters)?;
        let actor = state.actor_mean(&Tensor::new(vec![1, 3], obs.clone())?)?.data()[0];
        for tau in linspace(-max_torque, max_torque, n_tau) {
            rows.push(LandscapeRow {
                theta,
                tau,
                psi_prime: problem.eval(&[tau / max_torque])?,
                argmin_tau: exact.action[0] * max_torque,
                actor_tau: actor * max_torque,
            });
        }
    }
    Ok(rows)
}

pub fn write_landscape_csv<W: Write>(mut w: W, rows: &[LandscapeRow]) -> Result<()> {
    writeln!(w, "{LANDSCAPE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.theta, r.tau, r.psi_prime, r.argmin_tau, r.actor_tau
        )?;
    }
    Ok(())
}

/// Per-epoch tracking errors from a `track` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub epochs: Vec<usize>,
    pub mae: Vec<f64>,
    /// Solver bracket width in environment units.
    pub solver_tolerance: f64,
    pub landscape_epochs: Vec<usize>,
}
