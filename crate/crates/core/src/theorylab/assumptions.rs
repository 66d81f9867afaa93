//! Empirical estimates of the approximation assumptions for a trained agent.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::pda::PdaState;
use crate::subsolver::{pda_subproblem, SolverSettings, SubProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub states: usize,
    pub eps_opt_min: f64,
    pub eps_opt_mean: f64,
    pub eps_opt_max: f64,
    /// Largest finite-difference slope of `ψ` along the action grid.
    pub lipschitz: f64,
    /// Smallest second difference of `ψ` along the action grid (a lower
    /// curvature bound, so `μ̃_d` is estimated by its value).
    pub curvature: f64,
    pub solver_tolerance: f64,
}

/// Slope and curvature estimates of `f` along each coordinate axis through
/// the origin of the box `[-1, 1]^dim`.
fn grid_derivatives(f: &dyn Fn(&[f64]) -> Result<f64>, dim: usize, grid_n: usize) -> Result<(f64, f64)> {
    let h = 2.0 / (grid_n - 1) as f64;
    let mut lip: f64 = 0.0;
    let mut curv = f64::INFINITY;
    for d in 0..dim {
        let vals = (0..grid_n)
            .map(|i| {
                let mut a = vec![0.0; dim];
                a[d] = -1.0 + h * i as f64;
                f(&a)
            })
            .collect::<Result<Vec<_>>>()?;
        for w in vals.windows(2) {
            lip = lip.max((w[1] - w[0]).abs() / h);
        }
        for w in vals.windows(3) {
            curv = curv.min((w[2] - 2.0 * w[1] + w[0]) / (h * h));
        }
    }
    Ok((lip, curv))
}

/// Measures `ε_opt`, Lipschitz and curvature estimates from per-state
/// closures. `psi(s)` is the advantage surrogate at state `s`, `objective(s)`
/// the actor sub-problem and `actor(s)` the actor's action.
pub fn measure_with<P, O, A>(
    states: &[Vec<f64>],
    act_dim: usize,
    psi: P,
    objective: O,
    actor: A,
    grid_n: usize,
    solver: SolverSettings,
) -> Result<AssumptionReport>
where
    P: Fn(&[f64], &[f64]) -> Result<f64>,
    O: Fn(&[f64], &[f64]) -> Result<f64>,
    A: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if states.is_empty() || grid_n < 3 {
        return Err(Error::InvalidArgument("need states and grid_n ≥ 3".into()));
    }
    let mut eps = Vec::with_capacity(states.len());
    let mut lip: f64 = 0.0;
    let mut curv = f64::INFINITY;
    let mut tol: f64 = 0.0;
    for s in states {
        let problem = SubProblem::new(vec![-1.0; act_dim], vec![1.0; act_dim], |a: &[f64]| objective(s, a))?;
        let exact = problem.exact_argmin(solver.grid_n, solver.refine_iters)?;
        tol = tol.max(exact.tolerance);
        eps.push(problem.eval(&actor(s)?)? - exact.value);
        let (l, c) = grid_derivatives(&|a| psi(s, a), act_dim, grid_n)?;
        lip = lip.max(l);
        curv = curv.min(c);
    }
    let n = eps.len() as f64;
    Ok(AssumptionReport {
        states: states.len(),
        eps_opt_min: eps.iter().copied().fold(f64::INFINITY, f64::min),
        eps_opt_mean: eps.iter().sum::<f64>() / n,
        eps_opt_max: eps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lipschitz: lip,
        curvature: curv,
        solver_tolerance: tol,
    })
}

/// [`measure_with`] for a PDA agent, in normalised action units, using the
/// actor sub-problem weighted by `coeff`.
pub fn measure_assumptions(
    state: &PdaState,
    coeff: f64,
    states: &[Vec<f64>],
    grid_n: usize,
    solver: SolverSettings,
) -> Result<AssumptionReport> {
    measure_with(
        states,
        state.act_dim(),
        |s, a| {
            let mut x = s.to_vec();
            x.extend_from_slice(a);
            Ok(state.psi_sum.predict_one(&x)?[0])
        },
        |s, a| pda_subproblem(state, s, coeff)?.eval(a),
        |s| {
            Ok(state
                .actor_mean(&Tensor::new(vec![1, s.len()], s.to_vec())?)?
                .into_data())
        },
        grid_n,
        solver,
    )
}
