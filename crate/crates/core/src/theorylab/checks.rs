//! Numerical checks of the proximal lemma and the two convergence bounds on
//! exact traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exact::{run_exact_pda, ExactTrace, ScheduleCase};
use super::instance::SyntheticInstance;
use crate::error::{Error, Result};

pub const LEMMA1_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-12;

/// `H_k = Σ_{j=1..k} 1/j`.
pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundPoint {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + BOUND_TOL * self.rhs.abs().max(1.0)
    }
}

/// Largest `LHS − RHS` of the proximal inequality
/// `Ψ̃_k(π̂_{k+1}) − ε_opt + μ̃_k·D(π_{k+1}, a) ≤ Ψ̃_k(a)` over `a = π_{k+1}` and
/// `trials` uniform actions in the box.
pub fn check_lemma1(trace: &ExactTrace, k: usize, trials: usize, seed: u64) -> Result<f64> {
    let r = trace
        .records
        .get(k)
        .ok_or_else(|| Error::InvalidArgument(format!("trace has no iteration {k}")))?;
    if r.mu_tilde < 0.0 {
        return Err(Error::ScheduleMismatch {
            case: format!("lemma1 at k={k}"),
            mu_d: trace.instance.mu_d(),
        });
    }
    let inst = &trace.instance;
    let lhs_base = r.objective.value(inst, r.pi_hat) - r.eps_opt;
    let violation =
        |a: f64| lhs_base + r.mu_tilde * 0.5 * (r.pi_exact - a) * (r.pi_exact - a) - r.objective.value(inst, a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = violation(r.pi_exact);
    for _ in 0..trials {
        worst = worst.max(violation(rng.random_range(inst.low..=inst.high)));
    }
    Ok(worst)
}

/// Both sides of the convex-case bound at every `k = 1..=K`.
pub fn check_theorem1(trace: &ExactTrace) -> Result<Vec<BoundPoint>> {
    let inst = &trace.instance;
    let m = inst.lipschitz_estimate();
    let eps = trace.eps_inject;
    let d0 = 0.5 * (inst.prox_center - trace.optimum).powi(2);
    let mut out = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        let k = (r.k + 1) as f64;
        let (lhs, rhs) = match trace.case {
            ScheduleCase::MuPos => {
                let mu = inst.mu_d();
                let lhs = r.weighted_gap + mu * r.bregman_to_opt;
                let rhs = 2.0 * mu * d0 / (k * k)
                    + 4.0 * m * m / (mu * k)
                    + trace.varsigma
                    + 2.0 * eps / k
                    + 4.0 * m * (2.0 * eps).sqrt() / (mu.sqrt() * k);
                (lhs, rhs)
            }
            ScheduleCase::MuZero { lambda } => {
                let rhs = 2.0 * lambda * d0 / k.sqrt()
                    + 8.0 * m * m / (lambda * k.sqrt())
                    + trace.varsigma
                    + 2.0 * eps / k
                    + 8.0 * m * (2.0 * eps).sqrt() / (lambda.sqrt() * k.powf(0.75));
                (r.weighted_gap, rhs)
            }
            ScheduleCase::MuNeg => {
                return Err(Error::ScheduleMismatch {
                    case: format!("theorem1 on {}/{}", inst.name, trace.case.name()),
                    mu_d: inst.mu_d(),
                })
            }
        };
        out.push(BoundPoint { k: r.k + 1, lhs, rhs });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Point {
    pub k: usize,
    pub kbar: usize,
    /// Whether the index that minimises the proof's weighted sum satisfied
    /// both sides (otherwise `kbar` is the first index that does, if any).
    pub proof_index: bool,
    pub lower: f64,
    /// `−ψ^{π̂_k̄}(π̂_{k̄+1}) = c(π̂_k̄) − c(π̂_{k̄+1})`
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

impl Theorem2Point {
    pub fn margin(&self) -> f64 {
        (self.value - self.lower).min(self.upper - self.value)
    }
}

/// Both sides of the weakly-convex bound at the trace horizon `K`.
pub fn check_theorem2(trace: &ExactTrace) -> Result<Theorem2Point> {
    let inst = &trace.instance;
    if trace.case != ScheduleCase::MuNeg {
        return Err(Error::ScheduleMismatch {
            case: format!("theorem2 on {}/{}", inst.name, trace.case.name()),
            mu_d: inst.mu_d(),
        });
    }
    let k = trace.horizon;
    let kf = k as f64;
    let one_minus_gamma = 1.0 - trace.gamma;
    let mu = inst.mu_d().abs();
    let m2 = (inst.lipschitz() + inst.lipschitz_estimate()).powi(2);
    let eps = trace.eps_inject;
    let c_star = inst.cost(trace.optimum);

    let lower = -m2 / (mu * (kf + 1.0));
    let upper = 2.0 * (inst.cost(inst.prox_center) - c_star) / (one_minus_gamma * (kf + 1.0))
        + 3.0 * m2 / (one_minus_gamma * mu * (kf + 1.0))
        + 4.0 * eps * (harmonic(k) + 1.0) / (one_minus_gamma * (kf + 1.0));

    let pi = trace.pi_hat();
    let x: Vec<f64> = (0..k).map(|t| inst.cost(pi[t]) - inst.cost(pi[t + 1])).collect();
    let d_max = 0.5 * (inst.high - inst.low).powi(2);
    let score = |t: usize| {
        let r = &trace.records[t];
        let (lambda_prev, mu_prev) = if t == 0 {
            (0.0, 0.0)
        } else {
            (trace.records[t - 1].lambda, trace.records[t - 1].mu_tilde)
        };
        let c = (r.lambda - lambda_prev) / r.beta * d_max + r.beta * m2 / (r.mu_tilde + mu_prev);
        let e = 4.0 * eps / r.beta;
        r.beta * (x[t] + c + e)
    };
    let proof_kbar = (0..k).min_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap_or(0);
    let ok = |t: usize| lower <= x[t] && x[t] <= upper;
    let (kbar, proof_index) = if ok(proof_kbar) {
        (proof_kbar, true)
    } else {
        ((0..k).find(|&t| ok(t)).unwrap_or(proof_kbar), false)
    };
    Ok(Theorem2Point {
        k,
        kbar,
        proof_index,
        lower,
        value: x[kbar],
        upper,
        holds: ok(kbar),
    })
}

/// Theorem-2 points for horizons `1..=k_max`, one exact run per horizon
/// since `λ` depends on it.
pub fn theorem2_sweep(inst: &SyntheticInstance, k_max: usize, eps: f64) -> Result<Vec<Theorem2Point>> {
    (1..=k_max)
        .map(|k| check_theorem2(&run_exact_pda(inst, ScheduleCase::MuNeg, k, eps)?))
        .collect()
}

/// Weighted average gap at `k = to` divided by its value at `k = from`.
pub fn gap_ratio(trace: &ExactTrace, from: usize, to: usize) -> Option<f64> {
    let at = |k: usize| trace.records.get(k.checked_sub(1)?).map(|r| r.weighted_gap);
    Some(at(to)? / at(from)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn lemma1_is_tight_at_the_minimiser() {
        let inst = SyntheticInstance::quadratic(0.3);
        let t = run_exact_pda(&inst, ScheduleCase::MuPos, 6, 0.0).unwrap();
        assert_eq!(check_lemma1(&t, 5, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn lemma1_holds_on_all_families() {
        let cases = [
            (SyntheticInstance::quadratic(0.3), ScheduleCase::MuPos),
            (
                SyntheticInstance::piecewise_linear(0.7, 0.2),
                ScheduleCase::MuZero { lambda: 0.5 },
            ),
            (SyntheticInstance::cosine(), ScheduleCase::MuNeg),
        ];
        for (inst, case) in cases {
            for k in [1, 5, 20] {
                for eps in [0.0, 1e-3] {
                    let t = run_exact_pda(&inst, case, k + 1, eps).unwrap();
                    let v = check_lemma1(&t, k, 1000, k as u64).unwrap();
                    assert!(v <= LEMMA1_TOL, "{} k={k} eps={eps}: {v}", inst.name);
                }
            }
        }
    }

    #[test]
    fn theorem1_quadratic_and_decay() {
        let t = run_exact_pda(&SyntheticInstance::quadratic(0.3), ScheduleCase::MuPos, 200, 0.0).unwrap();
        let pts = check_theorem1(&t).unwrap();
        assert_eq!(pts.len(), 200);
        assert!(pts.iter().all(BoundPoint::holds));
        assert!(gap_ratio(&t, 10, 200).unwrap() < 0.25);
    }

    #[test]
    fn theorem1_eps_terms_enter_rhs() {
        let inst = SyntheticInstance::quadratic(0.3);
        let a = check_theorem1(&run_exact_pda(&inst, ScheduleCase::MuPos, 50, 0.0).unwrap()).unwrap();
        let b = check_theorem1(&run_exact_pda(&inst, ScheduleCase::MuPos, 50, 1e-3).unwrap()).unwrap();
        let (m, mu, eps) = (inst.lipschitz(), 2.0, 1e-3);
        for (p, q) in a.iter().zip(&b) {
            let k = p.k as f64;
            let extra = 2.0 * eps / k + 4.0 * m * (2.0 * eps).sqrt() / (f64::sqrt(mu) * k);
            assert!((q.rhs - p.rhs - extra).abs() < 1e-12);
            assert!(q.holds());
        }
    }

    #[test]
    fn theorem1_piecewise() {
        let inst = SyntheticInstance::piecewise_linear(0.7, 0.2);
        for eps in [0.0, 1e-3] {
            let t = run_exact_pda(&inst, ScheduleCase::MuZero { lambda: 0.5 }, 200, eps).unwrap();
            assert!(check_theorem1(&t).unwrap().iter().all(BoundPoint::holds));
        }
        let t = run_exact_pda(&inst, ScheduleCase::MuZero { lambda: 0.5 }, 200, 0.0).unwrap();
        assert!(gap_ratio(&t, 10, 200).unwrap() < 0.25);
    }

    #[test]
    fn theorem1_rejects_nonconvex_trace() {
        let t = run_exact_pda(&SyntheticInstance::cosine(), ScheduleCase::MuNeg, 5, 0.0).unwrap();
        assert!(check_theorem1(&t).is_err());
    }

    #[test]
    fn theorem2_cosine_sweep() {
        for eps in [0.0, 1e-3] {
            let pts = theorem2_sweep(&SyntheticInstance::cosine(), 200, eps).unwrap();
            assert_eq!(pts.len(), 200);
            for p in &pts {
                assert!(p.holds, "{p:?}");
            }
        }
    }

    #[test]
    fn theorem2_rejects_convex_trace() {
        let t = run_exact_pda(&SyntheticInstance::quadratic(0.3), ScheduleCase::MuPos, 5, 0.0).unwrap();
        assert!(check_theorem2(&t).is_err());
    }
}
