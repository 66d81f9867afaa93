use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Closed-form cost families on a 1-D action box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `weight · (a − center)²`, curvature `2·weight > 0`.
    Quadratic { center: f64, weight: f64 },
    /// `slope · |a − center|`, convex with zero curvature.
    PiecewiseLinear { center: f64, slope: f64 },
    /// `cos(a)`, second derivative bounded below by −1.
    Cosine,
}

/// Single-state instance with an analytically known cost `c(a)`.
///
/// With one absorbing state, `V^π = c(π)/(1−γ)` and the advantage of `a`
/// under `π` is `c(a) − c(π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub name: String,
    pub family: Family,
    pub low: f64,
    pub high: f64,
    /// Prox-centre and initial policy.
    pub prox_center: f64,
    /// Amplitude of the linear evaluator perturbation `±amp·a`
    /// (alternating sign per iteration); zero means exact advantages.
    pub evaluator_noise: f64,
}

impl SyntheticInstance {
    pub fn quadratic(center: f64) -> Self {
        Self {
            name: "quadratic".into(),
            family: Family::Quadratic { center, weight: 1.0 },
            low: -2.0,
            high: 2.0,
            prox_center: 0.0,
            evaluator_noise: 0.0,
        }
    }

    pub fn piecewise_linear(center: f64, slope: f64) -> Self {
        Self {
            name: "piecewise".into(),
            family: Family::PiecewiseLinear { center, slope },
            low: -2.0,
            high: 2.0,
            prox_center: 0.0,
            evaluator_noise: 0.0,
        }
    }

    pub fn cosine() -> Self {
        Self {
            name: "cosine".into(),
            family: Family::Cosine,
            low: -4.0,
            high: 4.0,
            prox_center: 0.5,
            evaluator_noise: 0.0,
        }
    }

    /// Default instance for a family name used in env ids and CLI cases.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "quadratic" => Some(Self::quadratic(0.3)),
            "piecewise" | "piecewise_linear" => Some(Self::piecewise_linear(0.7, 0.2)),
            "cosine" => Some(Self::cosine()),
            _ => None,
        }
    }

    pub fn with_box(mut self, low: f64, high: f64) -> Self {
        self.low = low;
        self.high = high;
        self
    }

    pub fn with_prox_center(mut self, p: f64) -> Self {
        self.prox_center = p;
        self
    }

    pub fn with_evaluator_noise(mut self, amp: f64) -> Self {
        self.evaluator_noise = amp;
        self
    }

    pub fn clamp(&self, a: f64) -> f64 {
        a.clamp(self.low, self.high)
    }

    pub fn cost(&self, a: f64) -> f64 {
        match self.family {
            Family::Quadratic { center, weight } => weight * (a - center) * (a - center),
            Family::PiecewiseLinear { center, slope } => slope * (a - center).abs(),
            Family::Cosine => a.cos(),
        }
    }

    /// Derivative of the cost (the zero subgradient at a kink).
    pub fn cost_grad(&self, a: f64) -> f64 {
        match self.family {
            Family::Quadratic { center, weight } => 2.0 * weight * (a - center),
            Family::PiecewiseLinear { center, slope } => {
                if a > center {
                    slope
                } else if a < center {
                    -slope
                } else {
                    0.0
                }
            }
            Family::Cosine => -a.sin(),
        }
    }

    pub fn cost_hess(&self, a: f64) -> f64 {
        match self.family {
            Family::Quadratic { weight, .. } => 2.0 * weight,
            Family::PiecewiseLinear { .. } => 0.0,
            Family::Cosine => -a.cos(),
        }
    }

    /// Weak-convexity parameter: `c(a) − (μ/2)a²` is convex.
    pub fn mu_d(&self) -> f64 {
        match self.family {
            Family::Quadratic { weight, .. } => 2.0 * weight,
            Family::PiecewiseLinear { .. } => 0.0,
            Family::Cosine => -1.0,
        }
    }

    /// Lipschitz constant of the exact cost on the box.
    pub fn lipschitz(&self) -> f64 {
        match self.family {
            Family::Quadratic { center, weight } => {
                2.0 * weight * (self.low - center).abs().max((self.high - center).abs())
            }
            Family::PiecewiseLinear { slope, .. } => slope,
            Family::Cosine => {
                // |sin| peaks at π/2 + nπ
                let n_lo = ((self.low - PI / 2.0) / PI).ceil();
                if PI / 2.0 + n_lo * PI <= self.high {
                    1.0
                } else {
                    self.low.sin().abs().max(self.high.sin().abs())
                }
            }
        }
    }

    /// Lipschitz constant of the (possibly perturbed) advantage estimate.
    pub fn lipschitz_estimate(&self) -> f64 {
        self.lipschitz() + self.evaluator_noise
    }

    /// Additive evaluator error at iteration `t`.
    pub fn perturbation(&self, t: usize, a: f64) -> f64 {
        if self.evaluator_noise == 0.0 {
            return 0.0;
        }
        let sign = if t.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * self.evaluator_noise * a
    }

    /// Box-constrained minimiser of the cost; ties go to the point nearest
    /// the prox-centre.
    pub fn optimum(&self) -> f64 {
        match self.family {
            Family::Quadratic { center, .. } | Family::PiecewiseLinear { center, .. } => self.clamp(center),
            Family::Cosine => {
                let mut candidates = vec![self.low, self.high];
                let mut n = ((self.low - PI) / (2.0 * PI)).ceil();
                while PI + 2.0 * PI * n <= self.high {
                    candidates.push(PI + 2.0 * PI * n);
                    n += 1.0;
                }
                let mut best = candidates[0];
                for &c in &candidates[1..] {
                    let (fc, fb) = (self.cost(c), self.cost(best));
                    let closer = (c - self.prox_center).abs() < (best - self.prox_center).abs();
                    if fc < fb - 1e-15 || ((fc - fb).abs() <= 1e-15 && closer) {
                        best = c;
                    }
                }
                best
            }
        }
    }

    pub fn optimal_cost(&self) -> f64 {
        self.cost(self.optimum())
    }
}
