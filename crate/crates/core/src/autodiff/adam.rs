use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zero moments sized after `params`.
    pub fn new(params: &[&Tensor], lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Bias-corrected Adam update, in place. Grads are validated before any
    /// parameter or moment is touched.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                what: "adam parameter list",
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::LengthMismatch {
                    what: "adam parameter",
                    expected: m.len(),
                    got: g.len(),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("adam gradient"));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }
}

/// Scales all gradients by `max_norm / ‖g‖₂` when the global norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flat_map(|g| g.iter()).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().flat_map(|g| g.iter_mut()).for_each(|x| *x *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(g: &[Vec<f64>]) -> f64 {
        g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn first_step_is_sign_like() {
        let mut p = Tensor::vector(vec![1.0, -3.0]);
        let mut adam = AdamState::new(&[&p], 1e-3);
        adam.step(&mut [&mut p], &[vec![0.7, 42.0]]).unwrap();
        assert!((p.data()[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert!((p.data()[1] - (-3.0 - 1e-3)).abs() < 1e-10);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::vector(vec![0.25, -0.5]);
        let before = p.clone();
        let mut adam = AdamState::new(&[&p], 1e-3);
        adam.step(&mut [&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn two_constant_steps_move_two_lr() {
        // m̂ = g and v̂ = g² at both steps, so each update is α·g/(|g|+ε).
        let g = 0.3;
        let alpha = 1e-3;
        let expected = 2.0 * alpha * g / (g + 1e-8);
        let mut p = Tensor::vector(vec![0.0]);
        let mut adam = AdamState::new(&[&p], alpha);
        adam.step(&mut [&mut p], &[vec![g]]).unwrap();
        adam.step(&mut [&mut p], &[vec![g]]).unwrap();
        assert!((p.data()[0] + expected).abs() < 1e-12);
        assert!((p.data()[0] + 2.0 * alpha).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_rejected_before_mutation() {
        let mut p = Tensor::vector(vec![1.0, 2.0]);
        let before = p.clone();
        let mut adam = AdamState::new(&[&p], 1e-3);
        let err = adam.step(&mut [&mut p], &[vec![1.0, f64::NAN]]);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn clip_scales_down_to_max_norm() {
        let mut g = vec![vec![0.6], vec![0.8]];
        let n = clip_grad_norm(&mut g, 0.1);
        assert!((n - 1.0).abs() < 1e-15);
        assert!((norm(&g) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn clip_leaves_small_gradients() {
        let mut g = vec![vec![0.03, 0.04]];
        clip_grad_norm(&mut g, 0.1);
        assert_eq!(g, vec![vec![0.03, 0.04]]);
    }

    #[test]
    fn clip_three_four() {
        let mut g = vec![vec![3.0, 4.0]];
        clip_grad_norm(&mut g, 0.1);
        assert!((g[0][0] - 0.06).abs() < 1e-15 && (g[0][1] - 0.08).abs() < 1e-15);
    }
}
