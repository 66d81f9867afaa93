use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{matmul_into, Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Hidden widths used by every network in this crate.
pub const HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `[fan_in, fan_out]`
    pub weight: Tensor,
    /// `[fan_out]`
    pub bias: Tensor,
}

/// Fully connected network, tanh on hidden layers and identity output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Linear>,
}

/// Graph handles produced by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub output: Var,
    /// Weight and bias leaves in [`Mlp::params`] order.
    pub params: Vec<Var>,
}

impl Mlp {
    /// Network `in_dim → 64 → 64 → out_dim` with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut sizes = vec![in_dim];
        sizes.extend(HIDDEN);
        sizes.push(out_dim);
        Self::with_sizes(&sizes, rng)
    }

    pub fn with_sizes<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
                Linear {
                    weight: Tensor::new(vec![fan_in, fan_out], data).expect("valid shape"),
                    bias: Tensor::zeros(vec![fan_out]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().weight.shape()[1]
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{prefix}.{i}.weight"), format!("{prefix}.{i}.bias")])
            .collect()
    }

    /// Records the forward pass of a `[batch, in_dim]` input on `g`.
    /// Parameters become leaves that require grad iff `trainable`.
    pub fn forward(&self, g: &mut Graph, x: Var, trainable: bool) -> Result<MlpVars> {
        let mut h = x;
        let mut params = Vec::with_capacity(self.layers.len() * 2);
        for (i, layer) in self.layers.iter().enumerate() {
            let w = g.leaf(layer.weight.clone(), trainable);
            let b = g.leaf(layer.bias.clone(), trainable);
            params.extend([w, b]);
            let z = g.matmul(h, w)?;
            h = g.add(z, b)?;
            if i + 1 < self.layers.len() {
                h = g.tanh(h)?;
            }
        }
        Ok(MlpVars { output: h, params })
    }

    /// Graph-free evaluation of a `[batch, in_dim]` input.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.in_dim() {
            return Err(Error::ShapeMismatch {
                op: "mlp",
                lhs: x.shape().to_vec(),
                rhs: vec![self.in_dim()],
            });
        }
        let m = x.rows();
        let mut h = x.data().to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let (k, n) = (layer.weight.shape()[0], layer.weight.shape()[1]);
            let mut out = vec![0.0; m * n];
            matmul_into(&h, layer.weight.data(), &mut out, m, k, n);
            for row in out.chunks_mut(n) {
                row.iter_mut().zip(layer.bias.data()).for_each(|(o, b)| *o += b);
                if i + 1 < self.layers.len() {
                    row.iter_mut().for_each(|o| *o = o.tanh());
                }
            }
            h = out;
        }
        let out = Tensor::new(vec![m, self.out_dim()], h)?;
        if !out.is_finite() {
            return Err(Error::NonFinite("mlp"));
        }
        Ok(out)
    }

    /// Single-input convenience wrapper around [`Mlp::predict`].
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = Tensor::new(vec![1, x.len()], x.to_vec())?;
        Ok(self.predict(&t)?.into_data())
    }
}
