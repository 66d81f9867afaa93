//! Small dense reverse-mode autodiff: tensors, a per-forward tape, MLP
//! layers, Adam and global-norm clipping.

mod adam;
mod checkpoint;
mod graph;
mod mlp;
mod tensor;

pub use adam::{clip_grad_norm, AdamState};
pub use checkpoint::{Checkpoint, StoredTensor};
pub use graph::{Graph, Var};
pub use mlp::{Linear, Mlp, MlpVars, HIDDEN};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Gradients of `vars` after a backward pass; leaves never reached get zeros.
pub fn collect_grads(g: &Graph, vars: &[Var]) -> Vec<Vec<f64>> {
    vars.iter()
        .map(|&v| {
            g.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; g.value(v).len()])
        })
        .collect()
}

/// One clipped Adam step on `params` from the grads of `vars`.
pub fn apply_step(
    g: &Graph,
    vars: &[Var],
    params: &mut [&mut Tensor],
    adam: &mut AdamState,
    max_grad_norm: Option<f64>,
) -> Result<()> {
    if vars.len() != params.len() {
        return Err(Error::LengthMismatch {
            what: "parameter vars",
            expected: params.len(),
            got: vars.len(),
        });
    }
    let mut grads = collect_grads(g, vars);
    if let Some(max) = max_grad_norm {
        clip_grad_norm(&mut grads, max);
    }
    adam.step(params, &grads)
}
