//! Oracles shared by the integration tests.
#![allow(dead_code)]

use pda_core::autodiff::{collect_grads, Graph, Mlp, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A small random network, input batch and regression target.
pub struct LossCase {
    pub mlp: Mlp,
    pub x: Tensor,
    pub y: Tensor,
}

pub fn random_loss_case(rng: &mut ChaCha8Rng) -> LossCase {
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=4)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=6));
    }
    sizes.push(rng.random_range(1..=3));
    let mut mlp = Mlp::with_sizes(&sizes, rng);
    // nonzero biases so their gradients are exercised away from the init
    for p in mlp.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let batch = rng.random_range(1..=5);
    let (i, o) = (sizes[0], *sizes.last().unwrap());
    let x = Tensor::new(
        vec![batch, i],
        (0..batch * i).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap();
    let y = Tensor::new(
        vec![batch, o],
        (0..batch * o).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    LossCase { mlp, x, y }
}

/// `mean((f(x) − y)²) + 0.1·Σ tanh(f)·exp(0.3 f) + mean(rowsum([f, tanh f]))`,
/// with parameter gradients when `grads` is set.
pub fn loss(c: &LossCase, grads: bool) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let x = g.constant(c.x.clone());
    let y = g.constant(c.y.clone());
    let vars = c.mlp.forward(&mut g, x, grads).unwrap();
    let f = vars.output;
    let d = g.sub(f, y).unwrap();
    let d2 = g.square(d).unwrap();
    let mse = g.mean(d2).unwrap();
    let t = g.tanh(f).unwrap();
    let s = g.scale(f, 0.3).unwrap();
    let e = g.exp(s).unwrap();
    let te = g.mul(t, e).unwrap();
    let te = g.sum(te).unwrap();
    let te = g.scale(te, 0.1).unwrap();
    let cat = g.concat(&[f, t]).unwrap();
    let rows = g.sum_cols(cat).unwrap();
    let rows = g.mean(rows).unwrap();
    let a = g.add(mse, te).unwrap();
    let l = g.add(a, rows).unwrap();
    let value = g.value(l).data()[0];
    if !grads {
        return (value, Vec::new());
    }
    g.backward(l).unwrap();
    (value, collect_grads(&g, &vars.params))
}

/// `‖g − g_fd‖ / max(‖g‖ + ‖g_fd‖, 1e-12)` with central differences.
pub fn gradient_rel_error(c: &LossCase) -> f64 {
    const H: f64 = 1e-5;
    let (_, analytic) = loss(c, true);
    let mut probe = LossCase {
        mlp: c.mlp.clone(),
        x: c.x.clone(),
        y: c.y.clone(),
    };
    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    for (p, ga) in analytic.iter().enumerate() {
        for (i, &a) in ga.iter().enumerate() {
            let orig = c.mlp.params()[p].data()[i];
            probe.mlp.params_mut()[p].data_mut()[i] = orig + H;
            let (up, _) = loss(&probe, false);
            probe.mlp.params_mut()[p].data_mut()[i] = orig - H;
            let (down, _) = loss(&probe, false);
            probe.mlp.params_mut()[p].data_mut()[i] = orig;
            let n = (up - down) / (2.0 * H);
            diff += (a - n) * (a - n);
            norm_a += a * a;
            norm_n += n * n;
        }
    }
    diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt()).max(1e-12)
}

/// `Â_t = Σ_l (γλ)^l · Π_{j<l} (1 − d_{t+j}) · δ_{t+l}`, evaluated term by term.
pub fn gae_double_sum(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let t_len = rewards.len();
    let delta = |i: usize| {
        let live = if dones[i] { 0.0 } else { 1.0 };
        rewards[i] + gamma * live * values[i + 1] - values[i]
    };
    (0..t_len)
        .map(|t| {
            let mut total = 0.0;
            for l in 0..t_len - t {
                let alive = (t..t + l).all(|j| !dones[j]);
                if !alive {
                    break;
                }
                total += (gamma * lambda).powi(l as i32) * delta(t + l);
            }
            total
        })
        .collect()
}

pub struct GaeCase {
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub gamma: f64,
    pub lambda: f64,
}

pub fn random_gae_case(rng: &mut ChaCha8Rng) -> GaeCase {
    let t = rng.random_range(1..=50);
    GaeCase {
        rewards: (0..t).map(|_| rng.random_range(-5.0..5.0)).collect(),
        values: (0..=t).map(|_| rng.random_range(-5.0..5.0)).collect(),
        dones: (0..t).map(|_| rng.random_bool(0.1)).collect(),
        gamma: rng.random_range(0.5..1.0),
        lambda: rng.random_range(0.0..=1.0),
    }
}
