use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pda_core::autodiff::{collect_grads, Graph, Mlp, Tensor};
use pda_core::envs::Env;
use pda_core::rollout::compute_gae;
use pda_core::subsolver::{SolverSettings, SubProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::new(4, 1, &mut rng);
    let x = Tensor::new(vec![250, 4], (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    c.bench_function("mlp_predict_250x4", |b| b.iter(|| net.predict(black_box(&x)).unwrap()));
    c.bench_function("mlp_forward_backward_250x4", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let vars = net.forward(&mut g, xv, true).unwrap();
            let sq = g.square(vars.output).unwrap();
            let loss = g.mean(sq).unwrap();
            g.backward(loss).unwrap();
            collect_grads(&g, &vars.params)
        })
    });
}

fn gae(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 2048;
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d: Vec<bool> = (0..n).map(|i| i % 200 == 199).collect();
    c.bench_function("gae_2048", |b| {
        b.iter(|| compute_gae(black_box(&r), &v, &d, 0.99, 0.95).unwrap())
    });
}

fn argmin(c: &mut Criterion) {
    let s = SolverSettings::default();
    let p = SubProblem::new(vec![-1.0], vec![1.0], |a: &[f64]| {
        Ok((3.0 * a[0]).cos() + 0.4 * a[0] * a[0])
    })
    .unwrap();
    c.bench_function("exact_argmin_1d", |b| {
        b.iter(|| p.exact_argmin(s.grid_n, s.refine_iters).unwrap())
    });
}

fn envs(c: &mut Criterion) {
    for id in ["pendulum", "newsvendor"] {
        let mut env = Env::from_id(id, 0.99).unwrap();
        let dim = env.spec().act_dim;
        env.reset(0);
        let a = vec![0.1; dim];
        c.bench_function(&format!("{id}_step"), |b| {
            b.iter(|| {
                let s = env.step_normalized(black_box(&a)).unwrap();
                if s.done {
                    env.reset(0);
                }
            })
        });
    }
}

criterion_group!(benches, mlp, gae, argmin, envs);
criterion_main!(benches);
