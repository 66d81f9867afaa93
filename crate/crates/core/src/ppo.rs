//! Clipped-surrogate PPO with a diagonal Gaussian policy and a separate
//! value network.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{apply_step, AdamState, Checkpoint, Graph, Mlp, Tensor, Var};
use crate::error::{Error, Result};
use crate::rollout::{minibatch_indices, Action, Batch, Policy};

pub const INITIAL_LOG_STD: f64 = -0.5;

/// Gaussian log-density of `x` under `N(mean, diag(exp(log_std))²)`.
pub fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// `mean_i min(r_i·A_i, clip(r_i, 1−ε, 1+ε)·A_i)`.
pub fn clipped_surrogate(ratios: &[f64], adv: &[f64], clip: f64) -> Result<f64> {
    if ratios.len() != adv.len() || ratios.is_empty() {
        return Err(Error::LengthMismatch {
            what: "surrogate",
            expected: adv.len(),
            got: ratios.len(),
        });
    }
    let mut total = 0.0;
    for (r, a) in ratios.iter().zip(adv) {
        if !r.is_finite() {
            return Err(Error::NonFinite("likelihood ratio"));
        }
        total += (r * a).min(r.clamp(1.0 - clip, 1.0 + clip) * a);
    }
    Ok(total / ratios.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    /// State-independent, one entry per action dim.
    pub log_std: Tensor,
}

impl GaussianPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            mean: Mlp::new(obs_dim, act_dim, rng),
            log_std: Tensor::full(vec![act_dim], INITIAL_LOG_STD),
        }
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.data().iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mean = self.mean.predict_one(obs)?;
        Ok(gaussian_log_prob(action, &mean, self.log_std.data()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoUpdateConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub passes: usize,
    pub max_grad_norm: f64,
    pub clip: f64,
    pub vf_coeff: f64,
    pub ent_coeff: f64,
}

/// Loss terms of one minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoLoss {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct PpoState {
    pub policy: GaussianPolicy,
    pub value: Mlp,
    opt: AdamState,
}

struct LossVars {
    total: Var,
    policy: Var,
    value: Var,
    entropy: Var,
    params: Vec<Var>,
}

impl PpoState {
    pub fn new(obs_dim: usize, act_dim: usize, lr: f64, rng: &mut ChaCha8Rng) -> Self {
        let policy = GaussianPolicy::new(obs_dim, act_dim, rng);
        let value = Mlp::new(obs_dim, 1, rng);
        let mut params = policy.mean.params();
        params.push(&policy.log_std);
        params.extend(value.params());
        let opt = AdamState::new(&params, lr);
        Self { policy, value, opt }
    }

    pub fn seeded(obs_dim: usize, act_dim: usize, lr: f64, seed: u64) -> Self {
        Self::new(obs_dim, act_dim, lr, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.opt.set_lr(lr);
    }

    #[allow(clippy::too_many_arguments)]
    fn record_loss(
        &self,
        g: &mut Graph,
        obs: Tensor,
        actions: Tensor,
        old_log_probs: &[f64],
        adv: &[f64],
        returns: &[f64],
        cfg: &PpoUpdateConfig,
    ) -> Result<LossVars> {
        let m = obs.rows();
        let d = actions.cols();
        let x = g.constant(obs);
        let act = g.constant(actions);
        let mean = self.policy.mean.forward(g, x, true)?;
        let log_std = g.leaf(self.policy.log_std.clone(), true);

        // log π(a|s) + (d/2)·log 2π, per row
        let diff = g.sub(act, mean.output)?;
        let neg_ls = g.scale(log_std, -1.0)?;
        let inv_std = g.exp(neg_ls)?;
        let z = g.mul(diff, inv_std)?;
        let z2 = g.square(z)?;
        let half = g.scale(z2, -0.5)?;
        let per_dim = g.sub(half, log_std)?;
        let logp = g.sum_cols(per_dim)?;
        let shift = 0.5 * d as f64 * (2.0 * PI).ln();
        let old = g.constant(Tensor::vector(old_log_probs.iter().map(|l| l + shift).collect()));
        let log_ratio = g.sub(logp, old)?;
        let ratio = g.exp(log_ratio)?;

        let a = g.constant(Tensor::vector(adv.to_vec()));
        let unclipped = g.mul(ratio, a)?;
        let clipped_r = g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)?;
        let clipped = g.mul(clipped_r, a)?;
        let surr = g.minimum(unclipped, clipped)?;
        let policy = g.mean(surr)?;

        let v = self.value.forward(g, x, true)?;
        let target = g.constant(Tensor::new(vec![m, 1], returns.to_vec())?);
        let r = g.sub(v.output, target)?;
        let r2 = g.square(r)?;
        let value = g.mean(r2)?;

        let ls_sum = g.sum(log_std)?;
        let ent_const = g.constant(Tensor::scalar(0.5 * d as f64 * (2.0 * PI * std::f64::consts::E).ln()));
        let entropy = g.add(ls_sum, ent_const)?;

        let neg_pol = g.scale(policy, -1.0)?;
        let vterm = g.scale(value, cfg.vf_coeff)?;
        let eterm = g.scale(entropy, -cfg.ent_coeff)?;
        let t = g.add(neg_pol, vterm)?;
        let total = g.add(t, eterm)?;

        let mut params = mean.params;
        params.push(log_std);
        params.extend(v.params);
        Ok(LossVars {
            total,
            policy,
            value,
            entropy,
            params,
        })
    }

    /// `−surrogate + vf_coeff·value MSE − ent_coeff·entropy` on the given rows.
    pub fn ppo_loss(&self, batch: &Batch, rows: &[usize], cfg: &PpoUpdateConfig) -> Result<PpoLoss> {
        let mut g = Graph::new();
        let (lp, adv, ret) = gather(batch, rows);
        let vars = self.record_loss(
            &mut g,
            batch.obs.select_rows(rows),
            batch.actions.select_rows(rows),
            &lp,
            &adv,
            &ret,
            cfg,
        )?;
        Ok(read_loss(&g, &vars))
    }

    /// Repeated clipped minibatch steps on one batch. Returns the mean loss
    /// terms of the final pass.
    pub fn update(&mut self, batch: &Batch, cfg: &PpoUpdateConfig, rng: &mut ChaCha8Rng) -> Result<PpoLoss> {
        let mut last = Vec::new();
        for _ in 0..cfg.passes {
            last.clear();
            for idx in minibatch_indices(batch.len(), cfg.batch_size, cfg.minibatch_size, rng) {
                let mut g = Graph::new();
                let (lp, adv, ret) = gather(batch, &idx);
                let vars = self.record_loss(
                    &mut g,
                    batch.obs.select_rows(&idx),
                    batch.actions.select_rows(&idx),
                    &lp,
                    &adv,
                    &ret,
                    cfg,
                )?;
                g.backward(vars.total)?;
                last.push(read_loss(&g, &vars));
                let PpoState { policy, value, opt } = self;
                let mut params = policy.mean.params_mut();
                params.push(&mut policy.log_std);
                params.extend(value.params_mut());
                apply_step(&g, &vars.params, &mut params, opt, Some(cfg.max_grad_norm))?;
            }
        }
        let n = last.len().max(1) as f64;
        Ok(PpoLoss {
            total: last.iter().map(|l| l.total).sum::<f64>() / n,
            policy: last.iter().map(|l| l.policy).sum::<f64>() / n,
            value: last.iter().map(|l| l.value).sum::<f64>() / n,
            entropy: last.iter().map(|l| l.entropy).sum::<f64>() / n,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.insert_all(self.policy.mean.param_names("policy"), self.policy.mean.params());
        ck.insert("policy.log_std", &self.policy.log_std);
        ck.insert_all(self.value.param_names("value"), self.value.params());
        ck
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.load_all(self.policy.mean.param_names("policy"), self.policy.mean.params_mut())?;
        ck.load_into("policy.log_std", &mut self.policy.log_std)?;
        ck.load_all(self.value.param_names("value"), self.value.params_mut())
    }
}

fn gather(batch: &Batch, rows: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        rows.iter().map(|&i| batch.log_probs[i]).collect(),
        rows.iter().map(|&i| batch.advantages[i]).collect(),
        rows.iter().map(|&i| batch.returns[i]).collect(),
    )
}

fn read_loss(g: &Graph, v: &LossVars) -> PpoLoss {
    let s = |x: Var| g.value(x).data()[0];
    PpoLoss {
        total: s(v.total),
        policy: s(v.policy),
        value: s(v.value),
        entropy: s(v.entropy),
    }
}

impl Policy for PpoState {
    fn obs_dim(&self) -> usize {
        self.policy.mean.in_dim()
    }

    fn act_dim(&self) -> usize {
        self.policy.mean.out_dim()
    }

    /// Samples the unclipped Gaussian for learning and clips a copy for the env.
    fn act(&self, obs: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Result<Action> {
        let mean = self.policy.mean.predict_one(obs)?;
        if !explore {
            let applied = mean.iter().map(|m| m.clamp(-1.0, 1.0)).collect();
            let log_prob = gaussian_log_prob(&mean, &mean, self.policy.log_std.data());
            return Ok(Action {
                applied,
                stored: mean,
                log_prob,
            });
        }
        let stored: Vec<f64> = mean
            .iter()
            .zip(self.policy.std())
            .map(|(m, s)| {
                let e: f64 = StandardNormal.sample(rng);
                m + s * e
            })
            .collect();
        let log_prob = gaussian_log_prob(&stored, &mean, self.policy.log_std.data());
        Ok(Action {
            applied: stored.iter().map(|a| a.clamp(-1.0, 1.0)).collect(),
            stored,
            log_prob,
        })
    }

    fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.predict_one(obs)?[0])
    }
}
