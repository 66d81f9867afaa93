//! Actor-accelerated policy dual averaging: schedules, the sum-advantage
//! recursion and the value / sum-advantage / actor updates.
//!
//! Environments emit rewards. Internally `ψ^Σ` holds the weighted average of
//! past *cost* advantages (`−Ã`), so the actor minimises
//! `ψ^Σ(s, a) + coeff·‖a − π₀(s)‖²` as in the cost-minimising formulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{apply_step, AdamState, Checkpoint, Graph, Mlp, Tensor};
use crate::error::{Error, Result};
use crate::rollout::{minibatch_indices, Action, Batch, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `σ₀ / β^0.3`.
    Decaying,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SmoothingMode {
    DualAveraging,
    Exponential { alpha: f64 },
}

impl SmoothingMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SmoothingMode::Exponential { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(Error::InvalidArgument(
                format!("exponential smoothing needs alpha in (0, 1), got {alpha}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Iteration counter with the dual-averaging weights `β_k = k+1` and
/// `Σβ = Σ_{i≤k} β_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdaSchedule {
    pub k: usize,
    pub beta: f64,
    pub sum_beta: f64,
    pub lambda: f64,
    pub sigma0: f64,
    pub noise: NoiseMode,
}

impl PdaSchedule {
    pub fn new(lambda: f64, sigma0: f64, noise: NoiseMode) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "schedule needs lambda > 0 and sigma0 ≥ 0, got {lambda}, {sigma0}"
            )));
        }
        Ok(Self {
            k: 0,
            beta: 1.0,
            sum_beta: 1.0,
            lambda,
            sigma0,
            noise,
        })
    }

    /// Schedule after `k` coefficient updates.
    pub fn at(k: usize, lambda: f64, sigma0: f64, noise: NoiseMode) -> Result<Self> {
        let mut s = Self::new(lambda, sigma0, noise)?;
        for _ in 0..k {
            s.advance();
        }
        Ok(s)
    }

    pub fn sigma(&self) -> f64 {
        match self.noise {
            // exp2 form keeps powers of two exact: σ(1024) = σ₀/8
            NoiseMode::Decaying => self.sigma0 / (0.3 * self.beta.log2()).exp2(),
            NoiseMode::Constant => self.sigma0,
        }
    }

    /// Regulariser weight `λ·β^1.5/Σβ` in the actor objective.
    pub fn coeff(&self) -> f64 {
        self.lambda * self.beta.powf(1.5) / self.sum_beta
    }

    /// Weights `(old, new)` of the dual-averaging target.
    pub fn weights(&self) -> (f64, f64) {
        ((self.sum_beta - self.beta) / self.sum_beta, self.beta / self.sum_beta)
    }

    /// `β ← β + 1; Σβ ← Σβ + β`.
    pub fn advance(&mut self) {
        self.k += 1;
        self.beta += 1.0;
        self.sum_beta += self.beta;
    }
}

/// `½‖a − a₀‖²`.
pub fn bregman(a: &[f64], a0: &[f64]) -> Result<f64> {
    if a.len() != a0.len() {
        return Err(Error::LengthMismatch {
            what: "bregman",
            expected: a0.len(),
            got: a.len(),
        });
    }
    Ok(0.5 * a.iter().zip(a0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// Regression targets for `ψ^Σ` from its frozen outputs `old` and the new
/// advantage sample.
pub fn psi_sum_target(old: &[f64], adv: &[f64], schedule: &PdaSchedule, mode: SmoothingMode) -> Result<Vec<f64>> {
    if old.len() != adv.len() {
        return Err(Error::LengthMismatch {
            what: "psi_sum_target",
            expected: old.len(),
            got: adv.len(),
        });
    }
    let (w_old, w_new) = match mode {
        SmoothingMode::DualAveraging => schedule.weights(),
        SmoothingMode::Exponential { alpha } => (1.0 - alpha, alpha),
    };
    Ok(old.iter().zip(adv).map(|(o, a)| w_old * o + w_new * a).collect())
}

/// Actor sub-problem objective `ψ + coeff·‖a − π₀‖²` at one state.
pub fn actor_objective(psi: f64, a: &[f64], pi0: &[f64], coeff: f64) -> Result<f64> {
    Ok(psi + 2.0 * coeff * bregman(a, pi0)?)
}

/// Lookup-table `ψ^Σ` with exact regression, for checking the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPsiSum {
    pub table: Vec<f64>,
}

impl TabularPsiSum {
    pub fn new(n: usize) -> Self {
        Self { table: vec![0.0; n] }
    }

    pub fn update(&mut self, adv: &[f64], schedule: &PdaSchedule, mode: SmoothingMode) -> Result<()> {
        self.table = psi_sum_target(&self.table, adv, schedule, mode)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProxCenter {
    /// Constant zero action (the box centre in normalised units).
    Zero,
    /// Frozen copy of an actor network.
    Snapshot(Mlp),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxMode {
    Zero,
    /// The initial actor, frozen.
    InitialActor,
}

/// Optimiser settings shared by the three PDA networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdaUpdateConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub passes: usize,
    /// Actor passes when different from `passes`.
    pub actor_passes: Option<usize>,
    pub max_grad_norm: f64,
    pub smoothing: SmoothingMode,
}

#[derive(Debug, Clone)]
pub struct PdaState {
    pub schedule: PdaSchedule,
    pub value: Mlp,
    pub psi_sum: Mlp,
    pub actor: Mlp,
    pub prox: ProxCenter,
    value_opt: AdamState,
    psi_opt: AdamState,
    actor_opt: AdamState,
}

/// Per-iteration losses (mean over the minibatches of the final pass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdaLosses {
    pub value: f64,
    pub psi: f64,
    pub actor: f64,
}

fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "concat_cols",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..a.rows()).map(|i| [a.row(i), b.row(i)].concat()).collect();
    Tensor::from_rows(&rows)
}

fn column(v: &[f64]) -> Result<Tensor> {
    Tensor::new(vec![v.len(), 1], v.to_vec())
}

fn last_pass_mean(losses: &[Vec<f64>]) -> f64 {
    match losses.last() {
        Some(l) if !l.is_empty() => l.iter().sum::<f64>() / l.len() as f64,
        _ => f64::NAN,
    }
}

/// Minibatch MSE regression of `net` onto `targets`. Returns the per-minibatch
/// losses of every pass.
fn regress(
    net: &mut Mlp,
    opt: &mut AdamState,
    inputs: &Tensor,
    targets: &[f64],
    cfg: &PdaUpdateConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut trace = Vec::with_capacity(cfg.passes);
    for _ in 0..cfg.passes {
        let mut pass = Vec::new();
        for idx in minibatch_indices(inputs.rows(), cfg.batch_size, cfg.minibatch_size, rng) {
            let x = inputs.select_rows(&idx);
            let y = column(&idx.iter().map(|&i| targets[i]).collect::<Vec<_>>())?;
            let mut g = Graph::new();
            let xv = g.constant(x);
            let yv = g.constant(y);
            let out = net.forward(&mut g, xv, true)?;
            let r = g.sub(out.output, yv)?;
            let sq = g.square(r)?;
            let loss = g.mean(sq)?;
            g.backward(loss)?;
            pass.push(g.value(loss).data()[0]);
            apply_step(&g, &out.params, &mut net.params_mut(), opt, Some(cfg.max_grad_norm))?;
        }
        trace.push(pass);
    }
    Ok(trace)
}

impl PdaState {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        schedule: PdaSchedule,
        prox: ProxMode,
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let value = Mlp::new(obs_dim, 1, rng);
        let psi_sum = Mlp::new(obs_dim + act_dim, 1, rng);
        let actor = Mlp::new(obs_dim, act_dim, rng);
        let prox = match prox {
            ProxMode::Zero => ProxCenter::Zero,
            ProxMode::InitialActor => ProxCenter::Snapshot(actor.clone()),
        };
        let value_opt = AdamState::new(&value.params(), lr);
        let psi_opt = AdamState::new(&psi_sum.params(), lr);
        let actor_opt = AdamState::new(&actor.params(), lr);
        Self {
            schedule,
            value,
            psi_sum,
            actor,
            prox,
            value_opt,
            psi_opt,
            actor_opt,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.in_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.out_dim()
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.value_opt.set_lr(lr);
        self.psi_opt.set_lr(lr);
        self.actor_opt.set_lr(lr);
    }

    /// Deterministic actor output in `[-1, 1]^act_dim` for a `[m, obs_dim]` batch.
    pub fn actor_mean(&self, obs: &Tensor) -> Result<Tensor> {
        let pre = self.actor.predict(obs)?;
        let data = pre.data().iter().map(|x| x.tanh()).collect();
        Tensor::new(pre.shape().to_vec(), data)
    }

    pub fn prox_actions(&self, obs: &Tensor) -> Result<Tensor> {
        match &self.prox {
            ProxCenter::Zero => Ok(Tensor::zeros(vec![obs.rows(), self.act_dim()])),
            ProxCenter::Snapshot(net) => {
                let pre = net.predict(obs)?;
                let data = pre.data().iter().map(|x| x.tanh()).collect();
                Tensor::new(pre.shape().to_vec(), data)
            }
        }
    }

    /// `ψ^Σ(s, a)` for matching rows of `obs` and `actions`.
    pub fn psi_values(&self, obs: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        Ok(self.psi_sum.predict(&concat_cols(obs, actions)?)?.into_data())
    }

    pub fn update_value(
        &mut self,
        batch: &Batch,
        cfg: &PdaUpdateConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Vec<f64>>> {
        regress(
            &mut self.value,
            &mut self.value_opt,
            &batch.obs,
            &batch.returns,
            cfg,
            rng,
        )
    }

    /// Regresses `ψ^Σ` onto targets built once from its pre-update outputs.
    pub fn update_psi_sum(
        &mut self,
        batch: &Batch,
        cfg: &PdaUpdateConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Vec<f64>>> {
        let inputs = concat_cols(&batch.obs, &batch.actions)?;
        let old = self.psi_sum.predict(&inputs)?.into_data();
        let cost_adv: Vec<f64> = batch.advantages.iter().map(|a| -a).collect();
        let targets = psi_sum_target(&old, &cost_adv, &self.schedule, cfg.smoothing)?;
        regress(&mut self.psi_sum, &mut self.psi_opt, &inputs, &targets, cfg, rng)
    }

    /// Trains the actor towards `argmin_a ψ^Σ(s, a) + coeff·‖a − π₀(s)‖²`
    /// with `ψ^Σ` frozen.
    pub fn update_actor(&mut self, obs: &Tensor, cfg: &PdaUpdateConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let coeff = self.schedule.coeff();
        let pi0 = self.prox_actions(obs)?;
        let passes = cfg.actor_passes.unwrap_or(cfg.passes);
        let mut trace = Vec::with_capacity(passes);
        for _ in 0..passes {
            let mut pass = Vec::new();
            for idx in minibatch_indices(obs.rows(), cfg.batch_size, cfg.minibatch_size, rng) {
                let mut g = Graph::new();
                let x = g.constant(obs.select_rows(&idx));
                let p0 = g.constant(pi0.select_rows(&idx));
                let out = self.actor.forward(&mut g, x, true)?;
                let a = g.tanh(out.output)?;
                let sa = g.concat(&[x, a])?;
                let psi = self.psi_sum.forward(&mut g, sa, false)?;
                let psi_mean = g.mean(psi.output)?;
                let d = g.sub(a, p0)?;
                let sq = g.square(d)?;
                let norms = g.sum_cols(sq)?;
                let reg = g.mean(norms)?;
                let reg = g.scale(reg, coeff)?;
                let loss = g.add(psi_mean, reg)?;
                g.backward(loss)?;
                pass.push(g.value(loss).data()[0]);
                apply_step(
                    &g,
                    &out.params,
                    &mut self.actor.params_mut(),
                    &mut self.actor_opt,
                    Some(cfg.max_grad_norm),
                )?;
            }
            trace.push(pass);
        }
        Ok(trace)
    }

    /// Value, sum-advantage and actor updates on one processed batch, then
    /// the coefficient update.
    pub fn update(&mut self, batch: &Batch, cfg: &PdaUpdateConfig, rng: &mut ChaCha8Rng) -> Result<PdaLosses> {
        let v = self.update_value(batch, cfg, rng)?;
        let p = self.update_psi_sum(batch, cfg, rng)?;
        let a = self.update_actor(&batch.obs, cfg, rng)?;
        self.schedule.advance();
        Ok(PdaLosses {
            value: last_pass_mean(&v),
            psi: last_pass_mean(&p),
            actor: last_pass_mean(&a),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.insert_all(self.value.param_names("value"), self.value.params());
        ck.insert_all(self.psi_sum.param_names("psi_sum"), self.psi_sum.params());
        ck.insert_all(self.actor.param_names("actor"), self.actor.params());
        if let ProxCenter::Snapshot(net) = &self.prox {
            ck.insert_all(net.param_names("prox"), net.params());
        }
        ck.insert("schedule.k", &Tensor::scalar(self.schedule.k as f64));
        ck
    }

    /// Restores network parameters and the iteration counter. Optimiser
    /// moments are not stored.
    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.load_all(self.value.param_names("value"), self.value.params_mut())?;
        ck.load_all(self.psi_sum.param_names("psi_sum"), self.psi_sum.params_mut())?;
        ck.load_all(self.actor.param_names("actor"), self.actor.params_mut())?;
        if let ProxCenter::Snapshot(net) = &mut self.prox {
            ck.load_all(net.param_names("prox"), net.params_mut())?;
        }
        let mut k = Tensor::scalar(0.0);
        ck.load_into("schedule.k", &mut k)?;
        let s = self.schedule;
        self.schedule = PdaSchedule::at(k.data()[0] as usize, s.lambda, s.sigma0, s.noise)?;
        Ok(())
    }
}

impl Policy for PdaState {
    fn obs_dim(&self) -> usize {
        self.actor.in_dim()
    }

    fn act_dim(&self) -> usize {
        self.actor.out_dim()
    }

    fn act(&self, obs: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Result<Action> {
        let mut a: Vec<f64> = self.actor.predict_one(obs)?.iter().map(|x| x.tanh()).collect();
        let sigma = self.schedule.sigma();
        if explore && sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for x in &mut a {
                *x = (*x + noise.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(Action {
            applied: a.clone(),
            stored: a,
            log_prob: 0.0,
        })
    }

    fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.predict_one(obs)?[0])
    }
}

/// Fresh state from a seed, used by tests and the runner.
pub fn seeded_state(
    obs_dim: usize,
    act_dim: usize,
    schedule: PdaSchedule,
    prox: ProxMode,
    lr: f64,
    seed: u64,
) -> PdaState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PdaState::new(obs_dim, act_dim, schedule, prox, lr, &mut rng)
}
