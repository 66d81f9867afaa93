//! On-policy trajectory collection and batch processing (returns and
//! normalised advantages).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::envs::Env;
use crate::error::{Error, Result};

/// Floor on the advantage standard deviation used for normalisation.
pub const ADV_STD_FLOOR: f64 = 1e-8;

/// An action chosen by a policy, in the normalised cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    /// Action sent to the environment (clipped to `[-1, 1]`).
    pub applied: Vec<f64>,
    /// Action stored for learning. Equal to `applied` unless the policy
    /// needs the unclipped sample for likelihoods.
    pub stored: Vec<f64>,
    pub log_prob: f64,
}

pub trait Policy {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn act(&self, obs: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Result<Action>;
    fn value(&self, obs: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    /// Scaled reward. On a time-limit truncation it also carries
    /// `γ·V(s')`, so the episode end does not read as a terminal state.
    pub reward: f64,
    pub done: bool,
    pub value: f64,
    pub log_prob: f64,
}

/// Contiguous transitions from one environment, with the critic's value of
/// the state after the last transition (zero when that transition ended the
/// episode).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub transitions: Vec<Transition>,
    pub bootstrap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub segments: Vec<Segment>,
    /// Undiscounted, unscaled returns of episodes that finished during collection.
    pub episode_returns: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.segments.iter().flat_map(|s| s.transitions.iter())
    }
}

/// Persistent set of training environments. Episodes continue across
/// calls to [`Collector::collect`].
#[derive(Debug, Clone)]
pub struct Collector {
    envs: Vec<Env>,
    obs: Vec<Vec<f64>>,
    running_return: Vec<f64>,
    seeder: ChaCha8Rng,
}

impl Collector {
    pub fn new(mut envs: Vec<Env>, seed: u64) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::InvalidArgument("collector needs at least one env".into()));
        }
        let mut seeder = ChaCha8Rng::seed_from_u64(seed);
        let obs = envs.iter_mut().map(|e| e.reset(seeder.random())).collect();
        let running_return = vec![0.0; envs.len()];
        Ok(Self {
            envs,
            obs,
            running_return,
            seeder,
        })
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }

    /// Collects exactly `n_steps` transitions, split across the envs in index
    /// order. Rewards are multiplied by `reward_scale`; reported episode
    /// returns are not.
    pub fn collect<P: Policy + ?Sized>(
        &mut self,
        policy: &P,
        n_steps: usize,
        explore: bool,
        reward_scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Rollout> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        let spec = self.envs[0].spec();
        if policy.obs_dim() != spec.obs_dim || policy.act_dim() != spec.act_dim {
            return Err(Error::Dimension(format!(
                "policy is {}→{}, env is {}→{}",
                policy.obs_dim(),
                policy.act_dim(),
                spec.obs_dim,
                spec.act_dim
            )));
        }

        let k = self.envs.len();
        let mut out = Rollout::default();
        for i in 0..k {
            let steps = n_steps / k + usize::from(i < n_steps % k);
            if steps == 0 {
                continue;
            }
            let mut transitions = Vec::with_capacity(steps);
            for _ in 0..steps {
                let obs = std::mem::take(&mut self.obs[i]);
                let value = policy.value(&obs)?;
                let action = policy.act(&obs, explore, rng)?;
                let step = self.envs[i].step_normalized(&action.applied)?;
                self.running_return[i] += step.reward;
                let mut reward = step.reward * reward_scale;
                if step.truncated {
                    reward += self.envs[i].spec().gamma * policy.value(&step.obs)?;
                }
                transitions.push(Transition {
                    obs,
                    action: action.stored,
                    reward,
                    done: step.done,
                    value,
                    log_prob: action.log_prob,
                });
                self.obs[i] = if step.done {
                    out.episode_returns.push(self.running_return[i]);
                    self.running_return[i] = 0.0;
                    let seed = self.seeder.random();
                    self.envs[i].reset(seed)
                } else {
                    step.obs
                };
            }
            let bootstrap = if transitions.last().is_some_and(|t| t.done) {
                0.0
            } else {
                policy.value(&self.obs[i])?
            };
            out.segments.push(Segment { transitions, bootstrap });
        }
        Ok(out)
    }
}

/// Generalised advantage estimates. `values` carries one extra trailing
/// entry: the bootstrap value of the state after the last transition.
pub fn compute_gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    let t = rewards.len();
    if dones.len() != t {
        return Err(Error::LengthMismatch {
            what: "gae dones",
            expected: t,
            got: dones.len(),
        });
    }
    if values.len() != t + 1 {
        return Err(Error::LengthMismatch {
            what: "gae values",
            expected: t + 1,
            got: values.len(),
        });
    }
    let mut adv = vec![0.0; t];
    let mut next = 0.0;
    for i in (0..t).rev() {
        let live = if dones[i] { 0.0 } else { 1.0 };
        let delta = rewards[i] + gamma * live * values[i + 1] - values[i];
        next = delta + gamma * lambda * live * next;
        adv[i] = next;
    }
    Ok(adv)
}

/// Discounted Monte-Carlo returns, bootstrapped at the end of the segment.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = bootstrap;
    for i in (0..rewards.len()).rev() {
        if dones[i] {
            g = 0.0;
        }
        g = rewards[i] + gamma * g;
        out[i] = g;
    }
    out
}

/// `(x − mean) / max(std, ADV_STD_FLOOR)` with the population std.
pub fn normalize(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(ADV_STD_FLOOR);
    x.iter().map(|v| (v - mean) / std).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    /// `G = A + V`, the λ-return matching GAE.
    LambdaReturn,
    MonteCarlo,
}

/// Processed rollout ready for minibatch updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub raw_advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Runs GAE per segment and assembles the normalised batch.
pub fn finalize(rollout: &Rollout, gamma: f64, gae_lambda: f64, mode: ReturnMode) -> Result<Batch> {
    if rollout.is_empty() {
        return Err(Error::InvalidArgument("cannot process an empty batch".into()));
    }
    let mut obs_rows = Vec::new();
    let mut act_rows = Vec::new();
    let mut b = Batch {
        obs: Tensor::scalar(0.0),
        actions: Tensor::scalar(0.0),
        rewards: Vec::new(),
        dones: Vec::new(),
        values: Vec::new(),
        log_probs: Vec::new(),
        raw_advantages: Vec::new(),
        returns: Vec::new(),
        advantages: Vec::new(),
    };
    for seg in &rollout.segments {
        let rewards: Vec<f64> = seg.transitions.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = seg.transitions.iter().map(|t| t.done).collect();
        let mut values: Vec<f64> = seg.transitions.iter().map(|t| t.value).collect();
        values.push(seg.bootstrap);
        let adv = compute_gae(&rewards, &values, &dones, gamma, gae_lambda)?;
        let returns = match mode {
            ReturnMode::LambdaReturn => adv.iter().zip(&values).map(|(a, v)| a + v).collect(),
            ReturnMode::MonteCarlo => discounted_returns(&rewards, &dones, seg.bootstrap, gamma),
        };
        values.pop();
        for t in &seg.transitions {
            obs_rows.push(t.obs.clone());
            act_rows.push(t.action.clone());
            b.log_probs.push(t.log_prob);
        }
        b.rewards.extend(rewards);
        b.dones.extend(dones);
        b.values.extend(values);
        b.raw_advantages.extend(adv);
        b.returns.extend(returns);
    }
    b.obs = Tensor::from_rows(&obs_rows)?;
    b.actions = Tensor::from_rows(&act_rows)?;
    b.advantages = normalize(&b.raw_advantages);
    Ok(b)
}

/// Minibatch index sets for one pass: shuffle, keep the first
/// `min(batch_size, n)` indices and split them into chunks of `minibatch_size`.
pub fn minibatch_indices(n: usize, batch_size: usize, minibatch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(batch_size.min(n));
    idx.chunks(minibatch_size.max(1)).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Direct Σ_l (γλ)^l δ_{t+l}, stopping after the first terminal.
    pub(crate) fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
        let t = r.len();
        (0..t)
            .map(|i| {
                let mut total = 0.0;
                let mut w = 1.0;
                for j in i..t {
                    let live = if d[j] { 0.0 } else { 1.0 };
                    let delta = r[j] + gamma * live * v[j + 1] - v[j];
                    total += w * delta;
                    if d[j] {
                        break;
                    }
                    w *= gamma * lambda;
                }
                total
            })
            .collect()
    }

    #[test]
    fn reward_to_go_when_undiscounted() {
        let a = compute_gae(&[1.0, 1.0], &[0.0, 0.0, 0.0], &[false, false], 1.0, 1.0).unwrap();
        assert_eq!(a, vec![2.0, 1.0]);
    }

    #[test]
    fn zero_case() {
        let a = compute_gae(&[0.0; 5], &[0.0; 6], &[false; 5], 0.99, 0.95).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[1.0], &[0.0], &[false], 0.9, 0.9).is_err());
        assert!(compute_gae(&[1.0], &[0.0, 0.0], &[false, true], 0.9, 0.9).is_err());
    }

    #[test]
    fn matches_oracle_on_random_length_twenty() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..20).map(|i| i == 9).collect();
        let fast = compute_gae(&r, &v, &d, 0.99, 0.95).unwrap();
        let slow = gae_oracle(&r, &v, &d, 0.99, 0.95);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn equal_advantages_normalize_to_zero() {
        assert_eq!(normalize(&[0.7; 4]), vec![0.0; 4]);
    }

    #[test]
    fn standardized_input_is_unchanged() {
        assert_eq!(normalize(&[-1.0, 1.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn lambda_return_is_advantage_plus_value() {
        let seg = Segment {
            transitions: vec![
                Transition {
                    obs: vec![0.0],
                    action: vec![0.0],
                    reward: 0.0,
                    done: false,
                    value: 1.0,
                    log_prob: 0.0,
                },
                Transition {
                    obs: vec![0.0],
                    action: vec![0.0],
                    reward: 0.0,
                    done: false,
                    value: 2.0,
                    log_prob: 0.0,
                },
            ],
            bootstrap: 0.0,
        };
        let rollout = Rollout {
            segments: vec![seg],
            episode_returns: vec![],
        };
        let b = finalize(&rollout, 0.9, 0.95, ReturnMode::LambdaReturn).unwrap();
        for i in 0..2 {
            assert_eq!(b.returns[i], b.raw_advantages[i] + b.values[i]);
        }
        // G = A_raw + V holds for any advantages
        let g: Vec<f64> = [0.5, -0.5].iter().zip([1.0, 2.0]).map(|(a, v)| a + v).collect();
        assert_eq!(g, vec![1.5, 1.5]);
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(finalize(&Rollout::default(), 0.99, 0.95, ReturnMode::LambdaReturn).is_err());
    }

    #[test]
    fn monte_carlo_returns_reset_at_done() {
        let g = discounted_returns(&[1.0, 1.0, 1.0], &[false, true, false], 10.0, 0.5);
        assert_eq!(g, vec![1.5, 1.0, 6.0]);
    }

    struct Sine;

    impl Policy for Sine {
        fn obs_dim(&self) -> usize {
            3
        }
        fn act_dim(&self) -> usize {
            1
        }
        fn act(&self, obs: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Result<Action> {
            let noise = if explore { rng.random_range(-0.1..0.1) } else { 0.0 };
            let a = vec![(obs[1] + noise).clamp(-1.0, 1.0)];
            Ok(Action {
                applied: a.clone(),
                stored: a,
                log_prob: 0.0,
            })
        }
        fn value(&self, obs: &[f64]) -> Result<f64> {
            Ok(obs[0])
        }
    }

    fn pendulum_collector(seed: u64) -> Collector {
        Collector::new(vec![Env::from_id("pendulum", 0.99).unwrap()], seed).unwrap()
    }

    #[test]
    fn collects_exact_step_count() {
        let mut c = pendulum_collector(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = c.collect(&Sine, 1, true, 1.0, &mut rng).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn deterministic_collection_repeats() {
        let run = || {
            let mut c = pendulum_collector(5);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            c.collect(&Sine, 50, false, 1.0, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn two_episodes_in_four_hundred_steps() {
        let mut c = pendulum_collector(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = c.collect(&Sine, 400, true, 1.0, &mut rng).unwrap();
        assert_eq!(r.transitions().filter(|t| t.done).count(), 2);
        assert_eq!(r.episode_returns.len(), 2);
        assert_eq!(r.segments[0].bootstrap, 0.0);
    }

    #[test]
    fn time_limit_reward_carries_discounted_value() {
        let mut c = pendulum_collector(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = c.collect(&Sine, 200, false, 1.0, &mut rng).unwrap();
        let learner: f64 = r.transitions().map(|t| t.reward).sum();
        let extra = (learner - r.episode_returns[0]) / 0.99;
        assert!(extra.abs() <= 1.0 + 1e-9 && extra != 0.0, "{extra}");
    }

    #[test]
    fn truncated_segment_bootstraps_from_critic() {
        let mut c = pendulum_collector(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = c.collect(&Sine, 10, false, 1.0, &mut rng).unwrap();
        let next_obs = c.envs()[0].observe();
        assert_eq!(r.segments[0].bootstrap, next_obs[0]);
    }

    #[test]
    fn env_set_splits_steps_in_index_order() {
        let envs = vec![
            Env::from_id("pendulum", 0.99).unwrap(),
            Env::from_id("pendulum", 0.99).unwrap(),
            Env::from_id("pendulum", 0.99).unwrap(),
        ];
        let mut c = Collector::new(envs, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = c.collect(&Sine, 10, true, 1.0, &mut rng).unwrap();
        let sizes: Vec<_> = r.segments.iter().map(|s| s.transitions.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut c = Collector::new(vec![Env::from_id("newsvendor", 0.99).unwrap()], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            c.collect(&Sine, 5, true, 1.0, &mut rng),
            Err(Error::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn lambda_zero_is_td_error(
            r in proptest::collection::vec(-5.0f64..5.0, 1..30),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = r.len();
            let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
            let a = compute_gae(&r, &v, &d, 0.97, 0.0).unwrap();
            for i in 0..n {
                let live = if d[i] { 0.0 } else { 1.0 };
                prop_assert_eq!(a[i], r[i] + 0.97 * live * v[i + 1] - v[i]);
            }
        }

        #[test]
        fn normalization_is_idempotent(x in proptest::collection::vec(-100.0f64..100.0, 2..200)) {
            let once = normalize(&x);
            let twice = normalize(&once);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let n = once.len() as f64;
            let mean = once.iter().sum::<f64>() / n;
            let std = (once.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            // a constant input normalises to all zeros
            prop_assert!((std - 1.0).abs() < 1e-9 || std == 0.0);
        }
    }
}
