//! Seeded experiment execution: training loops, evaluation, optimum
//! tracking, seed comparisons and the theory report, with their on-disk
//! artefacts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Checkpoint;
use crate::config::{Algo, RunConfig};
use crate::envs::pendulum::MAX_TORQUE;
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::pda::{seeded_state, PdaSchedule, PdaState};
use crate::ppo::PpoState;
use crate::rollout::{finalize, Collector, Policy};
use crate::subsolver::{landscape, pendulum_states, tracking_mae, write_landscape_csv, SolverSettings, TrackingReport};
use crate::theorylab::{measure_assumptions, run_theory, AssumptionReport, TheoryReport};

pub const METRICS_HEADER: &str =
    "iter,env_steps,beta,sigma,value_loss,psi_loss,actor_loss,train_return_mean,test_return_mean,test_return_std";
pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
/// Test episode `i` of a run with seed `s` resets with `s·1000 + TEST_SEED_OFFSET + i`.
pub const TEST_SEED_OFFSET: u64 = 10_000;

const STREAM_AGENT: u64 = 1;
const STREAM_COLLECT: u64 = 2;
const STREAM_TRAIN: u64 = 3;

fn derived_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

#[allow(clippy::large_enum_variant)]
pub enum Agent {
    Pda(PdaState),
    Ppo(PpoState),
}

impl Agent {
    pub fn new(cfg: &RunConfig, obs_dim: usize, act_dim: usize) -> Result<Self> {
        let seed = derived_seed(cfg.seed, STREAM_AGENT);
        Ok(match cfg.algo {
            Algo::Pda => {
                let schedule = PdaSchedule::new(cfg.lambda, cfg.sigma0, cfg.noise)?;
                Agent::Pda(seeded_state(obs_dim, act_dim, schedule, cfg.prox, cfg.lr, seed))
            }
            Algo::Ppo => Agent::Ppo(PpoState::seeded(obs_dim, act_dim, cfg.lr, seed)),
        })
    }

    pub fn policy(&self) -> &dyn Policy {
        match self {
            Agent::Pda(s) => s,
            Agent::Ppo(s) => s,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        match self {
            Agent::Pda(s) => s.checkpoint(),
            Agent::Ppo(s) => s.checkpoint(),
        }
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        match self {
            Agent::Pda(s) => s.restore(ck),
            Agent::Ppo(s) => s.restore(ck),
        }
    }

    pub fn as_pda(&self) -> Option<&PdaState> {
        match self {
            Agent::Pda(s) => Some(s),
            Agent::Ppo(_) => None,
        }
    }
}

/// One row of `metrics.csv`. Fields that do not apply to the algorithm (or
/// to the untrained row 0) are `None` and written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iter: usize,
    pub env_steps: usize,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub value_loss: Option<f64>,
    pub psi_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub train_return_mean: Option<f64>,
    pub test_return_mean: f64,
    pub test_return_std: f64,
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.env_steps,
            cell(self.beta),
            cell(self.sigma),
            cell(self.value_loss),
            cell(self.psi_loss),
            cell(self.actor_loss),
            cell(self.train_return_mean),
            self.test_return_mean,
            self.test_return_std
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::InvalidArgument(format!(
                "metrics row has {} fields: {line}",
                f.len()
            )));
        }
        let bad = |s: &str| Error::InvalidArgument(format!("bad metrics field `{s}`"));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        Ok(Self {
            iter: f[0].parse().map_err(|_| bad(f[0]))?,
            env_steps: f[1].parse().map_err(|_| bad(f[1]))?,
            beta: opt(f[2])?,
            sigma: opt(f[3])?,
            value_loss: opt(f[4])?,
            psi_loss: opt(f[5])?,
            actor_loss: opt(f[6])?,
            train_return_mean: opt(f[7])?,
            test_return_mean: num(f[8])?,
            test_return_std: num(f[9])?,
        })
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<IterationMetrics>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::InvalidArgument(format!(
            "{} lacks the metrics header",
            path.display()
        )));
    }
    lines.map(IterationMetrics::parse_csv_row).collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Deterministic return of `episodes` test episodes on fresh copies of `env`.
pub fn evaluate_policy(policy: &dyn Policy, env: &Env, seed: u64, episodes: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut returns = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut env = env.clone();
        let mut obs = env.reset(seed.wrapping_mul(1000).wrapping_add(TEST_SEED_OFFSET + i as u64));
        let mut total = 0.0;
        loop {
            let a = policy.act(&obs, false, &mut rng)?;
            let step = env.step_normalized(&a.applied)?;
            total += step.reward;
            if step.done {
                break;
            }
            obs = step.obs;
        }
        returns.push(total);
    }
    Ok(mean_std(&returns))
}

/// In-memory training state for one run.
pub struct Trainer {
    pub cfg: RunConfig,
    pub agent: Agent,
    pub iteration: usize,
    pub env_steps: usize,
    collector: Collector,
    eval_env: Env,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let make = || Env::from_id_with(&cfg.env, cfg.gamma, &cfg.newsvendor);
        let eval_env = make()?;
        let envs = (0..cfg.num_envs).map(|_| make()).collect::<Result<Vec<_>>>()?;
        let spec = eval_env.spec().clone();
        let agent = Agent::new(&cfg, spec.obs_dim, spec.act_dim)?;
        let collector = Collector::new(envs, derived_seed(cfg.seed, STREAM_COLLECT))?;
        let rng = ChaCha8Rng::seed_from_u64(derived_seed(cfg.seed, STREAM_TRAIN));
        Ok(Self {
            cfg,
            agent,
            iteration: 0,
            env_steps: 0,
            collector,
            eval_env,
            rng,
        })
    }

    pub fn evaluate(&self) -> Result<(f64, f64)> {
        evaluate_policy(
            self.agent.policy(),
            &self.eval_env,
            self.cfg.seed,
            self.cfg.test_episodes,
        )
    }

    /// Row 0: the untrained policy.
    pub fn baseline(&self) -> Result<IterationMetrics> {
        let (test_return_mean, test_return_std) = self.evaluate()?;
        Ok(IterationMetrics {
            iter: 0,
            env_steps: 0,
            beta: None,
            sigma: None,
            value_loss: None,
            psi_loss: None,
            actor_loss: None,
            train_return_mean: None,
            test_return_mean,
            test_return_std,
        })
    }

    /// One collect/update iteration followed by the test evaluation.
    pub fn step(&mut self) -> Result<IterationMetrics> {
        let cfg = &self.cfg;
        if cfg.lr_decay {
            let lr = cfg.lr * (1.0 - self.iteration as f64 / cfg.iterations as f64);
            match &mut self.agent {
                Agent::Pda(s) => s.set_lr(lr),
                Agent::Ppo(s) => s.set_lr(lr),
            }
        }
        let rollout = self.collector.collect(
            self.agent.policy(),
            cfg.steps_per_collect,
            true,
            cfg.reward_scale,
            &mut self.rng,
        )?;
        let batch = finalize(&rollout, cfg.gamma, cfg.gae_lambda, cfg.return_mode)?;
        let (beta, sigma, value_loss, psi_loss, actor_loss) = match &mut self.agent {
            Agent::Pda(s) => {
                let (beta, sigma) = (s.schedule.beta, s.schedule.sigma());
                let l = s.update(&batch, &cfg.pda_update(), &mut self.rng)?;
                (Some(beta), Some(sigma), l.value, Some(l.psi), l.actor)
            }
            Agent::Ppo(s) => {
                let std = s.policy.std();
                let sigma = std.iter().sum::<f64>() / std.len() as f64;
                let l = s.update(&batch, &cfg.ppo_update(), &mut self.rng)?;
                (None, Some(sigma), l.value, None, l.policy)
            }
        };
        self.iteration += 1;
        self.env_steps += rollout.len();
        let train_return_mean = (!rollout.episode_returns.is_empty()).then(|| mean_std(&rollout.episode_returns).0);
        let (test_return_mean, test_return_std) = self.evaluate()?;
        Ok(IterationMetrics {
            iter: self.iteration,
            env_steps: self.env_steps,
            beta,
            sigma,
            value_loss: Some(value_loss),
            psi_loss,
            actor_loss: Some(actor_loss),
            train_return_mean,
            test_return_mean,
            test_return_std,
        })
    }
}

/// Directory used when a config does not name one.
pub fn default_run_dir(root: &Path, cfg: &RunConfig) -> PathBuf {
    let env = cfg.env.replace(':', "-");
    root.join(format!("{}_{}_seed{}", cfg.algo.name(), env, cfg.seed))
}

fn prepare_dir(cfg: &RunConfig, dir: &Path) -> Result<RunConfig> {
    fs::create_dir_all(dir)?;
    let mut cfg = cfg.clone();
    cfg.out = Some(dir.to_path_buf());
    fs::write(dir.join(CONFIG_FILE), cfg.to_json()? + "\n")?;
    Ok(cfg)
}

/// Runs every iteration of `cfg` in `dir`, writing `config.json`,
/// `metrics.csv` and checkpoints. `after` sees the trainer after each
/// iteration.
pub fn train_with<F>(cfg: &RunConfig, dir: &Path, mut after: F) -> Result<Vec<IterationMetrics>>
where
    F: FnMut(&Trainer, &IterationMetrics) -> Result<()>,
{
    cfg.validate()?;
    let cfg = prepare_dir(cfg, dir)?;
    let mut trainer = Trainer::new(cfg.clone())?;
    let mut csv = BufWriter::new(fs::File::create(dir.join(METRICS_FILE))?);
    writeln!(csv, "{METRICS_HEADER}")?;
    let mut rows = vec![trainer.baseline()?];
    writeln!(csv, "{}", rows[0].csv_row())?;
    after(&trainer, &rows[0])?;
    let ck_dir = dir.join("checkpoints");
    for _ in 0..cfg.iterations {
        let m = trainer.step()?;
        writeln!(csv, "{}", m.csv_row())?;
        csv.flush()?;
        if cfg.checkpoint_every > 0 && m.iter % cfg.checkpoint_every == 0 {
            fs::create_dir_all(&ck_dir)?;
            trainer
                .agent
                .checkpoint()
                .save(&ck_dir.join(format!("iter_{:04}.json", m.iter)))?;
        }
        after(&trainer, &m)?;
        rows.push(m);
    }
    trainer.agent.checkpoint().save(&dir.join(CHECKPOINT_FILE))?;
    Ok(rows)
}

pub fn train(cfg: &RunConfig, dir: &Path) -> Result<Vec<IterationMetrics>> {
    train_with(cfg, dir, |_, _| Ok(()))
}

/// Reloads a run directory's config and final checkpoint and evaluates it.
pub fn evaluate_run(dir: &Path, episodes: usize) -> Result<(f64, f64)> {
    let cfg = RunConfig::from_json(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    let mut trainer = Trainer::new(cfg)?;
    trainer.agent.restore(&Checkpoint::load(&dir.join(CHECKPOINT_FILE))?)?;
    evaluate_policy(trainer.agent.policy(), &trainer.eval_env, trainer.cfg.seed, episodes)
}

/// State and action grids for the optimum-tracking diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSettings {
    pub n_theta: usize,
    pub n_tau: usize,
    pub theta_dot: f64,
    pub solver: SolverSettings,
    /// Action grid used for the slope and curvature estimates.
    pub assumption_grid: usize,
}

impl Default for TrackSettings {
    fn default() -> Self {
        Self {
            n_theta: 50,
            n_tau: 50,
            theta_dot: 0.2,
            solver: SolverSettings::default(),
            assumption_grid: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub tracking: TrackingReport,
    pub assumptions: AssumptionReport,
}

pub fn landscape_file(epoch: usize) -> String {
    format!("landscape_epoch_{epoch:03}.csv")
}

/// Trains PDA on the pendulum, recording the actor's distance to the exact
/// sub-problem minimiser after every epoch and dumping the landscape at the
/// requested epochs. MAE is in torque units.
pub fn track(cfg: &RunConfig, dir: &Path, dump_epochs: &[usize], settings: TrackSettings) -> Result<TrackOutput> {
    if cfg.env != "pendulum" || cfg.algo != Algo::Pda {
        return Err(Error::InvalidArgument(format!(
            "track needs algo pda on pendulum, got {} on {}",
            cfg.algo.name(),
            cfg.env
        )));
    }
    let states = pendulum_states(settings.n_theta, settings.theta_dot);
    let mut epochs = Vec::new();
    let mut mae = Vec::new();
    let mut dumped = Vec::new();
    let mut last_coeff = f64::NAN;
    let mut coeff = PdaSchedule::new(cfg.lambda, cfg.sigma0, cfg.noise)?.coeff();
    train_with(cfg, dir, |trainer, m| {
        let Some(state) = trainer.agent.as_pda() else {
            return Ok(());
        };
        if m.iter == 0 {
            return Ok(());
        }
        // The actor just optimised the objective of the previous coefficient.
        let used = coeff;
        coeff = state.schedule.coeff();
        last_coeff = used;
        epochs.push(m.iter);
        mae.push(tracking_mae(state, used, &states, settings.solver, MAX_TORQUE)?);
        if dump_epochs.contains(&m.iter) {
            let rows = landscape(
                state,
                used,
                settings.n_theta,
                settings.n_tau,
                settings.theta_dot,
                MAX_TORQUE,
                settings.solver,
            )?;
            write_landscape_csv(
                BufWriter::new(fs::File::create(dir.join(landscape_file(m.iter)))?),
                &rows,
            )?;
            dumped.push(m.iter);
        }
        Ok(())
    })?;

    let mut trainer = Trainer::new(cfg.clone())?;
    trainer.agent.restore(&Checkpoint::load(&dir.join(CHECKPOINT_FILE))?)?;
    let state = trainer.agent.as_pda().expect("pda agent");
    let assumptions = measure_assumptions(state, last_coeff, &states, settings.assumption_grid, settings.solver)?;
    let tracking = TrackingReport {
        epochs,
        mae,
        solver_tolerance: MAX_TORQUE * assumptions.solver_tolerance,
        landscape_epochs: dumped,
    };
    let mut csv = String::from("epoch,mae\n");
    for (e, v) in tracking.epochs.iter().zip(&tracking.mae) {
        writeln!(csv, "{e},{v}").expect("string write");
    }
    fs::write(dir.join("tracking.csv"), csv)?;
    let out = TrackOutput { tracking, assumptions };
    fs::write(dir.join("tracking.json"), serde_json::to_string_pretty(&out)? + "\n")?;
    Ok(out)
}

/// Mean test return over the last five trained iterations.
pub fn last5_mean(rows: &[IterationMetrics]) -> Result<f64> {
    let trained: Vec<f64> = rows.iter().filter(|r| r.iter > 0).map(|r| r.test_return_mean).collect();
    if trained.is_empty() {
        return Err(Error::InvalidArgument("no trained iterations".into()));
    }
    let tail = &trained[trained.len().saturating_sub(5)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub algo: Algo,
    pub seed: u64,
    pub last5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algo: Algo,
    pub n_seeds: usize,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub env: String,
    pub rows: Vec<ComparisonRow>,
    pub per_seed: Vec<SeedResult>,
}

impl Comparison {
    pub fn csv(&self) -> String {
        let mut s = String::from("algo,n_seeds,last5_mean,last5_std\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{}", r.algo.name(), r.n_seeds, r.mean, r.std).expect("string write");
        }
        s
    }

    pub fn per_seed_csv(&self) -> String {
        let mut s = String::from("algo,seed,last5_mean\n");
        for r in &self.per_seed {
            writeln!(s, "{},{},{}", r.algo.name(), r.seed, r.last5).expect("string write");
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<6} {:>7} {:>16} {:>14}\n", "algo", "seeds", "last5 mean", "std");
        for r in &self.rows {
            writeln!(
                s,
                "{:<6} {:>7} {:>16.3} {:>14.3}",
                r.algo.name(),
                r.n_seeds,
                r.mean,
                r.std
            )
            .expect("string write");
        }
        s
    }
}

/// Trains every config (in parallel) under `root` and summarises the
/// last-five-epoch test return per algorithm. Configs must share an env.
pub fn compare(configs: &[RunConfig], root: &Path) -> Result<Comparison> {
    let env = match configs.first() {
        Some(c) => c.env.clone(),
        None => return Err(Error::InvalidArgument("compare needs at least one run".into())),
    };
    if configs.iter().any(|c| c.env != env) {
        return Err(Error::InvalidArgument("compare runs must share an env".into()));
    }
    let per_seed = configs
        .par_iter()
        .map(|c| {
            let rows = train(c, &default_run_dir(root, c))?;
            Ok(SeedResult {
                algo: c.algo,
                seed: c.seed,
                last5: last5_mean(&rows)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut algos: Vec<Algo> = Vec::new();
    for r in &per_seed {
        if !algos.contains(&r.algo) {
            algos.push(r.algo);
        }
    }
    let rows = algos
        .into_iter()
        .map(|algo| {
            let xs: Vec<f64> = per_seed.iter().filter(|r| r.algo == algo).map(|r| r.last5).collect();
            let (mean, std) = mean_std(&xs);
            ComparisonRow {
                algo,
                n_seeds: xs.len(),
                mean,
                std,
            }
        })
        .collect();
    let cmp = Comparison { env, rows, per_seed };
    fs::create_dir_all(root)?;
    fs::write(root.join("comparison.csv"), cmp.csv())?;
    fs::write(root.join("comparison_per_seed.csv"), cmp.per_seed_csv())?;
    Ok(cmp)
}

pub const THEORY_REPORT_FILE: &str = "theory-report.json";

/// Runs the theory checks and writes `theory-report.json` into `dir`.
pub fn theory(case_ids: &[String], horizon: usize, eps_inject: f64, dir: &Path) -> Result<TheoryReport> {
    let report = run_theory(case_ids, horizon, eps_inject)?;
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(THEORY_REPORT_FILE),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(algo: Algo, env: &str) -> RunConfig {
        let mut c = RunConfig::defaults(algo, env);
        c.iterations = 2;
        c.steps_per_collect = 256;
        c.batch_size = c.batch_size.min(256);
        c.passes = 2;
        c.test_episodes = 2;
        c.checkpoint_every = 1;
        c
    }

    #[test]
    fn metrics_row_round_trip() {
        let m = IterationMetrics {
            iter: 3,
            env_steps: 6144,
            beta: Some(3.0),
            sigma: None,
            value_loss: Some(0.1),
            psi_loss: None,
            actor_loss: Some(-1.5e-7),
            train_return_mean: None,
            test_return_mean: -812.25,
            test_return_std: 0.0,
        };
        assert_eq!(IterationMetrics::parse_csv_row(&m.csv_row()).unwrap(), m);
        assert_eq!(METRICS_HEADER.split(',').count(), 10);
    }

    #[test]
    fn train_writes_artefacts_for_both_algos() {
        for algo in [Algo::Pda, Algo::Ppo] {
            let dir = tempfile::tempdir().unwrap();
            let rows = train(&tiny(algo, "pendulum"), dir.path()).unwrap();
            assert_eq!(rows.len(), 3);
            assert_eq!(rows[2].env_steps, 512);
            assert_eq!(read_metrics(&dir.path().join(METRICS_FILE)).unwrap(), rows);
            assert!(dir.path().join("checkpoints/iter_0002.json").exists());
            let cfg = RunConfig::from_json(&fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap()).unwrap();
            assert_eq!(cfg.out.as_deref(), Some(dir.path()));
            let (m, _) = evaluate_run(dir.path(), 2).unwrap();
            assert_eq!(m, rows[2].test_return_mean);
        }
    }

    #[test]
    fn pda_rows_carry_schedule() {
        let dir = tempfile::tempdir().unwrap();
        let rows = train(&tiny(Algo::Pda, "newsvendor"), dir.path()).unwrap();
        assert_eq!(rows[1].beta, Some(1.0));
        assert_eq!(rows[2].beta, Some(2.0));
        assert_eq!(rows[1].sigma, Some(1.3));
        assert!(rows[1].psi_loss.is_some());
    }

    #[test]
    fn unknown_env_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            train(&tiny(Algo::Pda, "cartpole"), dir.path()),
            Err(Error::UnknownEnv(_))
        ));
    }

    #[test]
    fn last5_ignores_baseline() {
        let row = |iter, r| IterationMetrics {
            iter,
            env_steps: 0,
            beta: None,
            sigma: None,
            value_loss: None,
            psi_loss: None,
            actor_loss: None,
            train_return_mean: None,
            test_return_mean: r,
            test_return_std: 0.0,
        };
        let rows: Vec<_> = (0..8).map(|i| row(i, i as f64)).collect();
        assert_eq!(last5_mean(&rows).unwrap(), 5.0);
        assert_eq!(last5_mean(&rows[..3]).unwrap(), 1.5);
    }

    #[test]
    fn track_rejects_other_envs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(track(
            &tiny(Algo::Pda, "newsvendor"),
            dir.path(),
            &[],
            TrackSettings::default()
        )
        .is_err());
    }
}
