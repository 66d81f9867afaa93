use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pda_core::pda::{NoiseMode, ProxMode, SmoothingMode};
use pda_core::runner::{self, TrackSettings};
use pda_core::theorylab::DEFAULT_CASES;
use pda_core::{Algo, RunConfig};

#[derive(Parser)]
#[command(name = "pda-lab", version, about = "Policy dual averaging experiments")]
struct Cli {
    /// Root for run directories that are not given explicitly.
    #[arg(long, global = true, env = "PDA_LAB_OUT", default_value = "runs")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write config.json, metrics.csv and checkpoints.
    Train(TrainArgs),
    /// Train PDA on the pendulum while tracking the exact sub-problem optimum.
    Track(TrackArgs),
    /// Check the proximal lemma and convergence bounds on synthetic instances.
    Theory(TheoryArgs),
    /// Train several algorithms over several seeds and tabulate last-5 test returns.
    Compare(CompareArgs),
    /// Evaluate the final checkpoint of a run directory.
    Eval(EvalArgs),
}

/// Flags mirroring `RunConfig`. Unset flags keep the config file's value,
/// or the algorithm's default.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algo>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Env-step budget, converted to whole iterations.
    #[arg(long, conflicts_with = "iters")]
    steps: Option<usize>,
    #[arg(long)]
    steps_per_collect: Option<usize>,
    #[arg(long)]
    num_envs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    minibatch_size: Option<usize>,
    #[arg(long)]
    passes: Option<usize>,
    #[arg(long)]
    actor_passes: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// `decaying` or `constant`.
    #[arg(long, value_parser = parse_noise)]
    noise: Option<NoiseMode>,
    /// `dual` or `exponential[:alpha]`.
    #[arg(long, value_parser = parse_smoothing)]
    smoothing: Option<SmoothingMode>,
    /// `zero` or `initial`.
    #[arg(long, value_parser = parse_prox)]
    prox: Option<ProxMode>,
    #[arg(long)]
    reward_scale: Option<f64>,
    #[arg(long)]
    test_episodes: Option<usize>,
    /// Linear learning-rate decay (`true`/`false`).
    #[arg(long)]
    lr_decay: Option<bool>,
    /// Run directory (default: <out-root>/<algo>_<env>_seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_noise(s: &str) -> Result<NoiseMode, String> {
    match s {
        "decaying" => Ok(NoiseMode::Decaying),
        "constant" => Ok(NoiseMode::Constant),
        _ => Err(format!("unknown noise mode {s}")),
    }
}

fn parse_smoothing(s: &str) -> Result<SmoothingMode, String> {
    match s.split_once(':') {
        None if s == "dual" || s == "dual_averaging" => Ok(SmoothingMode::DualAveraging),
        None if s == "exponential" => Ok(SmoothingMode::Exponential { alpha: 0.5 }),
        Some(("exponential", a)) => a
            .parse()
            .map(|alpha| SmoothingMode::Exponential { alpha })
            .map_err(|e| format!("bad alpha {a}: {e}")),
        _ => Err(format!("unknown smoothing mode {s}")),
    }
}

fn parse_prox(s: &str) -> Result<ProxMode, String> {
    match s {
        "zero" => Ok(ProxMode::Zero),
        "initial" | "initial_actor" => Ok(ProxMode::InitialActor),
        _ => Err(format!("unknown prox mode {s}")),
    }
}

impl ConfigArgs {
    fn resolve(&self, default_algo: Algo, default_env: &str) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => {
                let algo = self.algo.unwrap_or(default_algo);
                RunConfig::defaults(algo, self.env.as_deref().unwrap_or(default_env))
            }
        };
        if let Some(a) = self.algo {
            if a != c.algo {
                let mut d = RunConfig::defaults(a, &c.env);
                d.seed = c.seed;
                c = d;
            }
        }
        if let Some(e) = &self.env {
            if *e != c.env {
                c.reward_scale = pda_core::config::default_reward_scale(e);
                c.test_episodes = pda_core::config::default_test_episodes(e);
                c.env = e.clone();
            }
        }
        macro_rules! set {
            ($($f:ident => $t:ident),*) => { $(if let Some(v) = self.$f { c.$t = v; })* };
        }
        set!(seed => seed, iters => iterations, steps_per_collect => steps_per_collect, num_envs => num_envs,
             batch_size => batch_size, minibatch_size => minibatch_size, passes => passes,
             lr => lr, lambda => lambda, sigma0 => sigma0, noise => noise, smoothing => smoothing,
             prox => prox, reward_scale => reward_scale, test_episodes => test_episodes, lr_decay => lr_decay);
        if self.actor_passes.is_some() {
            c.actor_passes = self.actor_passes;
        }
        if let Some(steps) = self.steps {
            c.iterations = c.iterations_for_budget(steps);
        }
        if c.algo == Algo::Ppo && self.steps_per_collect.is_some() && self.batch_size.is_none() && self.config.is_none()
        {
            c.batch_size = c.steps_per_collect;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn run_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| runner::default_run_dir(root, cfg))
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Epochs at which to dump the sub-problem landscape.
    #[arg(long, value_delimiter = ',', default_value = "5,8,11")]
    dump: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    theta_dot: f64,
}

#[derive(Args)]
struct TheoryArgs {
    /// Case ids `<family>[:mu_pos|mu_zero|mu_neg]`.
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<String>>,
    #[arg(long = "k", default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps_inject: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "pda,ppo")]
    algos: Vec<Algo>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory containing config.json and checkpoint.json.
    run: PathBuf,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
}

fn print_row(m: &runner::IterationMetrics) {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!(
        "iter {:>4}  steps {:>8}  sigma {:>8}  vloss {:>10}  test {:>12.3} ± {:.3}",
        m.iter,
        m.env_steps,
        opt(m.sigma),
        opt(m.value_loss),
        m.test_return_mean,
        m.test_return_std
    );
}

fn cmd_train(args: TrainArgs, root: &Path) -> Result<()> {
    let cfg = args.cfg.resolve(Algo::Pda, "pendulum")?;
    let dir = run_dir(&cfg, root);
    runner::train_with(&cfg, &dir, |_, m| {
        print_row(m);
        Ok(())
    })?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_track(args: TrackArgs, root: &Path) -> Result<()> {
    let mut cfg = args.cfg.resolve(Algo::Pda, "pendulum")?;
    if args.cfg.iters.is_none() && args.cfg.steps.is_none() && args.cfg.config.is_none() {
        cfg.iterations = 15;
    }
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("track_seed{}", cfg.seed)));
    let settings = TrackSettings {
        theta_dot: args.theta_dot,
        ..TrackSettings::default()
    };
    let out = runner::track(&cfg, &dir, &args.dump, settings)?;
    for (e, m) in out.tracking.epochs.iter().zip(&out.tracking.mae) {
        println!("epoch {e:>3}  mae {m:.5}");
    }
    println!(
        "eps_opt mean {:.3e}  max {:.3e}",
        out.assumptions.eps_opt_mean, out.assumptions.eps_opt_max
    );
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_theory(args: TheoryArgs, root: &Path) -> Result<bool> {
    let cases = args
        .cases
        .unwrap_or_else(|| DEFAULT_CASES.iter().map(|s| s.to_string()).collect());
    let dir = args.out.unwrap_or_else(|| root.to_path_buf());
    let report = runner::theory(&cases, args.horizon, args.eps_inject, &dir)?;
    for e in &report.entries {
        println!(
            "{:<4} {:<12} {:<8} {:<9} max_violation {:>11.3e}  tol {:.0e}",
            if e.passed { "PASS" } else { "FAIL" },
            e.instance,
            e.schedule_case,
            e.check,
            e.max_violation,
            e.tolerance
        );
    }
    println!("report: {}", dir.join(runner::THEORY_REPORT_FILE).display());
    Ok(report.passed())
}

fn cmd_compare(args: CompareArgs, root: &Path) -> Result<()> {
    if args.seeds.is_empty() || args.algos.is_empty() {
        bail!("compare needs at least one seed and one algo");
    }
    let base_env = args.cfg.env.clone().unwrap_or_else(|| "newsvendor".into());
    let dir = args
        .cfg
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("compare_{}", base_env.replace(':', "-"))));
    let mut configs = Vec::new();
    for &algo in &args.algos {
        for &seed in &args.seeds {
            let mut flags = args.cfg.clone();
            flags.algo = Some(algo);
            flags.seed = Some(seed);
            flags.env = Some(base_env.clone());
            flags.out = None;
            let mut c = flags.resolve(algo, &base_env)?;
            c.out = None;
            configs.push(c);
        }
    }
    let cmp = runner::compare(&configs, &dir)?;
    print!("{}", cmp.table());
    println!("table: {}", dir.join("comparison.csv").display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (mean, std) = runner::evaluate_run(&args.run, args.episodes)?;
    println!("test return {mean:.3} ± {std:.3} over {} episodes", args.episodes);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, &cli.out_root).map(|_| true),
        Command::Track(a) => cmd_track(a, &cli.out_root).map(|_| true),
        Command::Theory(a) => cmd_theory(a, &cli.out_root),
        Command::Compare(a) => cmd_compare(a, &cli.out_root).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: theory checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
