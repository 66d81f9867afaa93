//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pda-core --test acceptance`; pass criterion
//! numbers after `--` to run a subset. The process fails when a criterion
//! outside `KNOWN_FAILING` fails.

mod common;

use std::time::Instant;

use pda_core::pda::{psi_sum_target, NoiseMode, PdaSchedule, SmoothingMode, TabularPsiSum};
use pda_core::rollout::compute_gae;
use pda_core::runner::{compare, last5_mean, read_metrics, track, train, TrackSettings, METRICS_FILE};
use pda_core::theorylab::{run_theory, TheoryReport, DEFAULT_CASES};
use pda_core::{Algo, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail on the current implementation; see README.
const KNOWN_FAILING: [u32; 2] = [8, 10];

/// Final tracking MAE (torque units) of the over-trained oracle: seed 0,
/// 15 epochs, 100 actor passes per epoch instead of 10.
const TRACK_ORACLE_MAE: f64 = 0.0245;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn c1_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let worst = (0..100)
        .map(|_| common::gradient_rel_error(&common::random_loss_case(&mut rng)))
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-6,
        format!("max relative error {worst:.2e} over 100 random MLP losses (< 1e-6)"),
    )
}

fn c2_gae() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = common::random_gae_case(&mut rng);
        let fast = compute_gae(&c.rewards, &c.values, &c.dones, c.gamma, c.lambda).unwrap();
        let slow = common::gae_double_sum(&c.rewards, &c.values, &c.dones, c.gamma, c.lambda);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst < 1e-10,
        format!("max abs error {worst:.2e} over 1000 instances (< 1e-10)"),
    )
}

fn c3_tabular_recursion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let mut tab = TabularPsiSum::new(n);
    let mut sched = PdaSchedule::new(0.5, 1.3, NoiseMode::Decaying).unwrap();
    let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let adv: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        tab.update(&adv, &sched, SmoothingMode::DualAveraging).unwrap();
        history.push((sched.beta, adv));
        let total: f64 = history.iter().map(|(b, _)| b).sum();
        for i in 0..n {
            let direct = history.iter().map(|(b, a)| b * a[i]).sum::<f64>() / total;
            worst = worst.max((tab.table[i] - direct).abs());
        }
        sched.advance();
    }
    outcome(
        worst < 1e-10,
        format!("max abs error {worst:.2e} over K=50, {n} (s,a) cells (< 1e-10)"),
    )
}

fn c4_schedule() -> Outcome {
    let (lambda, sigma0) = (0.5, 1.3);
    let mut s = PdaSchedule::new(lambda, sigma0, NoiseMode::Decaying).unwrap();
    let mut bad = None;
    for k in 0..=10_000usize {
        let kf = k as f64;
        let coeff = lambda * (kf + 1.0).powf(1.5) * 2.0 / ((kf + 1.0) * (kf + 2.0));
        if s.beta != kf + 1.0 || s.sum_beta != (kf + 1.0) * (kf + 2.0) / 2.0 || s.coeff() != coeff {
            bad = Some(k);
            break;
        }
        s.advance();
    }
    let s1023 = PdaSchedule::at(1023, lambda, sigma0, NoiseMode::Decaying).unwrap();
    let sigma_ok = s1023.beta == 1024.0 && s1023.sigma() == sigma0 / 8.0;
    match bad {
        None if sigma_ok => outcome(true, "identities exact for k <= 1e4, sigma(1024) = sigma0/8".into()),
        None => outcome(false, format!("sigma(1024) = {} != {}", s1023.sigma(), sigma0 / 8.0)),
        Some(k) => outcome(false, format!("identity broken at k = {k}")),
    }
}

fn theory_line(report: &TheoryReport, check: &str) -> Outcome {
    let entries: Vec<_> = report.entries.iter().filter(|e| e.check == check).collect();
    let passed = !entries.is_empty() && entries.iter().all(|e| e.passed);
    let parts: Vec<String> = entries
        .iter()
        .map(|e| {
            let mut s = format!("{}/{} violation {:.2e}", e.instance, e.schedule_case, e.max_violation);
            if let Some(r) = e.gap_ratio_10_to_k {
                s.push_str(&format!(" gap ratio {r:.3}"));
            }
            s
        })
        .collect();
    outcome(passed, parts.join("; "))
}

fn c5_to_7_theory() -> [Outcome; 3] {
    let ids: Vec<String> = DEFAULT_CASES.iter().map(|s| s.to_string()).collect();
    let report = run_theory(&ids, 200, 1e-3).unwrap();
    [
        theory_line(&report, "lemma1"),
        theory_line(&report, "theorem1"),
        theory_line(&report, "theorem2"),
    ]
}

fn c8_tracking() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(Algo::Pda, "pendulum");
    cfg.iterations = 15;
    let out = track(&cfg, dir.path(), &[], TrackSettings::default()).unwrap();
    let mae = &out.tracking.mae;
    let (first, last) = (mae[0], *mae.last().unwrap());
    let tail = &mae[mae.len() - 5..];
    let mean = tail.iter().sum::<f64>() / 5.0;
    let spread =
        tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    let shrinks = last < 0.5 * first;
    let calibrated = last <= TRACK_ORACLE_MAE;
    let stable = spread < 0.3 * mean;
    outcome(
        shrinks && calibrated && stable,
        format!(
            "MAE epoch 1 {first:.4}, epoch 15 {last:.4} [{} < 50% of epoch 1] [{} <= oracle {TRACK_ORACLE_MAE} N·m] [{} last-5 spread {:.0}% of mean < 30%]",
            ok(shrinks),
            ok(calibrated),
            ok(stable),
            100.0 * spread / mean
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "no"
    }
}

fn c9_pendulum() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut all = true;
    for seed in 0..3 {
        let mut cfg = RunConfig::defaults(Algo::Pda, "pendulum");
        cfg.seed = seed;
        cfg.iterations = cfg.iterations_for_budget(150_000);
        let rows = train(&cfg, &root.path().join(format!("seed{seed}"))).unwrap();
        let initial = rows[0].test_return_mean;
        let last5 = last5_mean(&rows).unwrap();
        let good = last5 >= 0.4 * initial;
        all &= good;
        parts.push(format!("seed {seed}: {initial:.1} -> {last5:.1} [{}]", ok(good)));
    }
    outcome(all, format!("{} (final >= 0.4 x initial)", parts.join(", ")))
}

fn c10_newsvendor() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut configs = Vec::new();
    for algo in [Algo::Pda, Algo::Ppo] {
        for seed in 0..3 {
            let mut cfg = RunConfig::defaults(algo, "newsvendor");
            cfg.seed = seed;
            cfg.iterations = cfg.iterations_for_budget(100_000);
            configs.push(cfg);
        }
    }
    let cmp = compare(&configs, root.path()).unwrap();
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let get = |a: Algo| {
            cmp.per_seed
                .iter()
                .find(|r| r.algo == a && r.seed == seed)
                .unwrap()
                .last5
        };
        let (p, q) = (get(Algo::Pda), get(Algo::Ppo));
        if p >= q {
            wins += 1;
        }
        parts.push(format!("seed {seed}: pda {p:.0} vs ppo {q:.0}"));
    }
    outcome(
        wins >= 2,
        format!("PDA >= PPO on {wins}/3 seeds (need 2); {}", parts.join(", ")),
    )
}

fn c11_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut all = true;
    for (algo, env) in [(Algo::Pda, "pendulum"), (Algo::Ppo, "newsvendor")] {
        let mut cfg = RunConfig::defaults(algo, env);
        cfg.seed = 7;
        cfg.iterations = 3;
        cfg.steps_per_collect = 512;
        cfg.batch_size = cfg.batch_size.min(512);
        cfg.test_episodes = 3;
        let a = root.path().join(format!("{}_a", algo.name()));
        let b = root.path().join(format!("{}_b", algo.name()));
        train(&cfg, &a).unwrap();
        train(&cfg, &b).unwrap();
        let same = std::fs::read(a.join(METRICS_FILE)).unwrap() == std::fs::read(b.join(METRICS_FILE)).unwrap();
        let rows = read_metrics(&a.join(METRICS_FILE)).unwrap().len();
        all &= same;
        parts.push(format!(
            "{} on {env}: {rows} rows {}",
            algo.name(),
            if same { "identical" } else { "differ" }
        ));
    }
    outcome(all, parts.join(", "))
}

fn c12_exponential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let alpha = 0.5;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = rng.random_range(1..256);
        let old: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let adv: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let sched = PdaSchedule::at(k, 0.5, 1.3, NoiseMode::Decaying).unwrap();
        let got = psi_sum_target(&old, &adv, &sched, SmoothingMode::Exponential { alpha }).unwrap();
        for ((g, o), a) in got.iter().zip(&old).zip(&adv) {
            worst = worst.max((g - ((1.0 - alpha) * o + alpha * a)).abs());
        }
    }
    outcome(
        worst < 1e-12,
        format!("max abs error {worst:.2e} over 100 random batches (< 1e-12)"),
    )
}

const NAMES: [&str; 12] = [
    "gradient correctness",
    "GAE oracle equivalence",
    "sum-advantage recursion",
    "schedule identities",
    "lemma 1 numeric check",
    "convex bound check",
    "weakly-convex bound check",
    "actor tracking (pendulum, 15 epochs)",
    "pendulum learning (3 seeds, 150k steps)",
    "PDA vs PPO on newsvendor (3 seeds, 100k steps)",
    "determinism",
    "exponential smoothing target",
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |i: u32| selected.is_empty() || selected.contains(&i);
    let mut results: Vec<(u32, Outcome, f64)> = Vec::new();
    let singles: [(u32, fn() -> Outcome); 4] = [
        (1, c1_gradients),
        (2, c2_gae),
        (3, c3_tabular_recursion),
        (4, c4_schedule),
    ];
    for (i, f) in singles {
        run(i, f, &wanted, &mut results);
    }
    if (5..=7).any(&wanted) {
        let t = Instant::now();
        let theory = c5_to_7_theory();
        let secs = t.elapsed().as_secs_f64();
        for (i, o) in (5..=7).zip(theory) {
            if wanted(i) {
                report(i, &o, secs);
                results.push((i, o, secs));
            }
        }
    }
    let rest: [(u32, fn() -> Outcome); 5] = [
        (8, c8_tracking),
        (9, c9_pendulum),
        (10, c10_newsvendor),
        (11, c11_determinism),
        (12, c12_exponential),
    ];
    for (i, f) in rest {
        run(i, f, &wanted, &mut results);
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.passed).map(|r| r.0).collect();
    let unexpected: Vec<u32> = failed.iter().copied().filter(|i| !KNOWN_FAILING.contains(i)).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} ({} outside the known-failing list)",
        results.len() - failed.len(),
        failed.len(),
        failed,
        unexpected.len()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}

fn run(i: u32, f: fn() -> Outcome, wanted: &dyn Fn(u32) -> bool, results: &mut Vec<(u32, Outcome, f64)>) {
    if wanted(i) {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        report(i, &o, secs);
        results.push((i, o, secs));
    }
}

fn report(i: u32, o: &Outcome, secs: f64) {
    let tag = if o.passed { "PASS" } else { "FAIL" };
    println!("{tag} {i:>2} {}: {} ({secs:.1}s)", NAMES[i as usize - 1], o.detail);
}
