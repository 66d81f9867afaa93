//! Exact PDA on single-state instances and numerical checks of the
//! convergence guarantees.

mod assumptions;
mod checks;
mod exact;
mod instance;

pub use assumptions::{measure_assumptions, measure_with, AssumptionReport};
pub use checks::{
    check_lemma1, check_theorem1, check_theorem2, gap_ratio, harmonic, theorem2_sweep, BoundPoint, Theorem2Point,
    BOUND_TOL, LEMMA1_TOL,
};
pub use exact::{run_exact_pda, ExactTrace, IterationRecord, Objective, ScheduleCase, THEORY_GAMMA};
pub use instance::{Family, SyntheticInstance};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An instance paired with a schedule, parsed from `<family>[:<schedule>]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCase {
    pub id: String,
    pub instance: SyntheticInstance,
    pub schedule: ScheduleCase,
}

pub const DEFAULT_CASES: [&str; 3] = ["quadratic", "piecewise", "cosine"];
pub const DEFAULT_MU_ZERO_LAMBDA: f64 = 0.5;

impl TheoryCase {
    pub fn parse(id: &str) -> Result<Self> {
        let (family, sched) = match id.split_once(':') {
            Some((f, s)) => (f, Some(s)),
            None => (id, None),
        };
        let instance =
            SyntheticInstance::by_name(family).ok_or_else(|| Error::InvalidArgument(format!("unknown case {id}")))?;
        let schedule = match sched {
            None => match instance.mu_d() {
                m if m > 0.0 => ScheduleCase::MuPos,
                0.0 => ScheduleCase::MuZero {
                    lambda: DEFAULT_MU_ZERO_LAMBDA,
                },
                _ => ScheduleCase::MuNeg,
            },
            Some("mu_pos") => ScheduleCase::MuPos,
            Some("mu_zero") => ScheduleCase::MuZero {
                lambda: DEFAULT_MU_ZERO_LAMBDA,
            },
            Some("mu_neg") => ScheduleCase::MuNeg,
            Some(other) => return Err(Error::InvalidArgument(format!("unknown schedule {other} in case {id}"))),
        };
        Ok(Self {
            id: id.to_string(),
            instance,
            schedule,
        })
    }
}

/// One `(case, check)` entry of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub instance: String,
    pub schedule_case: String,
    pub check: String,
    #[serde(rename = "K")]
    pub horizon: usize,
    pub eps: Vec<f64>,
    pub max_violation: f64,
    pub tolerance: f64,
    /// Smallest margin per `k` (over the `ε` values).
    pub margins: Vec<f64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap_ratio_10_to_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kbar: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub entries: Vec<CheckEntry>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

pub const LEMMA1_ITERATIONS: [usize; 3] = [1, 5, 20];
pub const LEMMA1_TRIALS: usize = 1000;

fn lemma1_entry(case: &TheoryCase, eps_list: &[f64]) -> Result<CheckEntry> {
    let mut margins = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for &k in &LEMMA1_ITERATIONS {
        let mut m = f64::INFINITY;
        for &eps in eps_list {
            let trace = run_exact_pda(&case.instance, case.schedule, k + 1, eps)?;
            let v = check_lemma1(&trace, k, LEMMA1_TRIALS, k as u64)?;
            worst = worst.max(v);
            m = m.min(-v);
        }
        margins.push(m);
    }
    Ok(CheckEntry {
        instance: case.instance.name.clone(),
        schedule_case: case.schedule.name().into(),
        check: "lemma1".into(),
        horizon: *LEMMA1_ITERATIONS.last().unwrap(),
        eps: eps_list.to_vec(),
        max_violation: worst,
        tolerance: LEMMA1_TOL,
        margins,
        passed: worst <= LEMMA1_TOL,
        gap_ratio_10_to_k: None,
        kbar: None,
    })
}

fn theorem1_entry(case: &TheoryCase, horizon: usize, eps_list: &[f64]) -> Result<CheckEntry> {
    let mut margins = vec![f64::INFINITY; horizon];
    let mut worst = f64::NEG_INFINITY;
    let mut all_hold = true;
    let mut ratio = None;
    for &eps in eps_list {
        let trace = run_exact_pda(&case.instance, case.schedule, horizon, eps)?;
        for (p, m) in check_theorem1(&trace)?.iter().zip(margins.iter_mut()) {
            worst = worst.max(-p.margin());
            *m = m.min(p.margin());
            all_hold &= p.holds();
        }
        if eps == 0.0 {
            ratio = gap_ratio(&trace, 10, horizon);
        }
    }
    let decays = ratio.is_none_or(|r| r < 0.25);
    Ok(CheckEntry {
        instance: case.instance.name.clone(),
        schedule_case: case.schedule.name().into(),
        check: "theorem1".into(),
        horizon,
        eps: eps_list.to_vec(),
        max_violation: worst,
        tolerance: BOUND_TOL,
        margins,
        passed: all_hold && decays,
        gap_ratio_10_to_k: ratio,
        kbar: None,
    })
}

fn theorem2_entry(case: &TheoryCase, horizon: usize, eps_list: &[f64]) -> Result<CheckEntry> {
    if case.schedule != ScheduleCase::MuNeg {
        return Err(Error::ScheduleMismatch {
            case: format!("theorem2 on {}", case.id),
            mu_d: case.instance.mu_d(),
        });
    }
    let mut margins = vec![f64::INFINITY; horizon];
    let mut kbar = vec![0; horizon];
    let mut worst = f64::NEG_INFINITY;
    let mut all_hold = true;
    for &eps in eps_list {
        for (i, p) in theorem2_sweep(&case.instance, horizon, eps)?.into_iter().enumerate() {
            worst = worst.max(-p.margin());
            margins[i] = margins[i].min(p.margin());
            kbar[i] = p.kbar;
            all_hold &= p.holds;
        }
    }
    Ok(CheckEntry {
        instance: case.instance.name.clone(),
        schedule_case: case.schedule.name().into(),
        check: "theorem2".into(),
        horizon,
        eps: eps_list.to_vec(),
        max_violation: worst,
        tolerance: 0.0,
        margins,
        passed: all_hold,
        gap_ratio_10_to_k: None,
        kbar: Some(kbar),
    })
}

/// Lemma 1 for every case, the convex-case bound for convex schedules and
/// the weakly-convex bound for `mu_neg`. A schedule that does not match the
/// instance curvature is an error.
pub fn run_theory(case_ids: &[String], horizon: usize, eps_inject: f64) -> Result<TheoryReport> {
    let mut eps_list = vec![0.0];
    if eps_inject > 0.0 {
        eps_list.push(eps_inject);
    }
    let mut entries = Vec::new();
    for id in case_ids {
        let case = TheoryCase::parse(id)?;
        case.schedule.check(&case.instance)?;
        entries.push(lemma1_entry(&case, &eps_list)?);
        match case.schedule {
            ScheduleCase::MuNeg => entries.push(theorem2_entry(&case, horizon, &eps_list)?),
            _ => entries.push(theorem1_entry(&case, horizon, &eps_list)?),
        }
    }
    Ok(TheoryReport { entries })
}
