//! Benchmark harness: runs trials in parallel, reduces them in trial order
//! and writes the trial, summary and sweep CSV files.

use crate::datasets::{synth_crowd, synthetic_trials, Scenario, SyntheticConfig};
use crate::sim::{run_trial, Outcome, PlannerKind, SimConfig, SimError, TrialResult};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

pub const TRIAL_HEADER: &str =
    "dataset,planner,trial_id,start_offset_s,outcome,travel_time_s,mean_plan_ms,max_plan_ms,min_clearance_m";
pub const SUMMARY_HEADER: &str =
    "dataset,planner,trials,success_rate,travel_mean_s,travel_std_s,plan_mean_ms,plan_std_ms,peds_mean,peds_std";
pub const SWEEP_HEADER: &str = "range_m,trials,success_rate,travel_mean_s,plan_mean_ms,peds_mean";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Debug)]
pub struct TrialRow {
    pub dataset: String,
    pub planner: PlannerKind,
    pub trial_id: usize,
    pub start_offset: f64,
    pub result: TrialResult,
}

/// Seed of one (trial, planner) run, independent of scheduling.
pub fn trial_seed(seed: u64, trial: usize, planner: PlannerKind) -> u64 {
    let mut z = seed ^ ((trial as u64) << 2 | planner as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every planner on every scenario with `jobs` worker threads. Rows
/// come back grouped by planner, then in scenario order.
pub fn run_trials(
    dataset: &str,
    scenarios: &[Scenario],
    planners: &[PlannerKind],
    cfg: &SimConfig,
    seed: u64,
    jobs: usize,
) -> Result<Vec<TrialRow>, BenchError> {
    let work: Vec<(PlannerKind, usize)> =
        planners.iter().flat_map(|&p| (0..scenarios.len()).map(move |i| (p, i))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let results: Result<Vec<TrialRow>, SimError> = pool.install(|| {
        work.par_iter()
            .map(|&(planner, i)| {
                let s = &scenarios[i];
                Ok(TrialRow {
                    dataset: dataset.to_string(),
                    planner,
                    trial_id: i,
                    start_offset: s.start_offset(),
                    result: run_trial(s, planner, cfg, trial_seed(seed, i, planner))?,
                })
            })
            .collect()
    });
    Ok(results?)
}

pub fn trial_csv(rows: &[TrialRow]) -> String {
    let mut out = format!("{TRIAL_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            r.dataset,
            r.planner.name(),
            r.trial_id,
            r.start_offset,
            r.result.outcome.name(),
            r.result.travel_time,
            r.result.mean_plan_time() * 1e3,
            r.result.max_plan_time() * 1e3,
            r.result.min_clearance,
        )
        .unwrap();
    }
    out
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub planner: PlannerKind,
    pub trials: usize,
    pub success_rate: f64,
    pub travel: (f64, f64),
    /// Per-trial mean planning time, milliseconds.
    pub plan_ms: (f64, f64),
    pub peds: (f64, f64),
}

/// One summary row per (dataset, planner) in first-appearance order. Travel
/// time includes failed trials.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, PlannerKind)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(d, p)| *d == r.dataset && *p == r.planner) {
            keys.push((r.dataset.clone(), r.planner));
        }
    }
    keys.into_iter()
        .map(|(dataset, planner)| {
            let group: Vec<&TrialRow> = rows.iter().filter(|r| r.dataset == dataset && r.planner == planner).collect();
            let col = |f: &dyn Fn(&TrialResult) -> f64| group.iter().map(|r| f(&r.result)).collect::<Vec<_>>();
            let successes = group.iter().filter(|r| r.result.outcome == Outcome::Success).count();
            SummaryRow {
                trials: group.len(),
                success_rate: successes as f64 / group.len() as f64,
                travel: mean_std(&col(&|t| t.travel_time)),
                plan_ms: mean_std(&col(&|t| t.mean_plan_time() * 1e3)),
                peds: mean_std(&col(&|t| t.visible_mean)),
                dataset,
                planner,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.dataset,
            r.planner.name(),
            r.trials,
            r.success_rate,
            r.travel.0,
            r.travel.1,
            r.plan_ms.0,
            r.plan_ms.1,
            r.peds.0,
            r.peds.1
        )
        .unwrap();
    }
    out
}

/// Trial layout of the bundled dense synthetic benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseFixture {
    pub crowd: SyntheticConfig,
    pub trials: usize,
    pub warmup: f64,
    pub interval: f64,
}

impl DenseFixture {
    pub fn new(seed: u64) -> Self {
        DenseFixture { crowd: SyntheticConfig::dense(seed), trials: 100, warmup: 20.0, interval: 1.0 }
    }

    pub fn scenarios(&self, sensing_range: Option<f64>) -> Vec<Scenario> {
        let ds = Arc::new(synth_crowd(&self.crowd));
        synthetic_trials(&ds, self.trials, self.warmup, self.interval, sensing_range)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub range: Option<f64>,
    pub trials: usize,
    pub success_rate: f64,
    pub travel_mean: f64,
    pub plan_mean_ms: f64,
    pub peds_mean: f64,
}

/// Runs dynamic channels on the synthetic crowd once per sensing range.
pub fn sweep_range(
    fixture: &DenseFixture,
    ranges: &[Option<f64>],
    cfg: &SimConfig,
    seed: u64,
    jobs: usize,
) -> Result<Vec<SweepRow>, BenchError> {
    let ds = Arc::new(synth_crowd(&fixture.crowd));
    ranges
        .iter()
        .map(|&range| {
            let scenarios = synthetic_trials(&ds, fixture.trials, fixture.warmup, fixture.interval, range);
            let rows = run_trials("synthetic", &scenarios, &[PlannerKind::DynamicChannels], cfg, seed, jobs)?;
            let s = &summarize(&rows)[0];
            Ok(SweepRow {
                range,
                trials: s.trials,
                success_rate: s.success_rate,
                travel_mean: s.travel.0,
                plan_mean_ms: s.plan_ms.0,
                peds_mean: s.peds.0,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let range = r.range.map_or_else(|| "inf".to_string(), |x| format!("{x:.6}"));
        writeln!(
            out,
            "{range},{},{:.6},{:.6},{:.6},{:.6}",
            r.trials, r.success_rate, r.travel_mean, r.plan_mean_ms, r.peds_mean
        )
        .unwrap();
    }
    out
}

/// Default sensing ranges: 1..10 m in 1 m steps, 15..30 m in 5 m steps,
/// then unlimited.
pub fn default_ranges() -> Vec<Option<f64>> {
    (1..=10).chain((15..=30).step_by(5)).map(|r| Some(r as f64)).chain([None]).collect()
}
