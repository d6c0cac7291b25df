//! Seeded multi-run execution and file output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use medclip::bandit::{run_bandit, run_full_feedback, Feedback};
use medclip::solvers::{run_restarted, run_sgd_baseline, run_smd, run_sstm, Optimum, ZoProblem};
use medclip::{Metric, RunRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{fmt_f64, write_aggregates, RunSeries, ARMS_HEADER, RUN_HEADER};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::resolve::{resolve_schedule, Plan, Provenance, Resolution};

pub fn run_seed(base: u64, run_id: usize) -> u64 {
    base.wrapping_add(run_id as u64)
}

/// Executes one run of a resolved plan with its own generator.
pub fn run_single(resolution: &Resolution, seed: u64) -> medclip::Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Plan::Bandit {
        environment,
        schedule,
    } = &resolution.plan
    {
        return match environment.feedback {
            Feedback::Bandit => run_bandit(environment, schedule, &mut rng),
            Feedback::Full => run_full_feedback(environment, schedule, &mut rng),
        };
    }
    let inst = resolution
        .instance
        .as_ref()
        .expect("optimisation plans carry their problem instance");
    let oracle = inst.oracle().map_err(|e| match e {
        HarnessError::Solver(e) => e,
        other => medclip::Error::Unsupported(other.to_string()),
    })?;
    let problem = ZoProblem::new(oracle, inst.x0.clone()).with_optimum(Optimum {
        point: Some(inst.objective.optimum().to_vec()),
        value: inst.objective.optimal_value(),
    });
    match &resolution.plan {
        Plan::Sstm(s) => run_sstm(&problem, s, &mut rng),
        Plan::Smd(s) => run_smd(&problem, s, &mut rng),
        Plan::Sgd(p) => run_sgd_baseline(&problem, p, &mut rng),
        Plan::Restarted(s) => run_restarted(&problem, s, &mut rng),
        Plan::Bandit { .. } => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStatus {
    pub run_id: usize,
    pub seed: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub iterations: u64,
    pub oracle_calls: u64,
    /// Last traced gap (optimisation) or cumulative regret (bandits).
    pub final_value: Option<f64>,
    pub counters: BTreeMap<String, u64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub out: PathBuf,
    pub runs: Vec<RunStatus>,
    pub failed: usize,
    pub metrics: Vec<Metric>,
}

impl ExperimentSummary {
    /// Median of the per-run final values over successful runs.
    pub fn median_final(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.runs.iter().filter_map(|r| r.final_value).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    plan: &'a Plan,
    provenance: &'a Provenance,
    wall_time_secs: f64,
    failed: usize,
    runs: &'a [RunStatus],
}

fn final_value(rec: &RunRecord) -> Option<f64> {
    [Metric::Gap, Metric::CumRegret, Metric::Objective, Metric::NoisyValue]
        .into_iter()
        .find_map(|m| rec.last(m))
}

/// Runs every seed, in parallel when allowed, returning outcomes in run order.
pub fn execute_runs(
    resolution: &Resolution,
    base_seed: u64,
    runs: usize,
    workers: usize,
) -> Result<Vec<medclip::Result<RunRecord>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|id| run_single(resolution, run_seed(base_seed, id)))
            .collect()
    }))
}

fn write_run(path: &Path, run_id: usize, rec: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RUN_HEADER)?;
    let id = run_id.to_string();
    for r in &rec.rows {
        w.write_record([
            id.as_str(),
            &r.step.to_string(),
            &r.oracle_calls.to_string(),
            r.metric.as_str(),
            &fmt_f64(r.value),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn write_arms(path: &Path, run_id: usize, rec: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ARMS_HEADER)?;
    let id = run_id.to_string();
    for a in &rec.arm_log {
        w.write_record([
            id.as_str(),
            &a.t.to_string(),
            &fmt_f64(a.cum_regret),
            &a.arm.to_string(),
            if a.is_optimal { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn run_file(out: &Path, run_id: usize) -> PathBuf {
    out.join(format!("run_{run_id:03}.csv"))
}

pub fn arms_file(out: &Path, run_id: usize) -> PathBuf {
    out.join(format!("run_{run_id:03}_arms.csv"))
}

/// Resolves, runs and writes per-run CSVs, aggregates and `metadata.json`.
/// Failed runs are recorded and skipped; the call fails only if every run
/// failed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let started = Instant::now();
    let resolution = resolve_schedule(config)?;
    let exp = &config.experiment;
    let outcomes = execute_runs(&resolution, exp.seed, config.runs(), exp.workers)?;
    let out = exp.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;

    let mut statuses = Vec::with_capacity(outcomes.len());
    let mut series = Vec::new();
    for (id, outcome) in outcomes.iter().enumerate() {
        let seed = run_seed(exp.seed, id);
        match outcome {
            Ok(rec) => {
                write_run(&run_file(&out, id), id, rec)?;
                if !rec.arm_log.is_empty() {
                    write_arms(&arms_file(&out, id), id, rec)?;
                }
                let mut s = RunSeries::new();
                for r in &rec.rows {
                    s.entry(r.metric).or_default().push((r.oracle_calls, r.value));
                }
                series.push(s);
                statuses.push(RunStatus {
                    run_id: id,
                    seed,
                    ok: true,
                    error: None,
                    iterations: rec.iterations,
                    oracle_calls: rec.oracle_calls,
                    final_value: final_value(rec),
                    counters: rec.counters.clone(),
                });
            }
            Err(e) => statuses.push(RunStatus {
                run_id: id,
                seed,
                ok: false,
                error: Some(e.to_string()),
                iterations: 0,
                oracle_calls: 0,
                final_value: None,
                counters: BTreeMap::new(),
            }),
        }
    }
    let metrics = write_aggregates(&out, &series)?;
    let failed = statuses.iter().filter(|s| !s.ok).count();
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        config,
        plan: &resolution.plan,
        provenance: &resolution.provenance,
        wall_time_secs: started.elapsed().as_secs_f64(),
        failed,
        runs: &statuses,
    };
    let meta_path = out.join("metadata.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .map_err(|e| HarnessError::io(&meta_path, e))?;

    if failed == statuses.len() {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(HarnessError::AllRunsFailed {
            runs: failed,
            first,
        });
    }
    Ok(ExperimentSummary {
        out,
        runs: statuses,
        failed,
        metrics,
    })
}
