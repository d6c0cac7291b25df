//! Per-run traces.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `f(x) - f(x*)` from the noise-free objective.
    Gap,
    /// Noise-free objective value when the optimum is unknown.
    Objective,
    /// Running best median of noisy function values.
    NoisyValue,
    CumRegret,
    Arm,
    IsOptimal,
    /// Probability the current strategy assigns to the optimal arm.
    OptProb,
    NoisyRegret,
    RewardRatio,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Gap,
        Metric::Objective,
        Metric::NoisyValue,
        Metric::CumRegret,
        Metric::Arm,
        Metric::IsOptimal,
        Metric::OptProb,
        Metric::NoisyRegret,
        Metric::RewardRatio,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Gap => "gap",
            Metric::Objective => "objective",
            Metric::NoisyValue => "noisy_value",
            Metric::CumRegret => "cum_regret",
            Metric::Arm => "arm",
            Metric::IsOptimal => "is_optimal",
            Metric::OptProb => "opt_prob",
            Metric::NoisyRegret => "noisy_regret",
            Metric::RewardRatio => "reward_ratio",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub oracle_calls: u64,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<TraceRow>,
    pub final_point: Vec<f64>,
    pub iterations: u64,
    pub oracle_calls: u64,
    /// Output point of every restart stage, starting with the initial point.
    pub stage_points: Vec<Vec<f64>>,
    /// Largest distance of any iterate to the known optimum.
    pub max_distance: Option<f64>,
    pub counters: BTreeMap<String, u64>,
    /// Every step of a bandit run.
    pub arm_log: Vec<ArmRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub t: u64,
    pub cum_regret: f64,
    pub arm: usize,
    pub is_optimal: bool,
}

impl RunRecord {
    pub fn push(&mut self, step: u64, oracle_calls: u64, metric: Metric, value: f64) {
        self.rows.push(TraceRow {
            step,
            oracle_calls,
            metric,
            value,
        });
    }

    pub fn series(&self, metric: Metric) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn last(&self, metric: Metric) -> Option<f64> {
        self.series(metric).last().map(|r| r.value)
    }

    pub fn bump(&mut self, counter: &str, by: u64) {
        *self.counters.entry(counter.to_string()).or_insert(0) += by;
    }
}
