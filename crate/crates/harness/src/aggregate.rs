//! Cross-run statistics per bucket and the CSV files that carry them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use medclip::Metric;

use crate::error::{HarnessError, Result};

pub const RUN_HEADER: [&str; 5] = ["run_id", "step", "oracle_calls", "metric", "value"];
pub const ARMS_HEADER: [&str; 5] = ["run_id", "t", "cum_regret", "arm", "is_optimal"];
pub const AGGREGATE_HEADER: [&str; 5] = ["bucket", "mean", "std", "p05", "p95"];

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub bucket: u64,
    pub mean: f64,
    /// Spread statistics need at least two runs.
    pub std: Option<f64>,
    pub p05: Option<f64>,
    pub p95: Option<f64>,
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Linear interpolation between order statistics (`p` in `[0, 1]`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Groups `(bucket, value)` pairs from every run; non-finite values are
/// dropped.
pub fn aggregate<'a, I>(series: I) -> Vec<AggregateRow>
where
    I: IntoIterator<Item = &'a [(u64, f64)]>,
{
    let mut by: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for run in series {
        for &(k, v) in run {
            if v.is_finite() {
                by.entry(k).or_default().push(v);
            }
        }
    }
    by.into_iter()
        .map(|(bucket, mut vals)| {
            vals.sort_by(f64::total_cmp);
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let spread = vals.len() >= 2;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            AggregateRow {
                bucket,
                mean,
                std: spread.then(|| var.sqrt()),
                p05: spread.then(|| percentile(&vals, 0.05)),
                p95: spread.then(|| percentile(&vals, 0.95)),
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.bucket.to_string(),
            fmt_f64(r.mean),
            opt(r.std),
            opt(r.p05),
            opt(r.p95),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn aggregate_path(dir: &Path, metric: Metric) -> PathBuf {
    dir.join(format!("aggregate_{}.csv", metric.as_str()))
}

/// Per-metric series of one run keyed by oracle calls.
pub type RunSeries = BTreeMap<Metric, Vec<(u64, f64)>>;

pub fn write_aggregates(dir: &Path, runs: &[RunSeries]) -> Result<Vec<Metric>> {
    let mut metrics: Vec<Metric> = runs.iter().flat_map(|r| r.keys().copied()).collect();
    metrics.sort();
    metrics.dedup();
    for &m in &metrics {
        let rows = aggregate(runs.iter().filter_map(|r| r.get(&m)).map(|v| v.as_slice()));
        write_aggregate(&aggregate_path(dir, m), &rows)?;
    }
    Ok(metrics)
}

fn is_run_file(name: &str) -> bool {
    name.starts_with("run_") && name.ends_with(".csv") && !name.ends_with("_arms.csv")
}

/// Rebuilds the aggregate files of a directory from its per-run CSVs.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<Metric>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(is_run_file))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::Config(format!(
            "no run_*.csv files in {}",
            dir.display()
        )));
    }
    let mut runs = Vec::with_capacity(files.len());
    for f in &files {
        let mut r = csv::Reader::from_path(f)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != RUN_HEADER {
            return Err(HarnessError::Config(format!(
                "{} has header {:?}, expected {:?}",
                f.display(),
                header,
                RUN_HEADER
            )));
        }
        let mut series = RunSeries::new();
        for rec in r.records() {
            let rec = rec?;
            let bad = |what: &str| HarnessError::Config(format!("{}: bad {what} in {:?}", f.display(), rec));
            let calls: u64 = rec[2].parse().map_err(|_| bad("oracle_calls"))?;
            let metric = Metric::parse(&rec[3]).ok_or_else(|| bad("metric"))?;
            let value: f64 = rec[4].parse().map_err(|_| bad("value"))?;
            series.entry(metric).or_default().push((calls, value));
        }
        runs.push(series);
    }
    write_aggregates(dir, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rank bounds any interpolated `p`-percentile must satisfy: at least
    /// `floor(p (n-1)) + 1` values lie at or below it and at least
    /// `n - ceil(p (n-1))` at or above it.
    fn rank_bounds_hold(vals: &[f64], p: f64, x: f64) -> bool {
        let n = vals.len();
        let pos = p * (n - 1) as f64;
        let below = vals.iter().filter(|v| **v <= x).count();
        let above = vals.iter().filter(|v| **v >= x).count();
        below > pos.floor() as usize && above >= n - pos.ceil() as usize
    }

    #[test]
    fn single_run_has_no_spread() {
        let run = vec![(0u64, 1.0), (10, 2.0)];
        let rows = aggregate([run.as_slice()]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].mean, 2.0);
        assert!(rows[1].std.is_none() && rows[1].p05.is_none());
    }

    #[test]
    fn known_percentiles() {
        let runs: Vec<Vec<(u64, f64)>> = (1..=21).map(|v| vec![(5, v as f64)]).collect();
        let rows = aggregate(runs.iter().map(|r| r.as_slice()));
        assert_eq!(rows[0].p05, Some(2.0));
        assert_eq!(rows[0].p95, Some(20.0));
        assert_eq!(rows[0].mean, 11.0);
    }

    #[test]
    fn nan_values_are_excluded() {
        let a = vec![(1u64, f64::NAN)];
        let b = vec![(1u64, 4.0)];
        let rows = aggregate([a.as_slice(), b.as_slice()]);
        assert_eq!(rows[0].mean, 4.0);
    }

    proptest! {
        #[test]
        fn matches_sort_oracle(vals in prop::collection::vec(-1e6f64..1e6, 2..40)) {
            let runs: Vec<Vec<(u64, f64)>> = vals.iter().map(|v| vec![(0, *v)]).collect();
            let row = &aggregate(runs.iter().map(|r| r.as_slice()))[0];
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert!((row.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
            prop_assert!(rank_bounds_hold(&vals, 0.05, row.p05.unwrap()));
            prop_assert!(rank_bounds_hold(&vals, 0.95, row.p95.unwrap()));
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min <= row.p05.unwrap() && row.p05.unwrap() <= row.p95.unwrap() && row.p95.unwrap() <= max);
        }

        #[test]
        fn buckets_are_sorted(keys in prop::collection::vec(0u64..1000, 1..30)) {
            let run: Vec<(u64, f64)> = keys.iter().map(|k| (*k, 1.0)).collect();
            let rows = aggregate([run.as_slice()]);
            prop_assert!(rows.windows(2).all(|w| w[0].bucket < w[1].bucket));
        }
    }
}
