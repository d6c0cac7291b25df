//! Cartesian grid search over schedule overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::aggregate::fmt_f64;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::runner::run_experiment;

pub const GRID_KEYS: [&str; 10] = [
    "a",
    "b",
    "beta",
    "eps",
    "lambda",
    "m",
    "momentum",
    "nu",
    "smoothness",
    "tau",
];

/// `[grid]` table mapping schedule keys to candidate values.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub grid: BTreeMap<String, Vec<f64>>,
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: GridSpec = toml::from_str(text).map_err(|source| HarnessError::Parse {
            path: "grid spec".into(),
            source,
        })?;
        for (k, v) in &spec.grid {
            if !GRID_KEYS.contains(&k.as_str()) {
                return Err(HarnessError::Config(format!(
                    "unknown grid key {k:?}; expected one of {GRID_KEYS:?}"
                )));
            }
            if v.is_empty() {
                return Err(HarnessError::Config(format!("grid key {k:?} has no values")));
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// All cells, the last key varying fastest.
    pub fn cells(&self) -> Vec<BTreeMap<String, f64>> {
        let mut cells = vec![BTreeMap::new()];
        for (k, vals) in &self.grid {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    vals.iter().map(move |v| {
                        let mut c = c.clone();
                        c.insert(k.clone(), *v);
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(HarnessError::Config(format!("grid value {v} for {key} is not a count")))
    }
}

pub fn apply_cell(config: &mut ExperimentConfig, cell: &BTreeMap<String, f64>) -> Result<()> {
    let s = &mut config.schedule;
    for (k, &v) in cell {
        match k.as_str() {
            "a" => s.a = Some(v),
            "b" => s.b = Some(as_count(k, v)?),
            "beta" => s.beta = Some(v),
            "eps" => s.eps = Some(v),
            "lambda" => s.lambda = Some(v),
            "m" => s.m = Some(as_count(k, v)?),
            "momentum" => s.momentum = Some(v),
            "nu" => s.nu = Some(v),
            "smoothness" => s.smoothness = Some(v),
            "tau" => s.tau = Some(v),
            other => return Err(HarnessError::Config(format!("unknown grid key {other:?}"))),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub index: usize,
    pub params: BTreeMap<String, f64>,
    pub median_final: Option<f64>,
    pub ok_runs: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub cells: Vec<CellResult>,
    /// Cell with the smallest median final gap or regret.
    pub best: Option<usize>,
    pub path: PathBuf,
}

/// Runs each cell into `<out>/cell_NNN/` and writes `grid_summary.csv`.
pub fn gridsearch(config: &ExperimentConfig, spec: &GridSpec) -> Result<GridSummary> {
    let base = config.experiment.out.clone();
    std::fs::create_dir_all(&base).map_err(|e| HarnessError::io(&base, e))?;
    let mut cells = Vec::new();
    for (index, params) in spec.cells().into_iter().enumerate() {
        let mut c = config.clone();
        c.experiment.out = base.join(format!("cell_{index:03}"));
        let outcome = apply_cell(&mut c, &params).and_then(|_| run_experiment(&c));
        cells.push(match outcome {
            Ok(s) => CellResult {
                index,
                params,
                median_final: s.median_final(),
                ok_runs: s.runs.len() - s.failed,
                error: None,
            },
            Err(e) => CellResult {
                index,
                params,
                median_final: None,
                ok_runs: 0,
                error: Some(e.to_string()),
            },
        });
    }
    let best = cells
        .iter()
        .filter_map(|c| c.median_final.filter(|v| v.is_finite()).map(|v| (c.index, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);

    let path = base.join("grid_summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let keys: Vec<&String> = spec.grid.keys().collect();
    let mut header = vec!["cell".to_string()];
    header.extend(keys.iter().map(|k| k.to_string()));
    header.extend(["median_final", "ok_runs", "best", "error"].map(String::from));
    w.write_record(&header)?;
    for c in &cells {
        let mut row = vec![c.index.to_string()];
        row.extend(keys.iter().map(|k| fmt_f64(c.params[*k])));
        row.push(c.median_final.map(fmt_f64).unwrap_or_default());
        row.push(c.ok_runs.to_string());
        row.push(if Some(c.index) == best { "1" } else { "0" }.into());
        row.push(c.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(GridSummary { cells, best, path })
}
