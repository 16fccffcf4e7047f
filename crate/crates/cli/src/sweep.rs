use std::io::Write;
use std::path::{Path, PathBuf};

use byzcount::adversary::StrategySpec;
use byzcount::engine::{run_trial, Algorithm, ExperimentConfig, ExperimentResult};
use byzcount::rng::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::Aggregate;
use crate::{check_invariants, create, read_json, write_config_comment, Failure};

fn default_d() -> Vec<usize> {
    vec![8]
}
fn default_delta() -> Vec<Option<f64>> {
    vec![None]
}
fn default_epsilon() -> Vec<f64> {
    vec![0.1]
}
fn default_strategy() -> Vec<StrategySpec> {
    vec![StrategySpec::HonestMimic]
}
fn default_trials() -> u32 {
    1
}
fn default_max_cells() -> usize {
    256
}

/// A grid of experiment configs. Every list defaults to a single value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n: Vec<usize>,
    #[serde(default = "default_d")]
    pub d: Vec<usize>,
    #[serde(default = "default_delta")]
    pub delta: Vec<Option<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_strategy")]
    pub strategy: Vec<StrategySpec>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub phase_cap: Option<u32>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
}

impl SweepSpec {
    pub fn cell_count(&self) -> usize {
        self.n.len() * self.d.len() * self.delta.len() * self.epsilon.len() * self.strategy.len()
    }

    /// Cells in row-major order over (n, d, delta, epsilon, strategy).
    pub fn cells(&self) -> Result<Vec<ExperimentConfig>, Failure> {
        let count = self.cell_count();
        if count == 0 {
            return Err(Failure::Config("sweep: every list needs at least one value".into()));
        }
        if count > self.max_cells {
            return Err(Failure::Config(format!(
                "sweep: {count} cells exceed max_cells = {}",
                self.max_cells
            )));
        }
        let mut cells = Vec::with_capacity(count);
        for &n in &self.n {
            for &d in &self.d {
                for &delta in &self.delta {
                    for &epsilon in &self.epsilon {
                        for strategy in &self.strategy {
                            let mut c = ExperimentConfig::new(n, d, derive_seed(self.seed, cells.len() as u64));
                            c.delta = delta;
                            c.epsilon = epsilon;
                            c.strategy = strategy.clone();
                            c.trials = self.trials;
                            c.algorithm = self.algorithm;
                            c.phase_cap = self.phase_cap;
                            cells.push(c);
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Serialize)]
struct Row {
    cell: usize,
    n: usize,
    d: usize,
    delta: Option<f64>,
    epsilon: f64,
    strategy: String,
    seed: u64,
    trials: u32,
    status: String,
    trials_ok: usize,
    all_decided: usize,
    estimate_q1: Option<f64>,
    estimate_median: Option<f64>,
    estimate_q3: Option<f64>,
    success_mean: Option<f64>,
    byz_safe_success_mean: Option<f64>,
    rounds_mean: Option<f64>,
    messages_mean: Option<f64>,
    crashed_honest_mean: Option<f64>,
}

enum CellError {
    Config(String),
    Invariant(String),
}

fn run_cell(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, CellError> {
    cfg.validate().map_err(|e| CellError::Config(e.to_string()))?;
    let results: Vec<ExperimentResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t).map_err(|e| CellError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    for r in &results {
        check_invariants(r).map_err(|e| CellError::Invariant(e.to_string()))?;
    }
    Ok(results)
}

/// The aggregate row for a single config, shared with `run`.
pub fn aggregate_row(
    cell: usize,
    cfg: &ExperimentConfig,
    results: &[ExperimentResult],
    status: String,
) -> impl Serialize {
    let a = Aggregate::of(results);
    Row {
        cell,
        n: cfg.n,
        d: cfg.d,
        delta: cfg.delta,
        epsilon: cfg.epsilon,
        strategy: cfg.strategy.label(),
        seed: cfg.seed,
        trials: cfg.trials,
        status,
        trials_ok: a.trials_ok,
        all_decided: a.all_decided,
        estimate_q1: a.estimate_q1,
        estimate_median: a.estimate_median,
        estimate_q3: a.estimate_q3,
        success_mean: a.success_mean,
        byz_safe_success_mean: a.byz_safe_success_mean,
        rounds_mean: a.rounds_mean,
        messages_mean: a.messages_mean,
        crashed_honest_mean: a.crashed_honest_mean,
    }
}

pub fn cmd_sweep(
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    trials: Option<u32>,
    dry_run: bool,
) -> Result<(), Failure> {
    let mut spec: SweepSpec = read_json(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    let cells = spec.cells()?;
    if dry_run {
        let doc = serde_json::json!({ "sweep": spec, "cells": cells });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).map_err(|e| Failure::Internal(e.to_string()))?
        );
        return Ok(());
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| spec.out.clone())
        .unwrap_or_else(|| PathBuf::from(crate::DEFAULT_OUT));
    let path = dir.join("sweep.csv");
    let mut w = create(&path)?;
    write_config_comment(&mut w, &spec)?;
    let mut table = csv::Writer::from_writer(&mut w);
    let mut violation = None;
    for (i, cfg) in cells.iter().enumerate() {
        let (results, status) = match run_cell(cfg) {
            Ok(r) => (r, "ok".to_string()),
            Err(CellError::Config(m)) => (Vec::new(), format!("failed: {m}")),
            Err(CellError::Invariant(m)) => {
                violation.get_or_insert_with(|| m.clone());
                (Vec::new(), format!("failed: {m}"))
            }
        };
        eprintln!("cell {i}: n={} d={} {} -> {status}", cfg.n, cfg.d, cfg.strategy.label());
        table.serialize(aggregate_row(i, cfg, &results, status))?;
    }
    table.flush().map_err(|e| Failure::Io(e.to_string()))?;
    drop(table);
    w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    match violation {
        Some(m) => Err(Failure::Internal(m)),
        None => Ok(()),
    }
}
