//! Multi-seed strategy comparison.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exploration::{StrategyConfig, StrategyKind};
use crate::grid::LayerSpec;

use super::metrics::kv_mse_correlation;
use super::run::{run_exploration, RunOptions, RunRecord};
use super::surrogate::SurrogateField;

/// Headline numbers of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub kind: StrategyKind,
    pub budget: usize,
    pub seed: u64,
    pub rmse: f64,
    pub path_m: f64,
    pub kv: f64,
    /// `None` when the correlation is undefined for this run.
    pub correlation: Option<f64>,
}

impl RunSummary {
    pub fn of(record: &RunRecord) -> Self {
        Self {
            kind: record.strategy.kind,
            budget: record.strategy.budget,
            seed: record.strategy.seed,
            rmse: record.final_rmse(),
            path_m: record.path_length(),
            kv: record.final_kv(),
            correlation: kv_mse_correlation(record).ok(),
        }
    }
}

/// Means over seeds for one strategy at one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub kind: StrategyKind,
    pub budget: usize,
    pub runs: usize,
    pub mean_rmse: f64,
    pub mean_path_m: f64,
    pub mean_kv: f64,
    /// Mean over the runs whose correlation is defined.
    pub mean_correlation: Option<f64>,
}

/// Runs every strategy at every budget once per seed. Each strategy's
/// `budget` and `seed` are replaced by the sweep values; the rest of its
/// config is kept. Runs execute in parallel; output order is strategy,
/// then budget, independent of scheduling.
pub fn run_grid(
    strategies: &[StrategyConfig],
    budgets: &[usize],
    seeds: &[u64],
    field: &SurrogateField,
    spec: &LayerSpec,
    options: &RunOptions,
) -> Result<Vec<RunSummary>> {
    if strategies.is_empty() || budgets.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("need at least one strategy, budget and seed"));
    }
    let jobs: Vec<StrategyConfig> = strategies
        .iter()
        .flat_map(|s| {
            budgets.iter().flat_map(move |&budget| {
                seeds.iter().map(move |&seed| StrategyConfig { budget, seed, ..*s })
            })
        })
        .collect();
    jobs.par_iter()
        .map(|cfg| run_exploration(cfg, field, spec, options).map(|r| RunSummary::of(&r)))
        .collect()
}

/// Averages per-run summaries into one row per (strategy, budget), in
/// first-appearance order.
pub fn summarize(runs: &[RunSummary]) -> Vec<ComparisonRow> {
    let mut keys: Vec<(StrategyKind, usize)> = Vec::new();
    for r in runs {
        if !keys.contains(&(r.kind, r.budget)) {
            keys.push((r.kind, r.budget));
        }
    }
    keys.into_iter()
        .map(|(kind, budget)| {
            let group: Vec<&RunSummary> = runs.iter().filter(|r| r.kind == kind && r.budget == budget).collect();
            let n = group.len() as f64;
            let mean = |f: fn(&RunSummary) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            let corr: Vec<f64> = group.iter().filter_map(|r| r.correlation).collect();
            ComparisonRow {
                kind,
                budget,
                runs: group.len(),
                mean_rmse: mean(|r| r.rmse),
                mean_path_m: mean(|r| r.path_m),
                mean_kv: mean(|r| r.kv),
                mean_correlation: (!corr.is_empty()).then(|| corr.iter().sum::<f64>() / corr.len() as f64),
            }
        })
        .collect()
}

pub fn compare_strategies(
    strategies: &[StrategyConfig],
    budgets: &[usize],
    seeds: &[u64],
    field: &SurrogateField,
    spec: &LayerSpec,
    options: &RunOptions,
) -> Result<Vec<ComparisonRow>> {
    Ok(summarize(&run_grid(strategies, budgets, seeds, field, spec, options)?))
}
