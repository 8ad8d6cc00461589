//! The exploration loop: move, sample, rebuild the model, score it.

use std::collections::{HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exploration::{
    adapt_plan_greedy, adapt_plan_mc, coverage, next_greedy, next_monte_carlo, InitialPlanKind, Plan, StrategyConfig,
    StrategyKind,
};
use crate::grid::{layer_points, CellIndex, FieldGrid, GridValues, LayerSpec, Location, Sample};
use crate::kriging::{krige_layer, LayerMap, LayeredModel};
use crate::variogram::{default_binning, experimental_semivariogram, fit_linear, is_admissible, VariogramParams};

use super::metrics::{mse, squared_errors};
use super::surrogate::SurrogateField;

/// Fewest samples a variogram is fitted from; below this the prior is used.
pub const MIN_FIT_SAMPLES: usize = 3;

const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Where the robot starts.
    pub start: Location,
    /// Standard deviation of the simulated measurement noise (kPa).
    pub noise_sd: f64,
    /// Variogram used before enough samples exist, when frozen, and
    /// whenever a fit carries no spatial structure.
    pub prior: VariogramParams,
    /// Keep `prior` for the whole run instead of refitting.
    pub freeze: bool,
    pub bin_width: f64,
    pub max_lag: f64,
    /// Store the mean-KV grid of every step in the record.
    pub keep_kv_grids: bool,
}

impl RunOptions {
    /// Defaults for `grid`: start at the top-left corner, no noise, bins of
    /// one cell up to half the field diagonal.
    pub fn new(grid: &FieldGrid, prior: VariogramParams) -> Self {
        let (bin_width, max_lag) = default_binning(grid);
        let o = grid.origin();
        Self {
            start: Location::new(o.x, o.y + grid.height()),
            noise_sd: 0.0,
            prior,
            freeze: false,
            bin_width,
            max_lag,
            keep_kv_grids: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if !(self.prior.total_sill() > 0.0) {
            return Err(Error::invalid("prior variogram needs a positive total sill"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::invalid("noise sd must be >= 0"));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0 && self.max_lag.is_finite() && self.max_lag > 0.0) {
            return Err(Error::invalid("bin width and max lag must be positive"));
        }
        if !self.start.is_finite() {
            return Err(Error::invalid("start location must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: usize,
    pub cell: CellIndex,
    pub sample: Sample,
    /// Distance travelled so far (m).
    pub path_m: f64,
    pub mse: f64,
    pub rmse: f64,
    /// Mean kriging variance over cells and layers after this step.
    pub kv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: StrategyConfig,
    pub start: Location,
    pub steps: Vec<StepRecord>,
    /// Per step, the mean-over-layers KV of every reachable cell.
    pub kv_vectors: Vec<Vec<f64>>,
    /// Per step, the mean-over-layers squared error of every reachable cell.
    pub sq_error_vectors: Vec<Vec<f64>>,
    /// Variograms used for the final model.
    pub final_params: Vec<VariogramParams>,
    pub final_model: LayeredModel,
    /// Mean-KV grid after each step, when requested.
    pub kv_grids: Vec<GridValues>,
    /// Layer models rebuilt with [`unbounded`] params because the chosen
    /// variogram gave an invalid kriging system, summed over steps.
    pub rebuilt_layers: usize,
}

impl RunRecord {
    /// Visited cells in order.
    pub fn route(&self) -> Vec<CellIndex> {
        self.steps.iter().map(|s| s.cell).collect()
    }

    /// Visited cells up to and including step `step` (1-based).
    pub fn route_so_far(&self, step: usize) -> Vec<CellIndex> {
        self.steps.iter().take(step).map(|s| s.cell).collect()
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.steps.iter().map(|s| s.sample.clone()).collect()
    }

    pub fn path_length(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.path_m)
    }

    pub fn final_rmse(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.rmse)
    }

    pub fn final_kv(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.kv)
    }
}

/// Variogram of each layer for the current samples.
pub fn layer_params(samples: &[Sample], spec: &LayerSpec, options: &RunOptions) -> Result<Vec<VariogramParams>> {
    if options.freeze || samples.len() < MIN_FIT_SAMPLES {
        return Ok(vec![options.prior; spec.count]);
    }
    (0..spec.count)
        .map(|k| {
            let points = layer_points(samples, k)?;
            let fit = experimental_semivariogram(&points, options.bin_width, options.max_lag).and_then(|ev| fit_linear(&ev));
            Ok(match fit {
                Ok(f) if !f.degenerate && f.params.sill > 0.0 => f.params,
                _ => options.prior,
            })
        })
        .collect()
}

/// Same nugget and slope, with the range stretched to `span`. When `span`
/// covers every pairwise distance the model never reaches its sill, which
/// makes it the (always valid) linear power variogram plus nugget.
pub fn unbounded(params: &VariogramParams, span: f64) -> VariogramParams {
    if params.range >= span {
        return *params;
    }
    VariogramParams {
        nugget: params.nugget,
        range: span,
        sill: params.sill * span / params.range,
    }
}

/// Kriged model for the current samples.
///
/// The bounded linear variogram is not conditionally negative definite in
/// two dimensions, so some parameter sets turn the kriging system into a
/// near-singular one with huge weights, or give clearly negative variances.
/// A layer whose variogram is not admissible on its samples, or whose
/// kriging fails that way, is built with [`unbounded`] params spanning the
/// field diagonal instead. Returns the model, the variograms actually used,
/// and how many layers were switched.
pub fn build_run_model(
    samples: &[Sample],
    grid: &FieldGrid,
    spec: &LayerSpec,
    options: &RunOptions,
) -> Result<(LayeredModel, Vec<VariogramParams>, usize)> {
    let span = grid.width().hypot(grid.height());
    let ids: Vec<u64> = samples.iter().map(|s| s.id).collect();
    let locations: Vec<Location> = samples.iter().map(|s| s.location).collect();
    let mut used = Vec::with_capacity(spec.count);
    let mut layers = Vec::with_capacity(spec.count);
    let mut rebuilt = 0;
    for (k, params) in layer_params(samples, spec, options)?.into_iter().enumerate() {
        let points = layer_points(samples, k)?;
        let attempt = if is_admissible(&params, &locations) {
            krige_layer(&points, &params, grid)
        } else {
            Err(Error::SingularMatrix)
        };
        let map = match attempt {
            Err(e) if params.range < span && matches!(e.root(), Error::NegativeVariance(_) | Error::SingularMatrix) => {
                rebuilt += 1;
                let wide = unbounded(&params, span);
                used.push(wide);
                krige_layer(&points, &wide, grid)?
            }
            other => {
                used.push(params);
                other?
            }
        };
        layers.push(LayerMap {
            sample_ids: ids.clone(),
            ..map
        });
    }
    Ok((LayeredModel::from_layers(layers, grid)?, used, rebuilt))
}

enum Planner {
    Fixed(VecDeque<CellIndex>),
    Nbv,
    Adaptive(Plan),
}

/// Initial (or refill) plan of an adaptive strategy.
fn coverage_plan(
    strategy: &StrategyConfig,
    grid: &FieldGrid,
    n: usize,
    origin: Location,
    visited: &HashSet<CellIndex>,
    rng: &mut ChaCha8Rng,
) -> Result<Plan> {
    match strategy.initial_plan {
        InitialPlanKind::Random => coverage::plan_random_excluding(grid, n, origin, visited, rng),
        InitialPlanKind::AreaSplit => coverage::plan_area_split_excluding(grid, n, origin, visited),
    }
}

/// Runs one strategy against the surrogate until the budget is spent or the
/// strategy has nothing left to visit. `strategy.seed` drives both the
/// strategy's own draws and the measurement noise (on separate streams).
pub fn run_exploration(
    strategy: &StrategyConfig,
    field: &SurrogateField,
    spec: &LayerSpec,
    options: &RunOptions,
) -> Result<RunRecord> {
    strategy.validate()?;
    options.validate()?;
    field.check_spec(spec)?;
    let grid = field.grid();
    if strategy.budget < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!("budget must be at least {MIN_FIT_SAMPLES}")));
    }
    if strategy.budget > grid.reachable_count() {
        return Err(Error::invalid(format!(
            "budget {} exceeds the {} reachable cells",
            strategy.budget,
            grid.reachable_count()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(strategy.seed ^ NOISE_STREAM);
    let budget = strategy.budget;
    let kind = strategy.kind;

    let mut planner = match kind {
        StrategyKind::Random => Planner::Fixed(coverage::plan_random(grid, budget, options.start, &mut rng)?.route.into()),
        StrategyKind::WShape => Planner::Fixed(coverage::plan_w_shape(grid, budget, options.start)?.route.into()),
        StrategyKind::AreaSplit => Planner::Fixed(coverage::plan_area_split(grid, budget, options.start)?.route.into()),
        StrategyKind::Greedy | StrategyKind::MonteCarlo => Planner::Nbv,
        StrategyKind::AdaptiveGreedy | StrategyKind::AdaptiveMc => {
            Planner::Adaptive(coverage_plan(strategy, grid, budget, options.start, &HashSet::new(), &mut rng)?)
        }
    };

    // before the first sample every cell is equally uncertain
    let mut kv_grid = grid.scatter(&vec![1.0; grid.reachable_count()]);
    let mut visited: HashSet<CellIndex> = HashSet::new();
    let mut samples: Vec<Sample> = Vec::with_capacity(budget);
    let mut pos = options.start;
    let mut path = 0.0;

    let mut steps = Vec::with_capacity(budget);
    let mut kv_vectors = Vec::with_capacity(budget);
    let mut sq_error_vectors = Vec::with_capacity(budget);
    let mut kv_grids = Vec::new();
    let mut last: Option<(LayeredModel, Vec<VariogramParams>)> = None;
    let mut rebuilt_layers = 0;

    for t in 0..budget {
        let step = t + 1;
        let at_step = |e: Error| Error::AtStep {
            step,
            source: Box::new(e),
        };
        let pick_nbv = |kv: &GridValues, rng: &mut ChaCha8Rng| {
            if kind.uses_monte_carlo() {
                next_monte_carlo(kv, &visited, strategy.candidate_count, rng)
            } else {
                next_greedy(kv, &visited)
            }
        };

        let cell = match &mut planner {
            Planner::Fixed(queue) => match queue.pop_front() {
                Some(c) => c,
                None => break,
            },
            Planner::Nbv => pick_nbv(&kv_grid, &mut rng).map_err(at_step)?,
            Planner::Adaptive(plan) => {
                if plan.is_empty() {
                    // pruning emptied the plan early: lay out a fresh one
                    // over the unvisited cells for the remaining budget
                    *plan = coverage_plan(strategy, grid, budget - t, pos, &visited, &mut rng).map_err(at_step)?;
                }
                plan.route.remove(0)
            }
        };
        debug_assert!(!visited.contains(&cell), "cell {cell} visited twice");

        let sample = field
            .sample_at(cell, step as u64, options.noise_sd, &mut noise_rng)
            .map_err(at_step)?;
        let center = grid.cell_center(cell);
        path += pos.distance(&center);
        pos = center;
        visited.insert(cell);
        samples.push(sample.clone());

        let (model, params, fallbacks) = build_run_model(&samples, grid, spec, options).map_err(at_step)?;
        rebuilt_layers += fallbacks;
        let report = mse(&model, field).map_err(at_step)?;
        let sq = squared_errors(&model, field).map_err(at_step)?;
        let m = sq.len() as f64;
        let cell_sq: Vec<f64> = (0..grid.reachable_count())
            .map(|s| sq.iter().map(|layer| layer[s]).sum::<f64>() / m)
            .collect();
        kv_vectors.push(grid.gather(&model.mean_kv_grid).map_err(at_step)?);
        sq_error_vectors.push(cell_sq);
        kv_grid = model.mean_kv_grid.clone();
        if options.keep_kv_grids {
            kv_grids.push(kv_grid.clone());
        }
        steps.push(StepRecord {
            step,
            cell,
            sample,
            path_m: path,
            mse: report.mse,
            rmse: report.rmse,
            kv: model.mean_kv,
        });

        if let Planner::Adaptive(plan) = &mut planner {
            if !plan.is_empty() && step < budget {
                plan.origin = pos;
                *plan = match kind {
                    StrategyKind::AdaptiveMc => {
                        adapt_plan_mc(plan, &kv_grid, &visited, grid, strategy.candidate_count, &mut rng)
                    }
                    _ => adapt_plan_greedy(plan, &kv_grid, &visited, grid),
                }
                .map_err(at_step)?;
            }
        }
        last = Some((model, params));
    }

    let (final_model, final_params) = last.ok_or_else(|| Error::invalid("strategy produced no targets"))?;
    Ok(RunRecord {
        strategy: *strategy,
        start: options.start,
        steps,
        kv_vectors,
        sq_error_vectors,
        final_params,
        final_model,
        kv_grids,
        rebuilt_layers,
    })
}
