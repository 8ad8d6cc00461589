//! TOML run configuration.
//!
//! ```toml
//! budgets = [15, 20, 30, 50]
//! seeds = [0, 1, 2, 3, 4]
//! noise_sd_kpa = 0.0
//!
//! [field]
//! width_m = 233.0
//! height_m = 100.0
//! cell_size_m = 5.0
//! masked_cells = [[0, 0], [46, 0], [0, 19], [46, 19]]
//!
//! [layers]
//! count = 8
//! thickness_cm = 5.0
//!
//! [variogram]
//! freeze = false
//! prior = { nugget = 0.0, range = 100.0, sill = 2500.0 }
//!
//! [surrogate]
//! mode = "synthetic"
//! seed = 2024
//! params = { nugget = 100.0, range = 100.0, sill = 2500.0 }
//! depth_trend_kpa = [300, 500, 700, 850, 1000, 1100, 1200, 1300]
//!
//! [[strategies]]
//! kind = "adaptive_greedy"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exploration::{InitialPlanKind, StrategyConfig, StrategyKind, DEFAULT_CANDIDATE_COUNT};
use crate::grid::{FieldGrid, GridValues, LayerSpec, Location};
use crate::simulation::{generate_surrogate, CovarianceModel, Provenance, RunOptions, SurrogateField};
use crate::variogram::{default_binning, VariogramParams};

use super::files::{load_grid_csv, load_mask_csv};

pub const DEFAULT_BUDGETS: [usize; 4] = [15, 20, 30, 50];
pub const DEFAULT_SEED_COUNT: u64 = 5;
pub const DEFAULT_CELL_SIZE_M: f64 = 5.0;
pub const DEFAULT_LAYER_COUNT: usize = 8;
pub const DEFAULT_THICKNESS_CM: f64 = 5.0;

/// Variogram used before enough samples exist, unless configured.
pub const DEFAULT_PRIOR: VariogramParams = VariogramParams {
    nugget: 0.0,
    range: 100.0,
    sill: 2500.0,
};

/// Synthetic surrogate variogram, unless configured.
pub const DEFAULT_SURROGATE_PARAMS: VariogramParams = VariogramParams {
    nugget: 100.0,
    range: 100.0,
    sill: 2500.0,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    field: RawField,
    #[serde(default)]
    layers: RawLayers,
    #[serde(default)]
    variogram: RawVariogram,
    #[serde(default)]
    surrogate: RawSurrogate,
    #[serde(default)]
    strategies: Option<Vec<RawStrategy>>,
    #[serde(default)]
    budgets: Option<Vec<i64>>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    noise_sd_kpa: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    width_m: f64,
    height_m: f64,
    cell_size_m: Option<f64>,
    mask_path: Option<PathBuf>,
    masked_cells: Option<Vec<[usize; 2]>>,
    start_x_m: Option<f64>,
    start_y_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayers {
    count: Option<i64>,
    thickness_cm: Option<f64>,
    depth_step_cm: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    nugget: f64,
    range: f64,
    sill: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariogram {
    bin_width_m: Option<f64>,
    max_lag_m: Option<f64>,
    prior: Option<RawParams>,
    #[serde(default)]
    freeze: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMode {
    #[default]
    Synthetic,
    Load,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurrogate {
    #[serde(default)]
    mode: SurrogateMode,
    seed: Option<u64>,
    #[serde(default)]
    covariance: CovarianceModel,
    params: Option<RawParams>,
    layer_params: Option<Vec<RawParams>>,
    depth_trend_kpa: Option<Vec<f64>>,
    path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    kind: StrategyKind,
    candidate_count: Option<i64>,
    initial_plan: Option<InitialPlanKind>,
}

/// How the ground truth is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateSource {
    Synthetic {
        seed: u64,
        covariance: CovarianceModel,
        params: Vec<VariogramParams>,
        depth_trend: Vec<f64>,
    },
    /// Directory holding `truth_0.csv .. truth_{m-1}.csv`.
    Load { dir: PathBuf },
}

/// A validated run configuration with every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: FieldGrid,
    pub layers: LayerSpec,
    /// Spacing of raw penetrometer readings, for `d0..` sample files.
    pub depth_step_cm: Option<f64>,
    pub options: RunOptions,
    pub surrogate: SurrogateSource,
    /// Strategy templates; budget and seed are filled in per run.
    pub strategies: Vec<StrategyConfig>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be a positive number, got {v}")))
    }
}

fn params(field: &str, raw: RawParams) -> Result<VariogramParams> {
    VariogramParams::new(raw.nugget, raw.range, raw.sill).map_err(|e| Error::config(field, e.to_string()))
}

/// Default depth offsets: 300 kPa at the surface, +140 kPa per layer.
pub fn default_depth_trend(count: usize) -> Vec<f64> {
    (0..count).map(|k| 300.0 + 140.0 * k as f64).collect()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

/// Parses and validates config text; relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let f = raw.field;
    let width = positive("field.width_m", f.width_m)?;
    let height = positive("field.height_m", f.height_m)?;
    let cell = positive("field.cell_size_m", f.cell_size_m.unwrap_or(DEFAULT_CELL_SIZE_M))?;
    let probe = FieldGrid::new(width, height, cell, None).map_err(|e| Error::config("field", e.to_string()))?;
    let mut mask: Option<Vec<Vec<bool>>> = match &f.mask_path {
        Some(p) => {
            let p = resolve(p);
            if !p.exists() {
                return Err(Error::config("field.mask_path", format!("{} does not exist", p.display())));
            }
            Some(load_mask_csv(&p)?)
        }
        None => None,
    };
    if let Some(cells) = &f.masked_cells {
        let m = mask.get_or_insert_with(|| vec![vec![true; probe.nx()]; probe.ny()]);
        for &[i, j] in cells {
            if j >= m.len() || i >= m[j].len() {
                return Err(Error::config(
                    "field.masked_cells",
                    format!("cell ({i}, {j}) lies outside the {}x{} grid", probe.nx(), probe.ny()),
                ));
            }
            m[j][i] = false;
        }
    }
    let grid = FieldGrid::new(width, height, cell, mask.as_deref()).map_err(|e| Error::config("field", e.to_string()))?;
    if grid.reachable_count() == 0 {
        return Err(Error::config("field", "no reachable cell"));
    }
    let start = Location::new(f.start_x_m.unwrap_or(0.0), f.start_y_m.unwrap_or(height));
    if !start.is_finite() {
        return Err(Error::config("field.start_x_m", "start must be finite"));
    }

    let count = raw.layers.count.unwrap_or(DEFAULT_LAYER_COUNT as i64);
    if count < 1 {
        return Err(Error::config("layers.count", format!("must be at least 1, got {count}")));
    }
    let thickness = positive("layers.thickness_cm", raw.layers.thickness_cm.unwrap_or(DEFAULT_THICKNESS_CM))?;
    let layers = LayerSpec::new(count as usize, thickness).map_err(|e| Error::config("layers", e.to_string()))?;
    let depth_step_cm = raw
        .layers
        .depth_step_cm
        .map(|v| positive("layers.depth_step_cm", v))
        .transpose()?;

    let (default_bin, default_lag) = default_binning(&grid);
    let bin_width = positive("variogram.bin_width_m", raw.variogram.bin_width_m.unwrap_or(default_bin))?;
    let max_lag = positive("variogram.max_lag_m", raw.variogram.max_lag_m.unwrap_or(default_lag))?;
    let prior = match raw.variogram.prior {
        Some(p) => params("variogram.prior", p)?,
        None => DEFAULT_PRIOR,
    };
    if !(prior.total_sill() > 0.0) {
        return Err(Error::config("variogram.prior", "nugget + sill must be positive"));
    }
    let noise_sd = raw.noise_sd_kpa.unwrap_or(0.0);
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::config("noise_sd_kpa", format!("must be >= 0, got {noise_sd}")));
    }
    let options = RunOptions {
        start,
        noise_sd,
        prior,
        freeze: raw.variogram.freeze,
        bin_width,
        max_lag,
        keep_kv_grids: false,
    };

    let s = raw.surrogate;
    let surrogate = match s.mode {
        SurrogateMode::Synthetic => {
            let per_layer = match (s.params, s.layer_params) {
                (Some(_), Some(_)) => {
                    return Err(Error::config("surrogate.params", "give either `params` or `layer_params`, not both"))
                }
                (Some(p), None) => vec![params("surrogate.params", p)?; layers.count],
                (None, Some(list)) => {
                    if list.len() != layers.count {
                        return Err(Error::config(
                            "surrogate.layer_params",
                            format!("{} entries for {} layers", list.len(), layers.count),
                        ));
                    }
                    list.into_iter()
                        .map(|p| params("surrogate.layer_params", p))
                        .collect::<Result<_>>()?
                }
                (None, None) => vec![DEFAULT_SURROGATE_PARAMS; layers.count],
            };
            let depth_trend = s.depth_trend_kpa.unwrap_or_else(|| default_depth_trend(layers.count));
            if depth_trend.len() != layers.count {
                return Err(Error::config(
                    "surrogate.depth_trend_kpa",
                    format!("{} entries for {} layers", depth_trend.len(), layers.count),
                ));
            }
            if depth_trend.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("surrogate.depth_trend_kpa", "entries must be finite"));
            }
            SurrogateSource::Synthetic {
                seed: s.seed.unwrap_or(0),
                covariance: s.covariance,
                params: per_layer,
                depth_trend,
            }
        }
        SurrogateMode::Load => {
            let dir = s
                .path
                .map(|p| resolve(&p))
                .ok_or_else(|| Error::config("surrogate.path", "required when mode = \"load\""))?;
            for k in 0..layers.count {
                let file = dir.join(truth_file_name(k));
                if !file.exists() {
                    return Err(Error::config("surrogate.path", format!("{} does not exist", file.display())));
                }
            }
            SurrogateSource::Load { dir }
        }
    };

    let strategies = match raw.strategies {
        None => StrategyKind::ALL.iter().map(|&k| StrategyConfig::new(k, 0, 0)).collect(),
        Some(list) if list.is_empty() => return Err(Error::config("strategies", "list is empty")),
        Some(list) => list
            .into_iter()
            .map(|r| {
                let candidate_count = r.candidate_count.unwrap_or(DEFAULT_CANDIDATE_COUNT as i64);
                if candidate_count < 2 {
                    return Err(Error::config(
                        "strategies.candidate_count",
                        format!("must be at least 2, got {candidate_count}"),
                    ));
                }
                Ok(StrategyConfig {
                    kind: r.kind,
                    budget: 0,
                    seed: 0,
                    candidate_count: candidate_count as usize,
                    initial_plan: r.initial_plan.unwrap_or_default(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let budgets: Vec<usize> = match raw.budgets {
        None => DEFAULT_BUDGETS.to_vec(),
        Some(list) if list.is_empty() => return Err(Error::config("budgets", "list is empty")),
        Some(list) => list
            .into_iter()
            .map(|b| check_budget(b, &grid))
            .collect::<Result<_>>()?,
    };
    let seeds = match raw.seeds {
        None => (0..DEFAULT_SEED_COUNT).collect(),
        Some(list) if list.is_empty() => return Err(Error::config("seeds", "list is empty")),
        Some(list) => list,
    };

    Ok(RunConfig {
        grid,
        layers,
        depth_step_cm,
        options,
        surrogate,
        strategies,
        budgets,
        seeds,
    })
}

/// Budgets need 3 samples to fit a model and cannot exceed the reachable cells.
pub fn check_budget(b: i64, grid: &FieldGrid) -> Result<usize> {
    if b < 3 {
        return Err(Error::config("budgets", format!("each budget must be at least 3, got {b}")));
    }
    if b as usize > grid.reachable_count() {
        return Err(Error::config(
            "budgets",
            format!("budget {b} exceeds the {} reachable cells", grid.reachable_count()),
        ));
    }
    Ok(b as usize)
}

/// File name of layer `k` in a saved surrogate directory.
pub fn truth_file_name(k: usize) -> String {
    format!("truth_{k}.csv")
}

impl RunConfig {
    /// Generates or loads the ground-truth field.
    pub fn build_surrogate(&self) -> Result<SurrogateField> {
        match &self.surrogate {
            SurrogateSource::Synthetic {
                seed,
                covariance,
                params,
                depth_trend,
            } => generate_surrogate(&self.grid, &self.layers, params, depth_trend, *covariance, *seed),
            SurrogateSource::Load { dir } => {
                let layers = (0..self.layers.count)
                    .map(|k| {
                        let path = dir.join(truth_file_name(k));
                        let values = load_grid_csv(&path)?;
                        check_shape(&values, &self.grid, &path)?;
                        Ok(values)
                    })
                    .collect::<Result<Vec<GridValues>>>()?;
                SurrogateField::new(self.grid.clone(), layers, Provenance::Loaded { path: dir.clone() })
            }
        }
    }

    /// Strategy templates with budget and seed filled in, in config order.
    pub fn strategy_runs(&self) -> Vec<StrategyConfig> {
        let mut out = Vec::new();
        for s in &self.strategies {
            for &budget in &self.budgets {
                for &seed in &self.seeds {
                    out.push(StrategyConfig { budget, seed, ..*s });
                }
            }
        }
        out
    }
}

fn check_shape(values: &GridValues, grid: &FieldGrid, path: &Path) -> Result<()> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    if values.nx() != grid.nx() || values.ny() != grid.ny() {
        return Err(schema(format!(
            "grid is {}x{}, field is {}x{}",
            values.nx(),
            values.ny(),
            grid.nx(),
            grid.ny()
        )));
    }
    for &c in grid.reachable_cells() {
        if values.get(c).is_none() {
            return Err(schema(format!("reachable cell {c} has no value")));
        }
    }
    Ok(())
}
