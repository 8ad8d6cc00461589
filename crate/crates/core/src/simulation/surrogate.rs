//! Dense ground-truth fields that stand in for a surveyed field.
//!
//! Each layer is one draw of a zero-mean stationary Gaussian field over the
//! reachable cell centres, realized through a Cholesky factor of the dense
//! cell-to-cell covariance, plus a per-layer offset that encodes the
//! increase of compaction with depth.

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, FieldGrid, GridValues, LayerSpec, Sample};
use crate::variogram::VariogramParams;

/// Largest reachable-cell count accepted for dense factorization.
pub const MAX_DENSE_CELLS: usize = 4096;

const JITTER: f64 = 1e-8;

/// Covariance family used to realize a layer from its nugget/range/sill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    /// `C(h) = p2 · (1 − 1.5 r + 0.5 r³)` for `r = h/p1 < 1`, plus the nugget
    /// at `h = 0`. Positive definite in two dimensions.
    #[default]
    Spherical,
    /// `C(h) = (p0 + p2) − γ(h)` with the bounded linear `γ`. Not positive
    /// definite on most 2-D grids, in which case generation fails.
    Linear,
}

impl CovarianceModel {
    pub fn covariance(self, params: &VariogramParams, h: f64) -> f64 {
        if h == 0.0 {
            return params.total_sill();
        }
        match self {
            CovarianceModel::Linear => params.total_sill() - params.gamma(h),
            CovarianceModel::Spherical => {
                let r = h / params.range;
                if r >= 1.0 {
                    0.0
                } else {
                    params.sill * (1.0 - 1.5 * r + 0.5 * r * r * r)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic {
        seed: u64,
        params: Vec<VariogramParams>,
        covariance: CovarianceModel,
    },
    Loaded {
        path: PathBuf,
    },
}

/// Known truth for every layer at every reachable cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateField {
    grid: FieldGrid,
    truth: Vec<GridValues>,
    /// `truth` gathered over reachable cells, per layer.
    dense: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl SurrogateField {
    pub fn new(grid: FieldGrid, truth: Vec<GridValues>, provenance: Provenance) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::invalid("surrogate needs at least one layer"));
        }
        let dense = truth.iter().map(|layer| grid.gather(layer)).collect::<Result<Vec<_>>>()?;
        if dense.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("surrogate values must be finite"));
        }
        Ok(Self {
            grid,
            truth,
            dense,
            provenance,
        })
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn layer_count(&self) -> usize {
        self.truth.len()
    }

    pub fn layers(&self) -> &[GridValues] {
        &self.truth
    }

    /// Layer `k` over reachable cells, in [`FieldGrid::reachable_cells`] order.
    pub fn layer_values(&self, k: usize) -> &[f64] {
        &self.dense[k]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn truth_at(&self, cell: CellIndex) -> Result<Vec<f64>> {
        let slot = self
            .grid
            .slot(cell)
            .ok_or_else(|| Error::invalid(format!("cell {cell} is not reachable")))?;
        Ok(self.dense.iter().map(|layer| layer[slot]).collect())
    }

    pub fn check_spec(&self, spec: &LayerSpec) -> Result<()> {
        if spec.count != self.layer_count() {
            return Err(Error::invalid(format!(
                "surrogate has {} layers, layer spec asks for {}",
                self.layer_count(),
                spec.count
            )));
        }
        Ok(())
    }

    /// Simulated penetrometer visit at a cell centre: truth plus independent
    /// Gaussian noise per layer, clamped at 0 kPa.
    pub fn sample_at<R: Rng + ?Sized>(&self, cell: CellIndex, id: u64, noise_sd: f64, rng: &mut R) -> Result<Sample> {
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::invalid(format!("noise sd must be >= 0, got {noise_sd}")));
        }
        let mut values = self.truth_at(cell)?;
        if noise_sd > 0.0 {
            let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
            for v in &mut values {
                *v = (*v + noise.sample(rng)).max(0.0);
            }
        }
        Sample::from_layers(id, self.grid.cell_center(cell), values)
    }
}

/// Free-function form of [`SurrogateField::sample_at`].
pub fn sample_at<R: Rng + ?Sized>(
    field: &SurrogateField,
    cell: CellIndex,
    id: u64,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Sample> {
    field.sample_at(cell, id, noise_sd, rng)
}

/// Draws a synthetic surrogate. `layer_variograms` and `depth_trend` hold
/// one entry per layer.
pub fn generate_surrogate(
    grid: &FieldGrid,
    spec: &LayerSpec,
    layer_variograms: &[VariogramParams],
    depth_trend: &[f64],
    covariance: CovarianceModel,
    seed: u64,
) -> Result<SurrogateField> {
    if layer_variograms.len() != spec.count || depth_trend.len() != spec.count {
        return Err(Error::invalid(format!(
            "need {} variograms and depth offsets, got {} and {}",
            spec.count,
            layer_variograms.len(),
            depth_trend.len()
        )));
    }
    for p in layer_variograms {
        p.validate()?;
    }
    if depth_trend.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("depth trend offsets must be finite"));
    }
    let n = grid.reachable_count();
    if n > MAX_DENSE_CELLS {
        return Err(Error::invalid(format!(
            "{n} reachable cells exceed the dense generation limit of {MAX_DENSE_CELLS}"
        )));
    }

    let centers: Vec<_> = grid.reachable_cells().iter().map(|&c| grid.cell_center(c)).collect();
    let mut factors: HashMap<[u64; 3], DMatrix<f64>> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Vec::with_capacity(spec.count);

    for (k, (params, &offset)) in layer_variograms.iter().zip(depth_trend).enumerate() {
        let z: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let values: Vec<f64> = if params.total_sill() == 0.0 {
            vec![offset.max(0.0); n]
        } else {
            let key = [params.nugget.to_bits(), params.range.to_bits(), params.sill.to_bits()];
            if !factors.contains_key(&key) {
                let factor = cholesky_factor(&centers, params, covariance).map_err(|e| match e {
                    Error::Generation(msg) => Error::Generation(format!("layer {k}: {msg}")),
                    other => other,
                })?;
                factors.insert(key, factor);
            }
            let draw = &factors[&key] * &z;
            draw.iter().map(|v| (v + offset).max(0.0)).collect()
        };
        truth.push(grid.scatter(&values));
    }
    // keep the RNG stream position independent of the factor cache
    let _ = rng.random::<u64>();

    SurrogateField::new(
        grid.clone(),
        truth,
        Provenance::Synthetic {
            seed,
            params: layer_variograms.to_vec(),
            covariance,
        },
    )
}

fn cholesky_factor(
    centers: &[crate::grid::Location],
    params: &VariogramParams,
    model: CovarianceModel,
) -> Result<DMatrix<f64>> {
    let n = centers.len();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        cov[(a, a)] = model.covariance(params, 0.0) + JITTER;
        for b in a + 1..n {
            let c = model.covariance(params, centers[a].distance(&centers[b]));
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    cov.cholesky()
        .map(|ch| ch.l())
        .ok_or_else(|| Error::Generation(format!("{model:?} covariance is not positive definite")))
}
