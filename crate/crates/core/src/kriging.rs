//! Ordinary kriging in semivariance form.
//!
//! Weights `w` and the Lagrange multiplier `λ` solve
//!
//! ```text
//! [ Γ   1 ] [ w ]   [ γ0 ]
//! [ 1ᵀ  0 ] [ λ ] = [ 1  ]
//! ```
//!
//! where `Γ_ij = γ(|x_i − x_j|)` and `γ0_i = γ(|x_i − x_0|)`. The estimate is
//! `Σ w_i z_i` and the prediction variance `Σ w_i γ0_i + λ`.
//!
//! The augmented matrix depends only on sample geometry and variogram, so a
//! [`KrigingSystem`] factorizes it once and back-substitutes for every target.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{layer_points, FieldGrid, GridValues, LayerSpec, Location, Sample};
use crate::variogram::VariogramParams;

/// Relative tolerance below zero under which a variance is treated as
/// round-off and clamped.
const NEGATIVE_VARIANCE_TOL: f64 = 1e-9;

/// Targets per back-substitution block.
const BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingSolution {
    pub weights: Vec<f64>,
    pub lagrange: f64,
}

/// Factorized ordinary kriging system for a fixed sample geometry.
///
/// Samples sharing a location are merged before factorizing (the system
/// would otherwise be singular); each merged weight is split evenly among
/// the duplicates, which is the same as kriging their mean value.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    params: VariogramParams,
    unique: Vec<Location>,
    group_of: Vec<usize>,
    group_size: Vec<usize>,
    lu: LU<f64, Dyn, Dyn>,
}

impl KrigingSystem {
    pub fn new(locations: &[Location], params: VariogramParams) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        params.validate()?;
        if let Some(bad) = locations.iter().find(|l| !l.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample location {bad:?}")));
        }

        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut unique = Vec::new();
        let mut group_size = Vec::new();
        let group_of = locations
            .iter()
            .map(|l| {
                let key = (canonical_bits(l.x), canonical_bits(l.y));
                *index.entry(key).or_insert_with(|| {
                    unique.push(*l);
                    group_size.push(0);
                    unique.len() - 1
                })
            })
            .collect::<Vec<_>>();
        for &g in &group_of {
            group_size[g] += 1;
        }

        let n = unique.len();
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        for r in 0..n {
            for c in r + 1..n {
                let g = params.gamma(unique[r].distance(&unique[c]));
                a[(r, c)] = g;
                a[(c, r)] = g;
            }
            a[(r, n)] = 1.0;
            a[(n, r)] = 1.0;
        }
        let lu = a.lu();
        if !lu.is_invertible() || lu_is_degenerate(&lu, n + 1) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self {
            params,
            unique,
            group_of,
            group_size,
            lu,
        })
    }

    pub fn params(&self) -> &VariogramParams {
        &self.params
    }

    pub fn sample_count(&self) -> usize {
        self.group_of.len()
    }

    /// Distinct sample locations after merging duplicates.
    pub fn unique_locations(&self) -> &[Location] {
        &self.unique
    }

    /// Semivariances from every original sample to `target`.
    pub fn gamma_to(&self, target: Location) -> Vec<f64> {
        self.group_of
            .iter()
            .map(|&g| self.params.gamma(self.unique[g].distance(&target)))
            .collect()
    }

    pub fn solve(&self, target: Location) -> Result<KrigingSolution> {
        if !target.is_finite() {
            return Err(Error::invalid("non-finite target location"));
        }
        let (w, lagrange) = self.solve_unique(target)?;
        let weights = self
            .group_of
            .iter()
            .map(|&g| w[g] / self.group_size[g] as f64)
            .collect();
        Ok(KrigingSolution { weights, lagrange })
    }

    fn solve_unique(&self, target: Location) -> Result<(Vec<f64>, f64)> {
        let n = self.unique.len();
        if let Some(k) = self.coincident(target) {
            let mut w = vec![0.0; n];
            w[k] = 1.0;
            return Ok((w, 0.0));
        }
        let mut b = DVector::<f64>::zeros(n + 1);
        for (k, loc) in self.unique.iter().enumerate() {
            b[k] = self.params.gamma(loc.distance(&target));
        }
        b[n] = 1.0;
        let x = self.lu.solve(&b).ok_or(Error::SingularMatrix)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        Ok((x.rows(0, n).iter().copied().collect(), x[n]))
    }

    fn coincident(&self, target: Location) -> Option<usize> {
        self.unique.iter().position(|l| *l == target)
    }

    /// Estimate and variance at each target. `values` holds one value per
    /// original sample.
    pub fn predict_many(&self, targets: &[Location], values: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.predict_indexed(targets, values).map_err(|(_, e)| e)
    }

    /// Like [`predict_many`](Self::predict_many) but reports which target
    /// failed, if the failure is target-specific.
    fn predict_indexed(
        &self,
        targets: &[Location],
        values: &[f64],
    ) -> std::result::Result<Vec<(f64, f64)>, (Option<usize>, Error)> {
        if values.len() != self.group_of.len() {
            let msg = format!("{} values for {} samples", values.len(), self.group_of.len());
            return Err((None, Error::invalid(msg)));
        }
        let n = self.unique.len();
        let mut means = vec![0.0; n];
        for (&g, &v) in self.group_of.iter().zip(values) {
            means[g] += v;
        }
        for (m, &c) in means.iter_mut().zip(&self.group_size) {
            *m /= c as f64;
        }

        let blocks: Vec<_> = targets
            .par_chunks(BLOCK)
            .enumerate()
            .map(|(b, chunk)| {
                self.predict_block(chunk, &means)
                    .map_err(|(t, e)| (t.map(|t| b * BLOCK + t), e))
            })
            .collect();
        let mut out = Vec::with_capacity(targets.len());
        for block in blocks {
            out.extend(block?);
        }
        Ok(out)
    }

    fn predict_block(
        &self,
        targets: &[Location],
        means: &[f64],
    ) -> std::result::Result<Vec<(f64, f64)>, (Option<usize>, Error)> {
        let n = self.unique.len();
        let mut rhs = DMatrix::<f64>::zeros(n + 1, targets.len());
        for (t, target) in targets.iter().enumerate() {
            for (k, loc) in self.unique.iter().enumerate() {
                rhs[(k, t)] = self.params.gamma(loc.distance(target));
            }
            rhs[(n, t)] = 1.0;
        }
        let sol = self.lu.solve(&rhs).ok_or((None, Error::SingularMatrix))?;
        targets
            .iter()
            .enumerate()
            .map(|(t, target)| {
                if let Some(k) = self.coincident(*target) {
                    return Ok((means[k], 0.0));
                }
                let col = sol.column(t);
                let mut est = 0.0;
                let mut var = col[n];
                let mut scale = col[n].abs();
                for k in 0..n {
                    est += col[k] * means[k];
                    let term = col[k] * rhs[(k, t)];
                    var += term;
                    scale += term.abs();
                }
                if !(est.is_finite() && var.is_finite()) {
                    return Err((Some(t), Error::SingularMatrix));
                }
                let var = clamp_variance(var, scale).map_err(|e| (Some(t), e))?;
                Ok((est, var))
            })
            .collect()
    }
}

fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 are the same place
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

fn lu_is_degenerate(lu: &LU<f64, Dyn, Dyn>, dim: usize) -> bool {
    let u = lu.u();
    let diag: Vec<f64> = (0..dim).map(|k| u[(k, k)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    !(max > 0.0) || min <= max * 1e-14
}

fn clamp_variance(var: f64, scale: f64) -> Result<f64> {
    if var >= 0.0 {
        Ok(var)
    } else if var >= -NEGATIVE_VARIANCE_TOL * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(var))
    }
}

/// Solves the ordinary kriging system for one target.
pub fn solve_weights(
    sample_locs: &[Location],
    params: &VariogramParams,
    target: Location,
) -> Result<KrigingSolution> {
    KrigingSystem::new(sample_locs, *params)?.solve(target)
}

/// `Σ w_i z_i`.
pub fn estimate(sol: &KrigingSolution, values: &[f64]) -> Result<f64> {
    if values.len() != sol.weights.len() {
        return Err(Error::invalid(format!(
            "{} values for {} weights",
            values.len(),
            sol.weights.len()
        )));
    }
    Ok(sol.weights.iter().zip(values).map(|(w, z)| w * z).sum())
}

/// `Σ w_i γ0_i + λ`, with round-off negatives clamped to zero.
pub fn variance(sol: &KrigingSolution, gamma0: &[f64]) -> Result<f64> {
    if gamma0.len() != sol.weights.len() {
        return Err(Error::invalid(format!(
            "{} semivariances for {} weights",
            gamma0.len(),
            sol.weights.len()
        )));
    }
    let mut var = sol.lagrange;
    let mut scale = sol.lagrange.abs();
    for (w, g) in sol.weights.iter().zip(gamma0) {
        var += w * g;
        scale += (w * g).abs();
    }
    clamp_variance(var, scale)
}

/// Kriged estimate and variance of one depth layer over the reachable cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMap {
    pub estimates: GridValues,
    pub variances: GridValues,
    pub params: VariogramParams,
    pub sample_ids: Vec<u64>,
}

impl LayerMap {
    pub fn mean_variance(&self) -> f64 {
        let (sum, n) = self.variances.present().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        sum / n as f64
    }
}

/// Kriges one layer at every reachable cell centre using all samples.
pub fn krige_layer(points: &[(Location, f64)], params: &VariogramParams, grid: &FieldGrid) -> Result<LayerMap> {
    let locs: Vec<Location> = points.iter().map(|p| p.0).collect();
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    let system = KrigingSystem::new(&locs, *params)?;
    let cells = grid.reachable_cells();
    let targets: Vec<Location> = cells.iter().map(|&c| grid.cell_center(c)).collect();
    let predictions = system.predict_indexed(&targets, &values).map_err(|(t, e)| match t {
        Some(t) => Error::AtCell {
            i: cells[t].i,
            j: cells[t].j,
            source: Box::new(e),
        },
        None => e,
    })?;

    let mut estimates = grid.empty_values();
    let mut variances = grid.empty_values();
    for (&c, &(est, var)) in cells.iter().zip(&predictions) {
        estimates.set(c, est);
        variances.set(c, var);
    }
    Ok(LayerMap {
        estimates,
        variances,
        params: *params,
        sample_ids: (0..points.len() as u64).collect(),
    })
}

/// Per-layer kriging maps and the layer-averaged variance surface.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    pub layers: Vec<LayerMap>,
    /// Per-cell mean of the layer variances.
    pub mean_kv_grid: GridValues,
    /// Mean over layers of each layer's mean cell variance.
    pub mean_kv: f64,
}

impl LayeredModel {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }
}

/// Kriges each of the `spec.count` layers with its own variogram.
pub fn build_layered_model(
    samples: &[Sample],
    grid: &FieldGrid,
    spec: &LayerSpec,
    params_per_layer: &[VariogramParams],
) -> Result<LayeredModel> {
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if params_per_layer.len() != spec.count {
        return Err(Error::invalid(format!(
            "{} variograms for {} layers",
            params_per_layer.len(),
            spec.count
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.layer_count() != spec.count) {
        return Err(Error::invalid(format!(
            "sample {} has {} layers, expected {}",
            s.id,
            s.layer_count(),
            spec.count
        )));
    }
    let ids: Vec<u64> = samples.iter().map(|s| s.id).collect();
    let layers = params_per_layer
        .iter()
        .enumerate()
        .map(|(k, params)| {
            let points = layer_points(samples, k)?;
            let mut map = krige_layer(&points, params, grid)?;
            map.sample_ids = ids.clone();
            Ok(map)
        })
        .collect::<Result<Vec<_>>>()?;
    LayeredModel::from_layers(layers, grid)
}

impl LayeredModel {
    /// Assembles per-layer maps built over `grid` and averages their variances.
    pub fn from_layers(layers: Vec<LayerMap>, grid: &FieldGrid) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a layered model needs at least one layer"));
        }
        let m = layers.len() as f64;
        let mut mean_kv_grid = grid.empty_values();
        let mut total = 0.0;
        for &c in grid.reachable_cells() {
            let mut sum = 0.0;
            for layer in &layers {
                sum += layer
                    .variances
                    .get(c)
                    .ok_or_else(|| Error::invalid(format!("layer has no variance at cell {c}")))?;
            }
            mean_kv_grid.set(c, sum / m);
            total += sum / m;
        }
        let mean_kv = total / grid.reachable_count() as f64;
        Ok(LayeredModel {
            layers,
            mean_kv_grid,
            mean_kv,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;

    fn params() -> VariogramParams {
        VariogramParams::new(0.5, 12.0, 3.0).unwrap()
    }

    #[test]
    fn single_sample() {
        let p = params();
        let sol = solve_weights(&[Location::new(1.0, 1.0)], &p, Location::new(4.0, 5.0)).unwrap();
        assert_eq!(sol.weights, vec![1.0]);
        // 2x2 system by hand: w = 1, λ = γ(h); variance = 2γ(h)
        let g = p.gamma(5.0);
        assert!((sol.lagrange - g).abs() < 1e-12);
        assert!((variance(&sol, &[g]).unwrap() - 2.0 * g).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let sol = solve_weights(
            &[Location::new(0.0, 0.0), Location::new(10.0, 0.0)],
            &params(),
            Location::new(5.0, 3.0),
        )
        .unwrap();
        assert!((sol.weights[0] - 0.5).abs() < 1e-12);
        assert!((sol.weights[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn estimate_examples() {
        let sol = KrigingSolution {
            weights: vec![0.5, 0.5],
            lagrange: 0.0,
        };
        assert_eq!(estimate(&sol, &[100.0, 200.0]).unwrap(), 150.0);
        assert!(matches!(estimate(&sol, &[1.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(variance(&sol, &[1.0, 2.0, 3.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constant_values_reproduce_constant() {
        let locs = [Location::new(0.0, 0.0), Location::new(3.0, 7.0), Location::new(9.0, 2.0)];
        let sol = solve_weights(&locs, &params(), Location::new(4.0, 4.0)).unwrap();
        assert!((estimate(&sol, &[7.0; 3]).unwrap() - 7.0).abs() < 1e-12);
        let shifted: Vec<f64> = [1.0, 5.0, 2.0].iter().map(|v| v + 10.0).collect();
        let d = estimate(&sol, &shifted).unwrap() - estimate(&sol, &[1.0, 5.0, 2.0]).unwrap();
        assert!((d - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exact_at_sample_without_nugget() {
        let p = VariogramParams::new(0.0, 12.0, 3.0).unwrap();
        let locs = [Location::new(0.0, 0.0), Location::new(3.0, 7.0)];
        let sol = solve_weights(&locs, &p, locs[1]).unwrap();
        let g0 = KrigingSystem::new(&locs, p).unwrap().gamma_to(locs[1]);
        assert_eq!(variance(&sol, &g0).unwrap(), 0.0);
        assert_eq!(estimate(&sol, &[1.0, 9.0]).unwrap(), 9.0);
    }

    #[test]
    fn duplicates_are_merged() {
        let p = VariogramParams::new(0.0, 12.0, 3.0).unwrap();
        let locs = [Location::new(0.0, 0.0), Location::new(0.0, 0.0), Location::new(6.0, 0.0)];
        let sys = KrigingSystem::new(&locs, p).unwrap();
        assert_eq!(sys.unique_locations().len(), 2);
        let sol = sys.solve(Location::new(0.0, 0.0)).unwrap();
        assert_eq!(sol.weights, vec![0.5, 0.5, 0.0]);
        assert_eq!(estimate(&sol, &[10.0, 20.0, 99.0]).unwrap(), 15.0);
    }

    #[test]
    fn zero_variogram_is_singular() {
        let p = VariogramParams::new(0.0, 5.0, 0.0).unwrap();
        let locs = [Location::new(0.0, 0.0), Location::new(6.0, 0.0)];
        assert!(matches!(KrigingSystem::new(&locs, p), Err(Error::SingularMatrix)));
    }

    #[test]
    fn single_sample_layer_is_flat() {
        let grid = FieldGrid::new(20.0, 15.0, 5.0, None).unwrap();
        let map = krige_layer(&[(Location::new(3.0, 3.0), 42.0)], &params(), &grid).unwrap();
        assert!(map.estimates.present().all(|v| (v - 42.0).abs() < 1e-12));
        assert_eq!(map.estimates.present().count(), 12);
    }

    #[test]
    fn sampled_cells_reproduce_values() {
        let grid = FieldGrid::new(25.0, 25.0, 5.0, None).unwrap();
        let p = VariogramParams::new(0.0, 15.0, 10.0).unwrap();
        let cells = [CellIndex::new(0, 0), CellIndex::new(3, 1), CellIndex::new(2, 4)];
        let pts: Vec<_> = cells.iter().zip([5.0, 9.0, -2.0]).map(|(&c, v)| (grid.cell_center(c), v)).collect();
        let map = krige_layer(&pts, &p, &grid).unwrap();
        for (&c, (_, v)) in cells.iter().zip(&pts) {
            assert!((map.estimates.get(c).unwrap() - v).abs() < 1e-12);
            assert!(map.variances.get(c).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn layered_model_means() {
        let grid = FieldGrid::new(15.0, 10.0, 5.0, None).unwrap();
        let spec = LayerSpec::new(2, 5.0).unwrap();
        let samples = vec![
            Sample::from_layers(1, Location::new(2.0, 2.0), vec![10.0, 20.0]).unwrap(),
            Sample::from_layers(2, Location::new(12.0, 7.0), vec![14.0, 26.0]).unwrap(),
        ];
        // sill 3x on layer 1 scales its variance grid by 3; mean grid is 2V
        let p0 = VariogramParams::new(0.0, 10.0, 2.0).unwrap();
        let p1 = VariogramParams::new(0.0, 10.0, 6.0).unwrap();
        let model = build_layered_model(&samples, &grid, &spec, &[p0, p1]).unwrap();
        for &c in grid.reachable_cells() {
            let v = model.layers[0].variances.get(c).unwrap();
            assert!((model.layers[1].variances.get(c).unwrap() - 3.0 * v).abs() < 1e-9);
            assert!((model.mean_kv_grid.get(c).unwrap() - 2.0 * v).abs() < 1e-9);
        }
        let per_layer = (model.layers[0].mean_variance() + model.layers[1].mean_variance()) / 2.0;
        assert!((model.mean_kv - per_layer).abs() < 1e-9);
        assert_eq!(model.layers[0].sample_ids, vec![1, 2]);
    }

    #[test]
    fn single_layer_mean_is_identity() {
        let grid = FieldGrid::new(15.0, 10.0, 5.0, None).unwrap();
        let spec = LayerSpec::new(1, 5.0).unwrap();
        let samples = vec![
            Sample::from_layers(1, Location::new(2.0, 2.0), vec![10.0]).unwrap(),
            Sample::from_layers(2, Location::new(12.0, 7.0), vec![14.0]).unwrap(),
        ];
        let model = build_layered_model(&samples, &grid, &spec, &[params()]).unwrap();
        assert_eq!(model.mean_kv_grid, model.layers[0].variances);
    }

    #[test]
    fn layered_model_rejects_mismatches() {
        let grid = FieldGrid::new(15.0, 10.0, 5.0, None).unwrap();
        let spec = LayerSpec::new(2, 5.0).unwrap();
        let samples = vec![Sample::from_layers(1, Location::new(2.0, 2.0), vec![10.0]).unwrap()];
        assert!(build_layered_model(&samples, &grid, &spec, &[params(), params()]).is_err());
        assert!(build_layered_model(&[], &grid, &spec, &[params(), params()]).is_err());
    }
}
