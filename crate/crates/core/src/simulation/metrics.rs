//! Model error against the surrogate truth and the KV/error correlation.

use crate::error::{Error, Result};
use crate::kriging::LayeredModel;

use super::run::RunRecord;
use super::surrogate::SurrogateField;

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    /// Mean squared error of each layer over the reachable cells (kPa²).
    pub per_layer: Vec<f64>,
    /// Mean over all reachable cells of all layers (kPa²).
    pub mse: f64,
    /// `sqrt(mse)` (kPa).
    pub rmse: f64,
}

/// Squared error of every layer at every reachable cell, `[layer][slot]`.
pub(crate) fn squared_errors(model: &LayeredModel, field: &SurrogateField) -> Result<Vec<Vec<f64>>> {
    if model.layer_count() != field.layer_count() {
        return Err(Error::invalid(format!(
            "model has {} layers, truth has {}",
            model.layer_count(),
            field.layer_count()
        )));
    }
    let grid = field.grid();
    model
        .layers
        .iter()
        .enumerate()
        .map(|(k, layer)| {
            let est = grid.gather(&layer.estimates)?;
            Ok(est.iter().zip(field.layer_values(k)).map(|(e, t)| (e - t) * (e - t)).collect())
        })
        .collect()
}

pub fn mse(model: &LayeredModel, field: &SurrogateField) -> Result<MseReport> {
    let sq = squared_errors(model, field)?;
    let per_layer: Vec<f64> = sq.iter().map(|l| l.iter().sum::<f64>() / l.len() as f64).collect();
    let total: f64 = sq.iter().flatten().sum();
    let count: usize = sq.iter().map(Vec::len).sum();
    let mse = total / count as f64;
    Ok(MseReport {
        per_layer,
        mse,
        rmse: mse.sqrt(),
    })
}

/// Pearson correlation coefficient of two equally long series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::UndefinedCorrelation("first series"));
    }
    if !(syy > 0.0) {
        return Err(Error::UndefinedCorrelation("second series"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between the per-cell KV and per-cell squared error, with the
/// vectors of every step concatenated.
pub fn kv_mse_correlation(record: &RunRecord) -> Result<f64> {
    let kv: Vec<f64> = record.kv_vectors.iter().flatten().copied().collect();
    let err: Vec<f64> = record.sq_error_vectors.iter().flatten().copied().collect();
    pearson(&kv, &err)
}
