//! Per-layer comparison of two kriged models.

use crate::error::{Error, Result};
use crate::grid::GridValues;
use crate::kriging::LayeredModel;

/// One layer of a normalized-RMSE table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrmseRow {
    pub layer: usize,
    pub rmse: f64,
    /// Mean of the reference (`a`) estimates over the compared cells.
    pub mean_a: f64,
    /// `rmse / mean_a`; `None` when the reference mean is zero.
    pub normalized: Option<f64>,
}

/// Compares two models layer by layer against the estimates of `a`.
pub fn normalized_rmse_report(a: &LayeredModel, b: &LayeredModel) -> Result<Vec<NrmseRow>> {
    let ea: Vec<GridValues> = a.layers.iter().map(|l| l.estimates.clone()).collect();
    let eb: Vec<GridValues> = b.layers.iter().map(|l| l.estimates.clone()).collect();
    normalized_rmse_grids(&ea, &eb)
}

/// Same as [`normalized_rmse_report`] on raw estimate grids. Cells must be
/// present in both grids or in neither.
pub fn normalized_rmse_grids(a: &[GridValues], b: &[GridValues]) -> Result<Vec<NrmseRow>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{} layers vs {} layers", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("no layers to compare"));
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (ga, gb))| {
            if ga.nx() != gb.nx() || ga.ny() != gb.ny() {
                return Err(Error::invalid(format!(
                    "layer {k}: grid {}x{} vs {}x{}",
                    ga.nx(),
                    ga.ny(),
                    gb.nx(),
                    gb.ny()
                )));
            }
            let (mut se, mut sum, mut n) = (0.0, 0.0, 0usize);
            for (j, (ra, rb)) in ga.rows().zip(gb.rows()).enumerate() {
                for (i, (va, vb)) in ra.iter().zip(rb).enumerate() {
                    match (va, vb) {
                        (Some(x), Some(y)) => {
                            se += (x - y) * (x - y);
                            sum += x;
                            n += 1;
                        }
                        (None, None) => {}
                        _ => return Err(Error::invalid(format!("layer {k}: cell ({i}, {j}) present in one grid only"))),
                    }
                }
            }
            if n == 0 {
                return Err(Error::InsufficientData { needed: 1, got: 0 });
            }
            let rmse = (se / n as f64).sqrt();
            let mean_a = sum / n as f64;
            let normalized = (mean_a != 0.0).then(|| rmse / mean_a);
            Ok(NrmseRow {
                layer: k,
                rmse,
                mean_a,
                normalized,
            })
        })
        .collect()
}
