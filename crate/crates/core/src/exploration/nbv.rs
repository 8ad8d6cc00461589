//! Next-best-view target selection on the mean kriging-variance grid.

use std::collections::HashSet;

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridValues};

/// Cells with a KV value that `exclude` does not reject, in `(j, i)` order.
pub(crate) fn candidates<F>(kv: &GridValues, exclude: F) -> Vec<(CellIndex, f64)>
where
    F: Fn(CellIndex) -> bool,
{
    let mut out = Vec::new();
    for j in 0..kv.ny() {
        for i in 0..kv.nx() {
            let c = CellIndex::new(i, j);
            if let Some(v) = kv.get(c) {
                if !exclude(c) {
                    out.push((c, v));
                }
            }
        }
    }
    out
}

/// Relative gap below which two KV values count as equal. Cells beyond the
/// variogram range of every sample share one KV value mathematically, and
/// only round-off tells them apart.
pub const KV_TIE_TOLERANCE: f64 = 1e-9;

pub(crate) fn kv_tol(reference: f64) -> f64 {
    KV_TIE_TOLERANCE * reference.abs()
}

/// Highest-KV cell not rejected by `exclude`; ties (within
/// [`KV_TIE_TOLERANCE`]) go to the lowest index.
pub(crate) fn argmax_where<F>(kv: &GridValues, exclude: F) -> Result<(CellIndex, f64)>
where
    F: Fn(CellIndex) -> bool,
{
    let pool = candidates(kv, exclude);
    let max = pool.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    pool.into_iter()
        .find(|c| c.1 >= max - kv_tol(max))
        .ok_or(Error::Exhausted)
}

/// Unvisited cell of maximal KV. Cells without a value (masked) are never
/// candidates.
pub fn next_greedy(kv: &GridValues, visited: &HashSet<CellIndex>) -> Result<CellIndex> {
    argmax_where(kv, |c| visited.contains(&c)).map(|(c, _)| c)
}

/// Index drawn with probability proportional to `weights` (negative weights
/// count as zero). Falls back to a uniform draw when every weight is zero.
pub fn roulette_select<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    assert!(!weights.is_empty(), "roulette over an empty set");
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return rng.random_range(0..weights.len());
    }
    let mut ball = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        let w = w.max(0.0);
        if ball < w {
            return k;
        }
        ball -= w;
    }
    // round-off can leave the ball just past the last positive slot
    weights.iter().rposition(|w| *w > 0.0).expect("total > 0")
}

pub(crate) fn monte_carlo_where<R, F>(kv: &GridValues, exclude: F, candidate_count: usize, rng: &mut R) -> Result<CellIndex>
where
    R: Rng + ?Sized,
    F: Fn(CellIndex) -> bool,
{
    let pool = candidates(kv, exclude);
    if pool.is_empty() {
        return Err(Error::Exhausted);
    }
    let take = candidate_count.clamp(1, pool.len());
    let drawn: Vec<(CellIndex, f64)> = rand::seq::index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    let weights: Vec<f64> = drawn.iter().map(|d| d.1).collect();
    Ok(drawn[roulette_select(&weights, rng)].0)
}

/// Draws `candidate_count` distinct unvisited cells uniformly, then picks
/// one of them with probability proportional to its KV.
pub fn next_monte_carlo<R: Rng + ?Sized>(
    kv: &GridValues,
    visited: &HashSet<CellIndex>,
    candidate_count: usize,
    rng: &mut R,
) -> Result<CellIndex> {
    monte_carlo_where(kv, |c| visited.contains(&c), candidate_count, rng)
}
