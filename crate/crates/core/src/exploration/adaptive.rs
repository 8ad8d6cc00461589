//! Editing a standing plan after each model update.

use std::collections::HashSet;

use rand::Rng;

use super::nbv::{argmax_where, kv_tol, monte_carlo_where};
use super::tsp;
use super::Plan;
use crate::error::{Error, Result};
use crate::grid::{CellIndex, FieldGrid, GridValues};

fn kv_of(kv: &GridValues, c: CellIndex) -> f64 {
    kv.get(c).unwrap_or(0.0)
}

fn reroute(grid: &FieldGrid, plan: &Plan, targets: Vec<CellIndex>) -> Result<Plan> {
    if targets.is_empty() {
        return Ok(Plan {
            route: targets,
            origin: plan.origin,
        });
    }
    let planned = plan.targets();
    let kept: Vec<CellIndex> = plan.route.iter().copied().filter(|c| targets.contains(c)).collect();
    let added: Vec<CellIndex> = targets.iter().copied().filter(|c| !planned.contains(c)).collect();
    let route = tsp::reroute(plan.origin, &kept, &added, grid)?;
    Ok(Plan {
        route: route.order,
        origin: plan.origin,
    })
}

/// Greedy plan edit, routed from `plan.origin` (the robot's position):
///
/// 1. add the unplanned, unvisited cell of highest KV if it beats every
///    current target by more than round-off;
/// 2. drop every target whose KV is below `mean − 2·sd` of the target KVs
///    (population sd; skipped with fewer than three targets);
/// 3. re-route the survivors, keeping their order where that is no longer
///    than a fresh route.
pub fn adapt_plan_greedy(
    plan: &Plan,
    kv: &GridValues,
    visited: &HashSet<CellIndex>,
    grid: &FieldGrid,
) -> Result<Plan> {
    if plan.is_empty() {
        return Err(Error::invalid("cannot adapt an empty plan"));
    }
    let planned = plan.targets();
    let mut targets = plan.route.clone();

    let best_target = targets.iter().map(|&c| kv_of(kv, c)).fold(f64::NEG_INFINITY, f64::max);
    if let Ok((c, v)) = argmax_where(kv, |c| planned.contains(&c) || visited.contains(&c)) {
        if v > best_target + kv_tol(best_target) {
            targets.push(c);
        }
    }

    if targets.len() >= 3 {
        let values: Vec<f64> = targets.iter().map(|&c| kv_of(kv, c)).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let floor = mean - 2.0 * sd - kv_tol(mean);
        targets = targets.into_iter().zip(values).filter(|&(_, v)| v >= floor).map(|(c, _)| c).collect();
    }
    reroute(grid, plan, targets)
}

/// Monte Carlo plan edit: draw one new target by KV-weighted roulette over
/// unplanned, unvisited cells, drop the current target of lowest KV, and
/// re-route. The number of targets is unchanged (unless no candidate is
/// left, in which case the plan is only re-routed).
pub fn adapt_plan_mc<R: Rng + ?Sized>(
    plan: &Plan,
    kv: &GridValues,
    visited: &HashSet<CellIndex>,
    grid: &FieldGrid,
    candidate_count: usize,
    rng: &mut R,
) -> Result<Plan> {
    if plan.is_empty() {
        return Err(Error::invalid("cannot adapt an empty plan"));
    }
    let planned = plan.targets();
    let mut targets = plan.route.clone();
    match monte_carlo_where(kv, |c| planned.contains(&c) || visited.contains(&c), candidate_count, rng) {
        Ok(new) => {
            let weakest = lowest_kv_position(&targets, kv);
            targets.remove(weakest);
            targets.push(new);
        }
        Err(Error::Exhausted) => {}
        Err(e) => return Err(e),
    }
    reroute(grid, plan, targets)
}

/// Position of the lowest-KV target; ties go to the lowest cell index.
pub(crate) fn lowest_kv_position(targets: &[CellIndex], kv: &GridValues) -> usize {
    let mut best = 0;
    for k in 1..targets.len() {
        let (v, b) = (kv_of(kv, targets[k]), kv_of(kv, targets[best]));
        if v < b || (v == b && targets[k] < targets[best]) {
            best = k;
        }
    }
    best
}
