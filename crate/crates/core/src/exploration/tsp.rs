//! Open-path TSP routing: nearest-neighbour construction from the robot's
//! position, then alternating 2-opt and Or-opt passes to a local optimum.
//! The robot does not return to its start.

use crate::error::{Error, Result};
use crate::grid::{CellIndex, FieldGrid, Location};

/// Smallest gain accepted as an improvement (m).
const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub order: Vec<CellIndex>,
    /// Origin to first target plus every consecutive hop (m).
    pub length: f64,
}

/// Euclidean open-path length through the cell centres, starting at `origin`.
pub fn path_length(origin: Location, route: &[CellIndex], grid: &FieldGrid) -> f64 {
    let mut at = origin;
    let mut total = 0.0;
    for &c in route {
        let next = grid.cell_center(c);
        total += at.distance(&next);
        at = next;
    }
    total
}

pub fn tsp_route(origin: Location, targets: &[CellIndex], grid: &FieldGrid) -> Result<Route> {
    if targets.is_empty() {
        return Err(Error::invalid("TSP needs at least one target"));
    }
    let order = local_search(origin, nearest_neighbor(origin, targets, grid), grid);
    let length = path_length(origin, &order, grid);
    Ok(Route { order, length })
}

/// Re-plans a standing route after targets were dropped or added: keeps
/// the surviving order, inserts each new target where it lengthens the path
/// least, runs the local search, and returns the shorter of that and a fresh
/// [`tsp_route`]. Keeping the order stops the tour from being rebuilt from
/// scratch at every step.
pub fn reroute(origin: Location, kept: &[CellIndex], added: &[CellIndex], grid: &FieldGrid) -> Result<Route> {
    let mut order: Vec<CellIndex> = Vec::with_capacity(kept.len() + added.len());
    for &c in kept {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    for &c in added {
        if order.contains(&c) {
            continue;
        }
        let p = grid.cell_center(c);
        let mut best = (order.len(), f64::INFINITY);
        let mut prev = origin;
        for (k, &next) in order.iter().enumerate() {
            let q = grid.cell_center(next);
            let cost = prev.distance(&p) + p.distance(&q) - prev.distance(&q);
            if cost < best.1 {
                best = (k, cost);
            }
            prev = q;
        }
        if prev.distance(&p) < best.1 {
            best = (order.len(), 0.0);
        }
        order.insert(best.0, c);
    }
    if order.is_empty() {
        return Err(Error::invalid("TSP needs at least one target"));
    }
    let kept_order = local_search(origin, order.clone(), grid);
    let kept_len = path_length(origin, &kept_order, grid);
    let fresh = tsp_route(origin, &order, grid)?;
    if fresh.length < kept_len - IMPROVEMENT_EPS {
        Ok(fresh)
    } else {
        Ok(Route {
            order: kept_order,
            length: kept_len,
        })
    }
}

/// Greedy construction; equal distances go to the lowest cell index so the
/// result does not depend on input order.
pub fn nearest_neighbor(origin: Location, targets: &[CellIndex], grid: &FieldGrid) -> Vec<CellIndex> {
    let mut left: Vec<CellIndex> = targets.to_vec();
    left.sort();
    left.dedup();
    let mut order = Vec::with_capacity(left.len());
    let mut at = origin;
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .map(|(k, &c)| (k, at.distance(&grid.cell_center(c))))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let c = left.remove(k);
        at = grid.cell_center(c);
        order.push(c);
    }
    order
}

/// 2-opt for an open path with a fixed start. Reversing `route[i..=k]`
/// swaps the edges entering `i` and leaving `k`; when `k` is the last
/// target only the entering edge changes.
pub fn two_opt(origin: Location, mut route: Vec<CellIndex>, grid: &FieldGrid) -> Vec<CellIndex> {
    let n = route.len();
    if n < 2 {
        return route;
    }
    let mut pts: Vec<Location> = std::iter::once(origin)
        .chain(route.iter().map(|&c| grid.cell_center(c)))
        .collect();
    let d = |a: &Location, b: &Location| a.distance(b);
    loop {
        let mut improved = false;
        for i in 1..=n {
            for k in i + 1..=n {
                let before = d(&pts[i - 1], &pts[i]) + if k < n { d(&pts[k], &pts[k + 1]) } else { 0.0 };
                let after = d(&pts[i - 1], &pts[k]) + if k < n { d(&pts[i], &pts[k + 1]) } else { 0.0 };
                if after < before - IMPROVEMENT_EPS {
                    pts[i..=k].reverse();
                    route[i - 1..k].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return route;
        }
    }
}

/// 2-opt and Or-opt in turn until neither shortens the path.
pub fn local_search(origin: Location, route: Vec<CellIndex>, grid: &FieldGrid) -> Vec<CellIndex> {
    let mut route = two_opt(origin, route, grid);
    loop {
        let (moved, improved) = or_opt(origin, route, grid);
        if !improved {
            return moved;
        }
        route = two_opt(origin, moved, grid);
    }
}

/// Segments of up to this many targets are relocated by [`or_opt`].
const OR_OPT_MAX_SEGMENT: usize = 3;

/// Or-opt for an open path with a fixed start: moves a run of 1 to 3
/// consecutive targets, forwards or reversed, into any gap where it
/// shortens the path, until no such move is left. Returns the route and whether any move was made.
pub fn or_opt(origin: Location, route: Vec<CellIndex>, grid: &FieldGrid) -> (Vec<CellIndex>, bool) {
    let mut nodes: Vec<(CellIndex, Location)> = route.iter().map(|&c| (c, grid.cell_center(c))).collect();
    let n = nodes.len();
    let d = |a: Location, b: Location| a.distance(&b);
    let mut any = false;
    'search: loop {
        for len in 1..=OR_OPT_MAX_SEGMENT.min(n.saturating_sub(1)) {
            for i in 0..=n - len {
                let j = i + len - 1;
                let prev = if i == 0 { origin } else { nodes[i - 1].1 };
                let (first, last) = (nodes[i].1, nodes[j].1);
                let removed = d(prev, first) + nodes.get(j + 1).map_or(0.0, |nx| d(last, nx.1) - d(prev, nx.1));
                let rest: Vec<(CellIndex, Location)> = nodes[..i].iter().chain(&nodes[j + 1..]).copied().collect();
                for p in 0..=rest.len() {
                    let a = if p == 0 { origin } else { rest[p - 1].1 };
                    let b = rest.get(p).map(|r| r.1);
                    for reversed in [false, true] {
                        if p == i && !reversed {
                            continue;
                        }
                        let (f, l) = if reversed { (last, first) } else { (first, last) };
                        let added = d(a, f) + b.map_or(0.0, |b| d(l, b) - d(a, b));
                        if added < removed - IMPROVEMENT_EPS {
                            let mut seg: Vec<_> = nodes[i..=j].to_vec();
                            if reversed {
                                seg.reverse();
                            }
                            let mut next = rest[..p].to_vec();
                            next.extend(seg);
                            next.extend_from_slice(&rest[p..]);
                            nodes = next;
                            any = true;
                            continue 'search;
                        }
                    }
                }
            }
        }
        return (nodes.into_iter().map(|(c, _)| c).collect(), any);
    }
}
