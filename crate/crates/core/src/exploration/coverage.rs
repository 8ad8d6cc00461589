//! Area-coverage planners. None of them looks at the variance map.

use std::collections::HashSet;

use rand::Rng;

use super::tsp::tsp_route;
use super::Plan;
use crate::error::{Error, Result};
use crate::grid::{CellIndex, FieldGrid, Location};

fn routed(grid: &FieldGrid, origin: Location, targets: &[CellIndex]) -> Result<Plan> {
    let route = tsp_route(origin, targets, grid)?;
    Ok(Plan {
        route: route.order,
        origin,
    })
}

/// `n` distinct reachable cells drawn uniformly, then TSP-ordered.
pub fn plan_random<R: Rng + ?Sized>(grid: &FieldGrid, n: usize, origin: Location, rng: &mut R) -> Result<Plan> {
    plan_random_excluding(grid, n, origin, &HashSet::new(), rng)
}

/// [`plan_random`] restricted to cells outside `exclude`.
pub fn plan_random_excluding<R: Rng + ?Sized>(
    grid: &FieldGrid,
    n: usize,
    origin: Location,
    exclude: &HashSet<CellIndex>,
    rng: &mut R,
) -> Result<Plan> {
    let cells: Vec<CellIndex> = grid.reachable_cells().iter().copied().filter(|c| !exclude.contains(c)).collect();
    if n == 0 || n > cells.len() {
        return Err(Error::invalid(format!("cannot plan {n} targets over {} free cells", cells.len())));
    }
    let picked: Vec<CellIndex> = rand::seq::index::sample(rng, cells.len(), n)
        .into_iter()
        .map(|k| cells[k])
        .collect();
    routed(grid, origin, &picked)
}

/// The five W vertices, inset half a cell from the field edges:
/// left-top, quarter-bottom, middle-top, three-quarter-bottom, right-top.
pub fn w_vertices(grid: &FieldGrid) -> [Location; 5] {
    let o = grid.origin();
    let inset = 0.5 * grid.cell_size();
    let left = o.x + inset.min(0.5 * grid.width());
    let right = o.x + (grid.width() - inset).max(0.5 * grid.width());
    let bottom = o.y + inset.min(0.5 * grid.height());
    let top = o.y + (grid.height() - inset).max(0.5 * grid.height());
    let x_at = |f: f64| left + f * (right - left);
    [
        Location::new(x_at(0.0), top),
        Location::new(x_at(0.25), bottom),
        Location::new(x_at(0.5), top),
        Location::new(x_at(0.75), bottom),
        Location::new(x_at(1.0), top),
    ]
}

/// `n ≥ 5` waypoints evenly spaced by arc length along the W polyline,
/// snapped to reachable cells with duplicates collapsed.
///
/// The route follows the polyline, entered from whichever end is closer to
/// `origin`; reordering it would defeat the transect.
pub fn plan_w_shape(grid: &FieldGrid, n: usize, origin: Location) -> Result<Plan> {
    if n < 5 {
        return Err(Error::invalid(format!("W-shape needs at least 5 waypoints, got {n}")));
    }
    let vertices = w_vertices(grid);
    let seg_len: Vec<f64> = vertices.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let total: f64 = seg_len.iter().sum();

    let mut seen = HashSet::new();
    let mut route = Vec::with_capacity(n);
    for k in 0..n {
        let p = point_along(&vertices, &seg_len, total * k as f64 / (n - 1) as f64);
        let c = grid.snap(p);
        if seen.insert(c) {
            route.push(c);
        }
    }
    let first = grid.cell_center(route[0]).distance(&origin);
    let last = grid.cell_center(*route.last().expect("non-empty")).distance(&origin);
    if last < first {
        route.reverse();
    }
    Ok(Plan { route, origin })
}

fn point_along(vertices: &[Location], seg_len: &[f64], s: f64) -> Location {
    let mut left = s;
    for (k, &len) in seg_len.iter().enumerate() {
        if left <= len || k == seg_len.len() - 1 {
            let t = if len > 0.0 { (left / len).clamp(0.0, 1.0) } else { 0.0 };
            let (a, b) = (vertices[k], vertices[k + 1]);
            return Location::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        }
        left -= len;
    }
    vertices[vertices.len() - 1]
}

/// Axis-aligned rectangle in field coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn centroid(&self) -> Location {
        Location::new(self.x0 + 0.5 * self.w, self.y0 + 0.5 * self.h)
    }
}

/// Recursive longest-axis bisection into `n` parts. Each cut divides the
/// area in proportion to the part counts on either side, so all parts end
/// up with equal area. Square pieces are cut along x first.
pub fn split_rect(rect: Rect, n: usize) -> Vec<Rect> {
    let mut parts = Vec::with_capacity(n);
    split_into(rect, n, &mut parts);
    parts
}

fn split_into(r: Rect, n: usize, out: &mut Vec<Rect>) {
    if n <= 1 {
        out.push(r);
        return;
    }
    let lo = n / 2;
    let frac = lo as f64 / n as f64;
    let (a, b) = if r.w >= r.h {
        let wa = r.w * frac;
        (
            Rect { w: wa, ..r },
            Rect {
                x0: r.x0 + wa,
                w: r.w - wa,
                ..r
            },
        )
    } else {
        let ha = r.h * frac;
        (
            Rect { h: ha, ..r },
            Rect {
                y0: r.y0 + ha,
                h: r.h - ha,
                ..r
            },
        )
    };
    split_into(a, lo, out);
    split_into(b, n - lo, out);
}

/// One target per equal-area part of the field, at the reachable cell
/// nearest the part's centroid (the next-nearest free cell when two parts
/// snap to the same one), TSP-ordered.
pub fn plan_area_split(grid: &FieldGrid, n: usize, origin: Location) -> Result<Plan> {
    plan_area_split_excluding(grid, n, origin, &HashSet::new())
}

/// [`plan_area_split`] with the cells in `exclude` treated as taken.
pub fn plan_area_split_excluding(
    grid: &FieldGrid,
    n: usize,
    origin: Location,
    exclude: &HashSet<CellIndex>,
) -> Result<Plan> {
    let free = grid.reachable_cells().iter().filter(|c| !exclude.contains(c)).count();
    if n == 0 || n > free {
        return Err(Error::invalid(format!("cannot plan {n} targets over {free} free cells")));
    }
    let field = Rect {
        x0: grid.origin().x,
        y0: grid.origin().y,
        w: grid.width(),
        h: grid.height(),
    };
    let mut taken = exclude.clone();
    let mut targets = Vec::with_capacity(n);
    for part in split_rect(field, n) {
        let centroid = part.centroid();
        let own = grid.snap(centroid);
        let c = if taken.contains(&own) {
            grid.nearest_reachable(centroid, |c| taken.contains(&c))
                .expect("n does not exceed the free cell count")
        } else {
            own
        };
        taken.insert(c);
        targets.push(c);
    }
    routed(grid, origin, &targets)
}
