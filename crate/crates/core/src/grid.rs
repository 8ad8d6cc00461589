//! Field geometry, grid discretization, penetrometer profiles and depth layers.
//!
//! Coordinates are field-local planar metres. A [`FieldGrid`] covers a
//! `width × height` rectangle with square cells; the last row/column may be
//! partial, in which case its centre is the centre of the in-field part.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Planar position in metres (easting, northing).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Cell address: `i` along x (column), `j` along y (row).
///
/// Ordering is lexicographic on `(j, i)`, i.e. row-major, and is the
/// tie-break order used everywhere a choice between cells is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
}

impl CellIndex {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl Ord for CellIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.j, self.i).cmp(&(other.j, other.i))
    }
}

impl PartialOrd for CellIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// Masked rectangular cell grid over the field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    origin: Location,
    width: f64,
    height: f64,
    cell_size: f64,
    nx: usize,
    ny: usize,
    reachable: Vec<bool>,
    cells: Vec<CellIndex>,
    slots: Vec<Option<usize>>,
}

impl FieldGrid {
    /// Builds a grid with `ceil(width / cell_size) × ceil(height / cell_size)`
    /// cells. `mask` is indexed `[j][i]` (one row per y-index); `None` makes
    /// every cell reachable.
    pub fn new(width: f64, height: f64, cell_size: f64, mask: Option<&[Vec<bool>]>) -> Result<Self> {
        Self::with_origin(Location::default(), width, height, cell_size, mask)
    }

    pub fn with_origin(
        origin: Location,
        width: f64,
        height: f64,
        cell_size: f64,
        mask: Option<&[Vec<bool>]>,
    ) -> Result<Self> {
        for (name, v) in [("width", width), ("height", height), ("cell_size", cell_size)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        let nx = cells_along(width, cell_size);
        let ny = cells_along(height, cell_size);
        let reachable = match mask {
            None => vec![true; nx * ny],
            Some(rows) => {
                if rows.len() != ny || rows.iter().any(|r| r.len() != nx) {
                    return Err(Error::invalid(format!(
                        "mask shape does not match the {nx}x{ny} grid"
                    )));
                }
                rows.iter().flatten().copied().collect()
            }
        };
        let mut slots = vec![None; nx * ny];
        let mut cells = Vec::new();
        for (k, &r) in reachable.iter().enumerate() {
            if r {
                slots[k] = Some(cells.len());
                cells.push(CellIndex::new(k % nx, k / nx));
            }
        }
        if cells.is_empty() {
            return Err(Error::invalid("mask leaves no reachable cell"));
        }
        Ok(Self {
            origin,
            width,
            height,
            cell_size,
            nx,
            ny,
            reachable,
            cells,
            slots,
        })
    }

    pub fn origin(&self) -> Location {
        self.origin
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn reachable_count(&self) -> usize {
        self.cells.len()
    }

    /// Reachable cells in `(j, i)` order.
    pub fn reachable_cells(&self) -> &[CellIndex] {
        &self.cells
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.i < self.nx && c.j < self.ny
    }

    pub fn is_reachable(&self, c: CellIndex) -> bool {
        self.contains(c) && self.reachable[self.linear(c)]
    }

    /// Row-major index `j * nx + i`.
    pub fn linear(&self, c: CellIndex) -> usize {
        c.j * self.nx + c.i
    }

    /// Position of a reachable cell within [`reachable_cells`](Self::reachable_cells).
    pub fn slot(&self, c: CellIndex) -> Option<usize> {
        if self.contains(c) {
            self.slots[self.linear(c)]
        } else {
            None
        }
    }

    pub fn cell_center(&self, c: CellIndex) -> Location {
        let axis = |k: usize, extent: f64| {
            let lo = k as f64 * self.cell_size;
            let hi = ((k + 1) as f64 * self.cell_size).min(extent);
            0.5 * (lo + hi)
        };
        Location::new(
            self.origin.x + axis(c.i, self.width),
            self.origin.y + axis(c.j, self.height),
        )
    }

    /// Cell containing `loc`. Interior boundaries belong to the higher-index
    /// cell; the field's max edge belongs to the last cell.
    pub fn cell_of(&self, loc: Location) -> Result<CellIndex> {
        let dx = loc.x - self.origin.x;
        let dy = loc.y - self.origin.y;
        if !(loc.is_finite() && (0.0..=self.width).contains(&dx) && (0.0..=self.height).contains(&dy)) {
            return Err(Error::OutOfBounds { x: loc.x, y: loc.y });
        }
        let i = ((dx / self.cell_size).floor() as usize).min(self.nx - 1);
        let j = ((dy / self.cell_size).floor() as usize).min(self.ny - 1);
        Ok(CellIndex::new(i, j))
    }

    /// Reachable cell whose centre is nearest to `loc`, skipping cells for
    /// which `exclude` returns true. Ties go to the lowest cell index.
    pub fn nearest_reachable<F>(&self, loc: Location, exclude: F) -> Option<CellIndex>
    where
        F: Fn(CellIndex) -> bool,
    {
        let mut best: Option<(f64, CellIndex)> = None;
        for &c in &self.cells {
            if exclude(c) {
                continue;
            }
            let d = self.cell_center(c).distance(&loc);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| c)
    }

    /// Snaps a location to its own cell when reachable, else to the nearest
    /// reachable cell. Locations outside the field are clamped first.
    pub fn snap(&self, loc: Location) -> CellIndex {
        let clamped = Location::new(
            loc.x.clamp(self.origin.x, self.origin.x + self.width),
            loc.y.clamp(self.origin.y, self.origin.y + self.height),
        );
        match self.cell_of(clamped) {
            Ok(c) if self.is_reachable(c) => c,
            _ => self
                .nearest_reachable(clamped, |_| false)
                .expect("grid has at least one reachable cell"),
        }
    }

    /// Dense grid with `None` at every cell, matching this grid's shape.
    pub fn empty_values(&self) -> GridValues {
        GridValues::new(self.nx, self.ny)
    }

    /// Scatters per-reachable-cell values (in [`reachable_cells`](Self::reachable_cells)
    /// order) into a dense grid.
    pub fn scatter(&self, values: &[f64]) -> GridValues {
        assert_eq!(values.len(), self.cells.len());
        let mut out = self.empty_values();
        for (&c, &v) in self.cells.iter().zip(values) {
            out.set(c, v);
        }
        out
    }

    /// Gathers reachable-cell values from a dense grid, failing on any hole.
    pub fn gather(&self, values: &GridValues) -> Result<Vec<f64>> {
        if values.nx() != self.nx || values.ny() != self.ny {
            return Err(Error::invalid(format!(
                "grid values are {}x{}, field grid is {}x{}",
                values.nx(),
                values.ny(),
                self.nx,
                self.ny
            )));
        }
        self.cells
            .iter()
            .map(|&c| {
                values
                    .get(c)
                    .ok_or_else(|| Error::invalid(format!("missing value at reachable cell {c}")))
            })
            .collect()
    }
}

fn cells_along(extent: f64, cell: f64) -> usize {
    // Shave off round-off so that exact multiples are not bumped up a cell.
    let n = extent / cell;
    let rounded = n.round();
    let n = if (n - rounded).abs() < 1e-9 { rounded } else { n.ceil() };
    (n as usize).max(1)
}

/// Dense `nx × ny` grid of optional values, row-major by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    nx: usize,
    ny: usize,
    values: Vec<Option<f64>>,
}

impl GridValues {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            values: vec![None; nx * ny],
        }
    }

    /// Builds from rows indexed `[j][i]`.
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let ny = rows.len();
        let nx = rows.first().map_or(0, Vec::len);
        if ny == 0 || nx == 0 || rows.iter().any(|r| r.len() != nx) {
            return Err(Error::invalid("grid rows must be non-empty and of equal length"));
        }
        Ok(Self {
            nx,
            ny,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, c: CellIndex) -> Option<f64> {
        if c.i < self.nx && c.j < self.ny {
            self.values[c.j * self.nx + c.i]
        } else {
            None
        }
    }

    pub fn set(&mut self, c: CellIndex, v: f64) {
        assert!(c.i < self.nx && c.j < self.ny, "cell {c} outside grid");
        self.values[c.j * self.nx + c.i] = Some(v);
    }

    pub fn row(&self, j: usize) -> &[Option<f64>] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> {
        self.values.chunks(self.nx)
    }

    /// Every present value, row-major.
    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }
}

/// Depth-ordered penetrometer readings (kPa) at a uniform depth step.
///
/// Reading `r` is taken at depth `r * depth_step_cm`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthProfile {
    readings: Vec<f64>,
    depth_step_cm: f64,
}

impl DepthProfile {
    pub fn new(readings: Vec<f64>, depth_step_cm: f64) -> Result<Self> {
        if readings.is_empty() {
            return Err(Error::invalid("depth profile has no readings"));
        }
        if !(depth_step_cm.is_finite() && depth_step_cm > 0.0) {
            return Err(Error::invalid(format!("depth step must be positive, got {depth_step_cm}")));
        }
        if let Some(bad) = readings.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("profile reading {bad} is not a finite non-negative value")));
        }
        Ok(Self {
            readings,
            depth_step_cm,
        })
    }

    /// Profile sampled over `max_depth_cm` with evenly spaced readings.
    pub fn over_depth(readings: Vec<f64>, max_depth_cm: f64) -> Result<Self> {
        let n = readings.len().max(1) as f64;
        Self::new(readings, max_depth_cm / n)
    }

    pub fn readings(&self) -> &[f64] {
        &self.readings
    }

    pub fn depth_step_cm(&self) -> f64 {
        self.depth_step_cm
    }

    pub fn max_depth_cm(&self) -> f64 {
        self.readings.len() as f64 * self.depth_step_cm
    }
}

/// `count` contiguous layers of `thickness_cm`, starting at the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub count: usize,
    pub thickness_cm: f64,
}

impl LayerSpec {
    pub fn new(count: usize, thickness_cm: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("layer count must be at least 1"));
        }
        if !(thickness_cm.is_finite() && thickness_cm > 0.0) {
            return Err(Error::invalid(format!("layer thickness must be positive, got {thickness_cm}")));
        }
        Ok(Self { count, thickness_cm })
    }

    pub fn total_depth_cm(&self) -> f64 {
        self.count as f64 * self.thickness_cm
    }

    /// Depth interval `[top, bottom)` of layer `k` in cm.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (k as f64 * self.thickness_cm, (k + 1) as f64 * self.thickness_cm)
    }
}

/// Mean of the readings falling in each layer's `[k·t, (k+1)·t)` interval.
/// Readings exactly on an interior boundary go to the deeper layer; readings
/// below the deepest layer are ignored.
pub fn aggregate_layers(profile: &DepthProfile, spec: &LayerSpec) -> Result<Vec<f64>> {
    let max_depth = profile.max_depth_cm();
    if spec.total_depth_cm() > max_depth * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "{} layers of {} cm reach {} cm, deeper than the {} cm profile",
            spec.count,
            spec.thickness_cm,
            spec.total_depth_cm(),
            max_depth
        )));
    }
    let mut sums = vec![0.0; spec.count];
    let mut counts = vec![0usize; spec.count];
    for (r, &v) in profile.readings.iter().enumerate() {
        let depth = r as f64 * profile.depth_step_cm;
        // Snap ratios within round-off of an integer so boundary readings
        // land in the deeper layer.
        let ratio = depth / spec.thickness_cm;
        let k = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round()
        } else {
            ratio.floor()
        } as usize;
        if k < spec.count {
            sums[k] += v;
            counts[k] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(k, (&s, &n))| {
            if n == 0 {
                Err(Error::invalid(format!(
                    "layer {k} contains no reading; the profile depth step is coarser than the layer thickness"
                )))
            } else {
                Ok(s / n as f64)
            }
        })
        .collect()
}

/// A geo-tagged observation aggregated into depth layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub location: Location,
    /// Raw readings when the sample came from a penetrometer profile.
    pub profile: Option<DepthProfile>,
    pub layer_values: Vec<f64>,
}

impl Sample {
    pub fn from_layers(id: u64, location: Location, layer_values: Vec<f64>) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::invalid(format!("sample {id} has a non-finite location")));
        }
        if layer_values.is_empty() || layer_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {id} needs finite layer values")));
        }
        Ok(Self {
            id,
            location,
            profile: None,
            layer_values,
        })
    }

    pub fn from_profile(id: u64, location: Location, profile: DepthProfile, spec: &LayerSpec) -> Result<Self> {
        let layer_values = aggregate_layers(&profile, spec)?;
        let mut sample = Self::from_layers(id, location, layer_values)?;
        sample.profile = Some(profile);
        Ok(sample)
    }

    pub fn layer_count(&self) -> usize {
        self.layer_values.len()
    }
}

/// `(location, value)` pairs of one depth layer across samples.
pub fn layer_points(samples: &[Sample], layer: usize) -> Result<Vec<(Location, f64)>> {
    samples
        .iter()
        .map(|s| {
            s.layer_values
                .get(layer)
                .map(|&v| (s.location, v))
                .ok_or_else(|| Error::invalid(format!("sample {} has no layer {layer}", s.id)))
        })
        .collect()
}
