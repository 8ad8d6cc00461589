//! C ABI over `soilmap`.
//!
//! Every fallible function returns a [`SoilmapStatus`]; on failure the
//! message is available from [`soilmap_last_error_message`] on the same
//! thread. Objects are opaque handles created by `*_new` and
//! `soilmap_run_explore` and released with the matching `*_free`. Panics never cross
//! the boundary; they are reported as [`SoilmapStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use soilmap::exploration::{StrategyConfig, StrategyKind};
use soilmap::grid::{CellIndex, FieldGrid, Location};
use soilmap::io::{load_config, write_run_csv};
use soilmap::kriging::KrigingSystem;
use soilmap::simulation::{run_exploration, RunRecord};
use soilmap::variogram::{experimental_semivariogram, fit_linear, VariogramParams};
use soilmap::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoilmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    InsufficientData = 4,
    SingularMatrix = 5,
    NegativeVariance = 6,
    Exhausted = 7,
    Numeric = 8,
    Io = 9,
    NotFound = 10,
    Parse = 11,
    Config = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Bounded linear variogram: nugget (kPa²), range (m), sill (kPa²).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilmapVariogram {
    pub nugget: f64,
    pub range: f64,
    pub sill: f64,
}

/// Field geometry and reachability mask.
pub struct SoilmapGrid {
    grid: FieldGrid,
}

/// Ordinary kriging model for one layer.
pub struct SoilmapModel {
    system: KrigingSystem,
    values: Vec<f64>,
}

/// Completed exploration run.
pub struct SoilmapRun {
    record: RunRecord,
    grid: FieldGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SoilmapStatus {
    match e.root() {
        Error::InvalidArgument(_) => SoilmapStatus::InvalidArgument,
        Error::OutOfBounds { .. } => SoilmapStatus::OutOfBounds,
        Error::InsufficientData { .. } => SoilmapStatus::InsufficientData,
        Error::SingularMatrix => SoilmapStatus::SingularMatrix,
        Error::NegativeVariance(_) => SoilmapStatus::NegativeVariance,
        Error::Exhausted => SoilmapStatus::Exhausted,
        Error::UndefinedCorrelation(_) | Error::Generation(_) => SoilmapStatus::Numeric,
        Error::Io { .. } => SoilmapStatus::Io,
        Error::NotFound(_) => SoilmapStatus::NotFound,
        Error::Csv { .. } | Error::Schema { .. } | Error::ConfigParse(_) => SoilmapStatus::Parse,
        Error::ConfigInvalid { .. } => SoilmapStatus::Config,
        Error::AtCell { .. } | Error::AtStep { .. } => unreachable!("root strips context"),
    }
}

struct Failure(SoilmapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(SoilmapStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SoilmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            SoilmapStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            SoilmapStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SoilmapStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))?;
    Ok(Path::new(s))
}

fn locations(xs: &[f64], ys: &[f64]) -> Vec<Location> {
    xs.iter().zip(ys).map(|(&x, &y)| Location::new(x, y)).collect()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn soilmap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a grid with its origin at (0, 0). `mask` is `nx * ny` row-major
/// bytes (non-zero = reachable) or null for a fully reachable field.
///
/// # Safety
/// `mask` must point to `mask_len` readable bytes when non-null; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn soilmap_grid_new(
    width_m: f64,
    height_m: f64,
    cell_size_m: f64,
    mask: *const u8,
    mask_len: usize,
    out_grid: *mut *mut SoilmapGrid,
) -> SoilmapStatus {
    guard(|| {
        let out_grid = out(out_grid, "out_grid")?;
        let grid = if mask.is_null() {
            FieldGrid::new(width_m, height_m, cell_size_m, None)?
        } else {
            let probe = FieldGrid::new(width_m, height_m, cell_size_m, None)?;
            let (nx, ny) = (probe.nx(), probe.ny());
            if mask_len != nx * ny {
                return Err(Failure(
                    SoilmapStatus::InvalidArgument,
                    format!("mask has {mask_len} entries, grid has {nx}x{ny}"),
                ));
            }
            let bytes = slice(mask, mask_len, "mask")?;
            let rows: Vec<Vec<bool>> = bytes.chunks(nx).map(|r| r.iter().map(|&b| b != 0).collect()).collect();
            FieldGrid::new(width_m, height_m, cell_size_m, Some(&rows))?
        };
        *out_grid = Box::into_raw(Box::new(SoilmapGrid { grid }));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`soilmap_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn soilmap_grid_free(grid: *mut SoilmapGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Writes the column and row counts and the number of reachable cells.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn soilmap_grid_dims(
    grid: *const SoilmapGrid,
    nx: *mut usize,
    ny: *mut usize,
    reachable: *mut usize,
) -> SoilmapStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.grid;
        *out(nx, "nx")? = g.nx();
        *out(ny, "ny")? = g.ny();
        *out(reachable, "reachable")? = g.reachable_count();
        Ok(())
    })
}

/// Fits the bounded linear variogram to scattered values.
///
/// # Safety
/// `xs`, `ys`, `values` must each hold `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn soilmap_fit_variogram(
    xs: *const f64,
    ys: *const f64,
    values: *const f64,
    n: usize,
    bin_width_m: f64,
    max_lag_m: f64,
    out_params: *mut SoilmapVariogram,
) -> SoilmapStatus {
    guard(|| {
        let out_params = out(out_params, "out_params")?;
        let locs = locations(slice(xs, n, "xs")?, slice(ys, n, "ys")?);
        let points: Vec<(Location, f64)> = locs.into_iter().zip(slice(values, n, "values")?.iter().copied()).collect();
        let ev = experimental_semivariogram(&points, bin_width_m, max_lag_m)?;
        let p = fit_linear(&ev)?.params;
        *out_params = SoilmapVariogram {
            nugget: p.nugget,
            range: p.range,
            sill: p.sill,
        };
        Ok(())
    })
}

/// Builds an ordinary kriging model from `n` samples.
///
/// # Safety
/// `xs`, `ys`, `values` must each hold `n` readable doubles; `out_model`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn soilmap_model_new(
    xs: *const f64,
    ys: *const f64,
    values: *const f64,
    n: usize,
    params: SoilmapVariogram,
    out_model: *mut *mut SoilmapModel,
) -> SoilmapStatus {
    guard(|| {
        let out_model = out(out_model, "out_model")?;
        let locs = locations(slice(xs, n, "xs")?, slice(ys, n, "ys")?);
        let values = slice(values, n, "values")?.to_vec();
        let params = VariogramParams::new(params.nugget, params.range, params.sill)?;
        let system = KrigingSystem::new(&locs, params)?;
        *out_model = Box::into_raw(Box::new(SoilmapModel { system, values }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`soilmap_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn soilmap_model_free(model: *mut SoilmapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Kriged estimate and variance at `m` target points.
///
/// # Safety
/// `xs`, `ys` must hold `m` readable doubles; `estimates` and `variances`
/// must hold `m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn soilmap_model_predict(
    model: *const SoilmapModel,
    xs: *const f64,
    ys: *const f64,
    m: usize,
    estimates: *mut f64,
    variances: *mut f64,
) -> SoilmapStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let targets = locations(slice(xs, m, "xs")?, slice(ys, m, "ys")?);
        if m > 0 && (estimates.is_null() || variances.is_null()) {
            return Err(null("estimates/variances"));
        }
        let predictions = model.system.predict_many(&targets, &model.values)?;
        for (k, (e, v)) in predictions.into_iter().enumerate() {
            *estimates.add(k) = e;
            *variances.add(k) = v;
        }
        Ok(())
    })
}

/// Runs one exploration strategy described by a TOML config file.
/// `strategy` is a key such as `"adaptive_greedy"`.
///
/// # Safety
/// `config_path` and `strategy` must be NUL-terminated strings;
/// `out_run` must be valid.
#[no_mangle]
pub unsafe extern "C" fn soilmap_run_explore(
    config_path: *const c_char,
    strategy: *const c_char,
    budget: usize,
    seed: u64,
    out_run: *mut *mut SoilmapRun,
) -> SoilmapStatus {
    guard(|| {
        let out_run = out(out_run, "out_run")?;
        let cfg = load_config(path_arg(config_path, "config_path")?)?;
        let key = path_arg(strategy, "strategy")?.to_string_lossy().into_owned();
        let kind = StrategyKind::ALL
            .into_iter()
            .find(|k| k.key() == key)
            .ok_or_else(|| Failure(SoilmapStatus::InvalidArgument, format!("unknown strategy `{key}`")))?;
        let template = cfg
            .strategies
            .iter()
            .find(|s| s.kind == kind)
            .copied()
            .unwrap_or_else(|| StrategyConfig::new(kind, 0, 0));
        let strategy = StrategyConfig { budget, seed, ..template };
        let field = cfg.build_surrogate()?;
        let record = run_exploration(&strategy, &field, &cfg.layers, &cfg.options)?;
        *out_run = Box::into_raw(Box::new(SoilmapRun {
            record,
            grid: cfg.grid,
        }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`soilmap_run_explore`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn soilmap_run_free(run: *mut SoilmapRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Headline numbers of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilmapRunSummary {
    pub steps: usize,
    pub final_rmse: f64,
    pub path_m: f64,
    pub final_kv: f64,
}

/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn soilmap_run_summary(run: *const SoilmapRun, summary: *mut SoilmapRunSummary) -> SoilmapStatus {
    guard(|| {
        let r = &handle(run, "run")?.record;
        *out(summary, "summary")? = SoilmapRunSummary {
            steps: r.steps.len(),
            final_rmse: r.final_rmse(),
            path_m: r.path_length(),
            final_kv: r.final_kv(),
        };
        Ok(())
    })
}

/// Copies the visited cells' centre coordinates into `xs`/`ys`. Fails with
/// `BufferTooSmall` when `capacity` is below the step count, which is
/// written to `len` either way.
///
/// # Safety
/// `xs` and `ys` must hold `capacity` writable doubles; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn soilmap_run_route(
    run: *const SoilmapRun,
    xs: *mut f64,
    ys: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> SoilmapStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let route: Vec<CellIndex> = run.record.route();
        *out(len, "len")? = route.len();
        if capacity < route.len() {
            return Err(Failure(
                SoilmapStatus::BufferTooSmall,
                format!("route has {} points, buffer holds {capacity}", route.len()),
            ));
        }
        if !route.is_empty() && (xs.is_null() || ys.is_null()) {
            return Err(null("xs/ys"));
        }
        for (k, &c) in route.iter().enumerate() {
            let p = run.grid.cell_center(c);
            *xs.add(k) = p.x;
            *ys.add(k) = p.y;
        }
        Ok(())
    })
}

/// Writes the per-step `run.csv` table.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn soilmap_run_write_csv(run: *const SoilmapRun, path: *const c_char) -> SoilmapStatus {
    guard(|| {
        let run = handle(run, "run")?;
        write_run_csv(&run.record, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn soilmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
