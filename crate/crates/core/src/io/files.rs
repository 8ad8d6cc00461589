//! CSV readers and writers.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exploration::tsp::path_length;
use crate::grid::{CellIndex, DepthProfile, FieldGrid, GridValues, LayerSpec, Location, Sample};
use crate::simulation::{ComparisonRow, RunRecord};
use crate::variogram::ExperimentalVariogram;

use super::format::{exact, sig9};

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(file))
}

fn write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .from_reader(file))
}

fn read_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            row,
            message: format!("{other:?}"),
        },
    }
}

fn parse_f64(path: &Path, row: usize, column: &str, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        row,
        message: format!("column `{column}`: `{text}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            row,
            message: format!("column `{column}` must be finite"),
        });
    }
    Ok(v)
}

/// Which of the two sample layouts a header declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SampleSchema {
    /// `v0..`: one value per layer.
    Layers(usize),
    /// `d0..`: raw readings at a fixed depth step.
    Profile(usize),
}

fn sample_schema(path: &Path, header: &csv::StringRecord) -> Result<SampleSchema> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 4 || cols[..3] != ["id", "x_m", "y_m"] {
        return Err(schema("header must start with `id,x_m,y_m` followed by value columns".into()));
    }
    let prefix = &cols[3][..1];
    if prefix != "v" && prefix != "d" {
        return Err(schema(format!("unknown value column `{}`", cols[3])));
    }
    for (k, c) in cols[3..].iter().enumerate() {
        if *c != format!("{prefix}{k}") {
            return Err(schema(format!("expected column `{prefix}{k}`, found `{c}`")));
        }
    }
    let n = cols.len() - 3;
    Ok(if prefix == "v" {
        SampleSchema::Layers(n)
    } else {
        SampleSchema::Profile(n)
    })
}

/// Reads samples in either layout: `id,x_m,y_m,v0,..,v{m-1}` (one value per
/// layer) or `id,x_m,y_m,d0,..,d{K-1}` (raw readings `depth_step_cm` apart,
/// aggregated into `spec`'s layers).
pub fn load_samples_csv(path: &Path, spec: &LayerSpec, depth_step_cm: Option<f64>) -> Result<Vec<Sample>> {
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| read_err(path, e))?.clone();
    let schema = sample_schema(path, &header)?;
    match schema {
        SampleSchema::Layers(n) if n != spec.count => {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("{n} layer columns, but {} layers are configured", spec.count),
            })
        }
        SampleSchema::Profile(_) if depth_step_cm.is_none() => {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: "raw profile columns need `layers.depth_step_cm` in the config".into(),
            })
        }
        _ => {}
    }

    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("row {row} has {} fields, header has {}", rec.len(), header.len()),
            });
        }
        let id: u64 = rec[0].trim().parse().map_err(|_| Error::Csv {
            path: path.to_path_buf(),
            row,
            message: format!("id `{}` is not a non-negative integer", &rec[0]),
        })?;
        if !seen.insert(id) {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                row,
                message: format!("duplicate sample id {id}"),
            });
        }
        let x = parse_f64(path, row, "x_m", &rec[1])?;
        let y = parse_f64(path, row, "y_m", &rec[2])?;
        let values = (3..rec.len())
            .map(|c| parse_f64(path, row, &header[c], &rec[c]))
            .collect::<Result<Vec<f64>>>()?;
        let at_row = |e: Error| Error::Csv {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        };
        let location = Location::new(x, y);
        let sample = match schema {
            SampleSchema::Layers(_) => Sample::from_layers(id, location, values),
            SampleSchema::Profile(_) => {
                let step = depth_step_cm.expect("checked above");
                DepthProfile::new(values, step).and_then(|p| Sample::from_profile(id, location, p, spec))
            }
        }
        .map_err(at_row)?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes samples in the per-layer layout.
pub fn write_samples_csv(samples: &[Sample], path: &Path) -> Result<()> {
    let m = samples.first().map_or(0, Sample::layer_count);
    if samples.iter().any(|s| s.layer_count() != m) {
        return Err(Error::invalid("samples disagree on the layer count"));
    }
    let mut w = create(path)?;
    let mut header = vec!["id".to_string(), "x_m".into(), "y_m".into()];
    header.extend((0..m).map(|k| format!("v{k}")));
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for s in samples {
        let mut rec = vec![s.id.to_string(), exact(s.location.x), exact(s.location.y)];
        rec.extend(s.layer_values.iter().map(|&v| exact(v)));
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Row-major grid: one line per `j`, one field per `i`, masked cells empty.
/// Values use the shortest exact representation, so reading the file back
/// gives the same bits.
pub fn export_grid_csv(values: &GridValues, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for row in values.rows() {
        let rec: Vec<String> = row.iter().map(|v| v.map(exact).unwrap_or_default()).collect();
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

pub fn load_grid_csv(path: &Path) -> Result<GridValues> {
    let mut rdr = reader(path, false)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let parsed = rec
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if f.trim().is_empty() {
                    Ok(None)
                } else {
                    parse_f64(path, row, &format!("i={i}"), f).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(parsed);
    }
    GridValues::from_rows(rows).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a reachability mask: one line per grid row, `1` (or `true`) for
/// reachable cells and `0` (or `false`) for masked ones.
pub fn load_mask_csv(path: &Path) -> Result<Vec<Vec<bool>>> {
    let mut rdr = reader(path, false)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let parsed = rec
            .iter()
            .map(|f| match f.trim() {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                other => Err(Error::Csv {
                    path: path.to_path_buf(),
                    row,
                    message: format!("mask value `{other}` is not 0/1"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(parsed);
    }
    Ok(rows)
}

/// `order,cell_i,cell_j,x_m,y_m`, `order` counting from 1.
pub fn write_plan_csv(route: &[CellIndex], grid: &FieldGrid, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["order", "cell_i", "cell_j", "x_m", "y_m"])
        .map_err(|e| write_err(path, e))?;
    for (k, &c) in route.iter().enumerate() {
        let p = grid.cell_center(c);
        w.write_record([(k + 1).to_string(), c.i.to_string(), c.j.to_string(), sig9(p.x), sig9(p.y)])
            .map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// `step,sample_id,x_m,y_m,path_m,mse,rmse,kv`, one line per step.
pub fn write_run_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["step", "sample_id", "x_m", "y_m", "path_m", "mse", "rmse", "kv"])
        .map_err(|e| write_err(path, e))?;
    for s in &record.steps {
        w.write_record([
            s.step.to_string(),
            s.sample.id.to_string(),
            sig9(s.sample.location.x),
            sig9(s.sample.location.y),
            sig9(s.path_m),
            sig9(s.mse),
            sig9(s.rmse),
            sig9(s.kv),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Long format: `strategy,budget,runs,mean_rmse_kpa,mean_path_m,mean_kv,mean_corr`
/// (`mean_corr` empty when undefined for every run).
pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["strategy", "budget", "runs", "mean_rmse_kpa", "mean_path_m", "mean_kv", "mean_corr"])
        .map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record([
            r.kind.key().to_string(),
            r.budget.to_string(),
            r.runs.to_string(),
            sig9(r.mean_rmse),
            sig9(r.mean_path_m),
            sig9(r.mean_kv),
            r.mean_correlation.map(sig9).unwrap_or_default(),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Wide table, one line per strategy and one column per budget (largest
/// first): `strategy,50,30,20,15` with `metric` of each cell, empty when `None`.
pub fn write_comparison_table(rows: &[ComparisonRow], metric: fn(&ComparisonRow) -> Option<f64>, path: &Path) -> Result<()> {
    let mut budgets: Vec<usize> = rows.iter().map(|r| r.budget).collect();
    budgets.sort_unstable_by(|a, b| b.cmp(a));
    budgets.dedup();
    let mut kinds = Vec::new();
    for r in rows {
        if !kinds.contains(&r.kind) {
            kinds.push(r.kind);
        }
    }
    let mut w = create(path)?;
    let mut header = vec!["strategy".to_string()];
    header.extend(budgets.iter().map(usize::to_string));
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for kind in kinds {
        let mut rec = vec![kind.label().to_string()];
        for &b in &budgets {
            let cell = rows.iter().find(|r| r.kind == kind && r.budget == b);
            rec.push(cell.and_then(metric).map(sig9).unwrap_or_default());
        }
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// `lag_m,gamma,pairs`.
pub fn write_variogram_csv(ev: &ExperimentalVariogram, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["lag_m", "gamma", "pairs"]).map_err(|e| write_err(path, e))?;
    for b in &ev.bins {
        w.write_record([sig9(b.lag), sig9(b.gamma), b.pairs.to_string()])
            .map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Recomputes a run's path length from its visited cells.
pub fn route_length(record: &RunRecord, grid: &FieldGrid) -> f64 {
    path_length(record.start, &record.route(), grid)
}

/// Writes a plain-text file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
