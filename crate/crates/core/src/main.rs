use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use soilmap::exploration::{StrategyConfig, StrategyKind};
use soilmap::grid::{layer_points, LayerSpec, Location};
use soilmap::io::config::{check_budget, truth_file_name, RunConfig};
use soilmap::io::files::write_text;
use soilmap::io::format::sig9;
use soilmap::io::{
    export_grid_csv, load_config, load_grid_csv, load_samples_csv, normalized_rmse_grids, write_comparison_csv,
    write_comparison_table, write_plan_csv, write_run_csv, write_samples_csv, write_variogram_csv,
};
use soilmap::simulation::{build_run_model, compare_strategies, run_exploration};
use soilmap::variogram::{experimental_semivariogram, fit_linear};
use soilmap::{Error, LayeredModel, Result};

#[derive(Parser)]
#[command(name = "soilmap", version, about = "Kriged soil-compaction maps and sampling-route experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the bounded linear variogram to one layer of a sample file.
    FitVariogram {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Layer layout and binning defaults come from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long)]
        max_lag: Option<f64>,
        /// Write the experimental bins here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Krige every layer of a sample file over the configured field.
    Krige {
        #[arg(long)]
        samples: PathBuf,
        /// Config describing the field grid, layers and variogram options.
        #[arg(long, visible_alias = "grid")]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one exploration strategy on the configured surrogate.
    Explore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Strategy key; defaults to the first configured strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Defaults to the largest configured budget.
        #[arg(long)]
        budget: Option<i64>,
        /// Defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_sd: Option<f64>,
        /// Keep the prior variogram instead of refitting.
        #[arg(long)]
        freeze: bool,
        /// Also write the mean-KV grid after every step.
        #[arg(long)]
        trace_kv: bool,
    },
    /// Run every configured strategy, budget and seed and tabulate the means.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Replace the configured seeds with 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long)]
        freeze: bool,
    },
    /// Write the configured ground-truth layers as grids.
    GenSurrogate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-layer RMSE between two sets of estimate grids, divided by the mean of the first.
    ReportNrmse {
        /// Directory holding `estimate_0.csv`, `estimate_1.csv`, ...
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::FitVariogram {
            samples,
            layer,
            config,
            bin_width,
            max_lag,
            out,
        } => fit_variogram(&samples, layer, config.as_deref(), bin_width, max_lag, out.as_deref()),
        Command::Krige { samples, config, out } => krige(&samples, &config, &out),
        Command::Explore {
            config,
            out,
            strategy,
            budget,
            seed,
            noise_sd,
            freeze,
            trace_kv,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, noise_sd, freeze)?;
            explore(&cfg, &out, strategy.as_deref(), budget, seed, trace_kv)
        }
        Command::Compare {
            config,
            out,
            seeds,
            noise_sd,
            freeze,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, noise_sd, freeze)?;
            if let Some(n) = seeds {
                if n == 0 {
                    return Err(Error::invalid("--seeds must be at least 1"));
                }
                cfg.seeds = (0..n).collect();
            }
            compare(&cfg, &out)
        }
        Command::GenSurrogate { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let (Some(s), soilmap::io::SurrogateSource::Synthetic { seed, .. }) = (seed, &mut cfg.surrogate) {
                *seed = s;
            }
            let field = cfg.build_surrogate()?;
            ensure_dir(&out)?;
            for (k, layer) in field.layers().iter().enumerate() {
                export_grid_csv(layer, &out.join(truth_file_name(k)))?;
            }
            Ok(())
        }
        Command::ReportNrmse { model_a, model_b, out } => report_nrmse(&model_a, &model_b, out.as_deref()),
    }
}

fn apply_overrides(cfg: &mut RunConfig, noise_sd: Option<f64>, freeze: bool) -> Result<()> {
    if let Some(sd) = noise_sd {
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(Error::invalid(format!("--noise-sd must be >= 0, got {sd}")));
        }
        cfg.options.noise_sd = sd;
    }
    cfg.options.freeze |= freeze;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn fit_variogram(
    samples: &Path,
    layer: usize,
    config: Option<&Path>,
    bin_width: Option<f64>,
    max_lag: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = config.map(load_config).transpose()?;
    let spec = match &cfg {
        Some(c) => c.layers,
        None => LayerSpec::new(8, 5.0)?,
    };
    let depth_step = cfg.as_ref().and_then(|c| c.depth_step_cm);
    let samples = load_samples_csv(samples, &spec, depth_step)?;
    if layer >= spec.count {
        return Err(Error::invalid(format!("--layer {layer} but only {} layers", spec.count)));
    }
    let points = layer_points(&samples, layer)?;
    let (default_bin, default_lag) = match &cfg {
        Some(c) => (c.options.bin_width, c.options.max_lag),
        None => (5.0, 0.5 * bounding_diagonal(points.iter().map(|p| p.0))),
    };
    let ev = experimental_semivariogram(&points, bin_width.unwrap_or(default_bin), max_lag.unwrap_or(default_lag))?;
    if let Some(out) = out {
        write_variogram_csv(&ev, out)?;
    }
    let fit = fit_linear(&ev)?;
    println!("nugget,range,sill,weighted_sse,degenerate");
    println!(
        "{},{},{},{},{}",
        sig9(fit.params.nugget),
        sig9(fit.params.range),
        sig9(fit.params.sill),
        sig9(fit.weighted_sse),
        fit.degenerate
    );
    Ok(())
}

fn bounding_diagonal(locs: impl Iterator<Item = Location>) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for l in locs {
        x0 = x0.min(l.x);
        y0 = y0.min(l.y);
        x1 = x1.max(l.x);
        y1 = y1.max(l.y);
    }
    (x1 - x0).hypot(y1 - y0)
}

fn write_model(model: &LayeredModel, out: &Path) -> Result<()> {
    for (k, layer) in model.layers.iter().enumerate() {
        export_grid_csv(&layer.estimates, &out.join(format!("estimate_{k}.csv")))?;
        export_grid_csv(&layer.variances, &out.join(format!("variance_{k}.csv")))?;
    }
    export_grid_csv(&model.mean_kv_grid, &out.join("mean_kv.csv"))?;
    let mut text = String::from("layer,nugget,range,sill\n");
    for (k, layer) in model.layers.iter().enumerate() {
        let p = layer.params;
        text.push_str(&format!("{k},{},{},{}\n", sig9(p.nugget), sig9(p.range), sig9(p.sill)));
    }
    write_text(&out.join("variograms.csv"), &text)
}

fn krige(samples: &Path, config: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let samples = load_samples_csv(samples, &cfg.layers, cfg.depth_step_cm)?;
    let (model, _, _) = build_run_model(&samples, &cfg.grid, &cfg.layers, &cfg.options)?;
    ensure_dir(out)?;
    write_model(&model, out)
}

fn parse_strategy(key: &str) -> Result<StrategyKind> {
    StrategyKind::ALL.into_iter().find(|k| k.key() == key).ok_or_else(|| {
        let keys: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.key()).collect();
        Error::invalid(format!("unknown strategy `{key}`; expected one of {}", keys.join(", ")))
    })
}

fn explore(
    cfg: &RunConfig,
    out: &Path,
    strategy: Option<&str>,
    budget: Option<i64>,
    seed: Option<u64>,
    trace_kv: bool,
) -> Result<()> {
    let template = match strategy {
        Some(key) => {
            let kind = parse_strategy(key)?;
            cfg.strategies
                .iter()
                .find(|s| s.kind == kind)
                .copied()
                .unwrap_or_else(|| StrategyConfig::new(kind, 0, 0))
        }
        None => cfg.strategies[0],
    };
    let budget = match budget {
        Some(b) => check_budget(b, &cfg.grid)?,
        None => *cfg.budgets.iter().max().expect("budgets are non-empty"),
    };
    let strategy = StrategyConfig {
        budget,
        seed: seed.unwrap_or(cfg.seeds[0]),
        ..template
    };
    let mut options = cfg.options.clone();
    options.keep_kv_grids = trace_kv;

    let field = cfg.build_surrogate()?;
    let record = run_exploration(&strategy, &field, &cfg.layers, &options)?;
    ensure_dir(out)?;
    write_run_csv(&record, &out.join("run.csv"))?;
    write_plan_csv(&record.route(), &cfg.grid, &out.join("route.csv"))?;
    write_samples_csv(&record.samples(), &out.join("samples.csv"))?;
    write_model(&record.final_model, out)?;
    for (t, grid) in record.kv_grids.iter().enumerate() {
        export_grid_csv(grid, &out.join(format!("mean_kv_step{}.csv", t + 1)))?;
    }
    println!(
        "{} budget={} seed={} rmse={} path_m={} kv={}",
        strategy.kind.key(),
        strategy.budget,
        strategy.seed,
        sig9(record.final_rmse()),
        sig9(record.path_length()),
        sig9(record.final_kv())
    );
    Ok(())
}

fn compare(cfg: &RunConfig, out: &Path) -> Result<()> {
    let field = cfg.build_surrogate()?;
    let rows = compare_strategies(&cfg.strategies, &cfg.budgets, &cfg.seeds, &field, &cfg.layers, &cfg.options)?;
    ensure_dir(out)?;
    write_comparison_csv(&rows, &out.join("comparison.csv"))?;
    write_comparison_table(&rows, |r| Some(r.mean_rmse), &out.join("rmse_table.csv"))?;
    write_comparison_table(&rows, |r| Some(r.mean_path_m), &out.join("path_table.csv"))?;
    write_comparison_table(&rows, |r| Some(r.mean_kv), &out.join("kv_table.csv"))?;
    write_comparison_table(&rows, |r| r.mean_correlation, &out.join("corr_table.csv"))?;
    Ok(())
}

fn load_estimates(dir: &Path) -> Result<Vec<soilmap::GridValues>> {
    let mut layers = Vec::new();
    loop {
        let path = dir.join(format!("estimate_{}.csv", layers.len()));
        if !path.exists() {
            break;
        }
        layers.push(load_grid_csv(&path)?);
    }
    if layers.is_empty() {
        return Err(Error::NotFound(dir.join("estimate_0.csv")));
    }
    Ok(layers)
}

fn report_nrmse(a: &Path, b: &Path, out: Option<&Path>) -> Result<()> {
    let rows = normalized_rmse_grids(&load_estimates(a)?, &load_estimates(b)?)?;
    let mut text = String::from("layer,rmse,mean_a,nrmse\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.layer,
            sig9(r.rmse),
            sig9(r.mean_a),
            r.normalized.map(sig9).unwrap_or_default()
        ));
    }
    for r in rows.iter().filter(|r| r.normalized.is_none()) {
        eprintln!("warning: layer {} has zero mean; normalized RMSE undefined", r.layer);
    }
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
