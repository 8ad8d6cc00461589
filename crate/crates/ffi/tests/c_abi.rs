use std::ffi::{CStr, CString};
use std::ptr;

use soilmap_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(soilmap_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

const DEMO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/configs/demo.toml");

#[test]
fn grid_handle_reports_dims_and_mask() {
    let mut g = ptr::null_mut();
    let mask = [1u8, 0, 1, 1, 1, 1];
    let st = unsafe { soilmap_grid_new(15.0, 10.0, 5.0, mask.as_ptr(), mask.len(), &mut g) };
    assert_eq!(st, SoilmapStatus::Ok, "{}", last_error());
    let (mut nx, mut ny, mut r) = (0, 0, 0);
    assert_eq!(unsafe { soilmap_grid_dims(g, &mut nx, &mut ny, &mut r) }, SoilmapStatus::Ok);
    assert_eq!((nx, ny, r), (3, 2, 5));
    unsafe { soilmap_grid_free(g) };
}

#[test]
fn bad_arguments_map_to_status_codes() {
    let mut g = ptr::null_mut();
    let st = unsafe { soilmap_grid_new(10.0, 10.0, -5.0, ptr::null(), 0, &mut g) };
    assert_eq!(st, SoilmapStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert!(g.is_null());

    let st = unsafe { soilmap_grid_new(10.0, 10.0, 5.0, [1u8].as_ptr(), 1, &mut g) };
    assert_eq!(st, SoilmapStatus::InvalidArgument);
    assert!(last_error().contains("mask"), "{}", last_error());

    let st = unsafe { soilmap_grid_new(10.0, 10.0, 5.0, ptr::null(), 0, ptr::null_mut()) };
    assert_eq!(st, SoilmapStatus::NullPointer);

    let (mut nx, mut ny, mut r) = (0, 0, 0);
    assert_eq!(
        unsafe { soilmap_grid_dims(ptr::null(), &mut nx, &mut ny, &mut r) },
        SoilmapStatus::NullPointer
    );
    // Freeing null is a no-op.
    unsafe {
        soilmap_grid_free(ptr::null_mut());
        soilmap_model_free(ptr::null_mut());
        soilmap_run_free(ptr::null_mut());
    }
}

#[test]
fn kriging_model_interpolates_samples() {
    let xs = [0.0, 10.0, 0.0, 10.0];
    let ys = [0.0, 0.0, 10.0, 10.0];
    let vs = [1.0, 2.0, 3.0, 4.0];
    let params = SoilmapVariogram {
        nugget: 0.0,
        range: 30.0,
        sill: 5.0,
    };
    let mut m = ptr::null_mut();
    let st = unsafe { soilmap_model_new(xs.as_ptr(), ys.as_ptr(), vs.as_ptr(), 4, params, &mut m) };
    assert_eq!(st, SoilmapStatus::Ok, "{}", last_error());
    let (mut est, mut var) = ([0.0; 5], [0.0; 5]);
    let tx = [0.0, 10.0, 0.0, 10.0, 5.0];
    let ty = [0.0, 0.0, 10.0, 10.0, 5.0];
    let st = unsafe { soilmap_model_predict(m, tx.as_ptr(), ty.as_ptr(), 5, est.as_mut_ptr(), var.as_mut_ptr()) };
    assert_eq!(st, SoilmapStatus::Ok, "{}", last_error());
    for k in 0..4 {
        assert!((est[k] - vs[k]).abs() < 1e-8);
        assert!(var[k] <= 1e-8);
    }
    // Symmetric square: the centre gets the plain mean.
    assert!((est[4] - 2.5).abs() < 1e-9);
    assert!(var[4] > 0.0);
    unsafe { soilmap_model_free(m) };

    let bad = SoilmapVariogram {
        nugget: 0.0,
        range: -1.0,
        sill: 5.0,
    };
    let st = unsafe { soilmap_model_new(xs.as_ptr(), ys.as_ptr(), vs.as_ptr(), 4, bad, &mut m) };
    assert_eq!(st, SoilmapStatus::InvalidArgument);
    let st = unsafe { soilmap_model_new(ptr::null(), ys.as_ptr(), vs.as_ptr(), 4, params, &mut m) };
    assert_eq!(st, SoilmapStatus::NullPointer);
}

#[test]
fn variogram_fit_returns_admissible_params() {
    let xs: Vec<f64> = (0..20).map(|k| 5.0 * k as f64).collect();
    let ys = vec![0.0; 20];
    let vs: Vec<f64> = (0..20).map(|k| if k % 2 == 0 { 0.0 } else { 10.0 }).collect();
    let mut p = SoilmapVariogram {
        nugget: -1.0,
        range: -1.0,
        sill: -1.0,
    };
    let st = unsafe { soilmap_fit_variogram(xs.as_ptr(), ys.as_ptr(), vs.as_ptr(), 20, 5.0, 50.0, &mut p) };
    assert_eq!(st, SoilmapStatus::Ok, "{}", last_error());
    assert!(p.nugget >= 0.0 && p.range > 0.0 && p.sill >= 0.0, "{p:?}");

    let st = unsafe { soilmap_fit_variogram(xs.as_ptr(), ys.as_ptr(), vs.as_ptr(), 1, 5.0, 50.0, &mut p) };
    assert_eq!(st, SoilmapStatus::InsufficientData);
}

#[test]
fn run_handle_exposes_route_and_writes_csv() {
    let cfg = CString::new(DEMO).unwrap();
    let strategy = CString::new("w_shape").unwrap();
    let mut run = ptr::null_mut();
    let st = unsafe { soilmap_run_explore(cfg.as_ptr(), strategy.as_ptr(), 10, 0, &mut run) };
    assert_eq!(st, SoilmapStatus::Ok, "{}", last_error());

    let mut s = SoilmapRunSummary {
        steps: 0,
        final_rmse: 0.0,
        path_m: 0.0,
        final_kv: 0.0,
    };
    assert_eq!(unsafe { soilmap_run_summary(run, &mut s) }, SoilmapStatus::Ok);
    assert_eq!(s.steps, 10);
    assert!(s.final_rmse > 0.0 && s.path_m > 0.0 && s.final_kv > 0.0);

    let mut len = 0;
    let (mut xs, mut ys) = (vec![0.0; 4], vec![0.0; 4]);
    let st = unsafe { soilmap_run_route(run, xs.as_mut_ptr(), ys.as_mut_ptr(), 4, &mut len) };
    assert_eq!(st, SoilmapStatus::BufferTooSmall);
    assert_eq!(len, 10);
    let (mut xs, mut ys) = (vec![0.0; len], vec![0.0; len]);
    let st = unsafe { soilmap_run_route(run, xs.as_mut_ptr(), ys.as_mut_ptr(), len, &mut len) };
    assert_eq!(st, SoilmapStatus::Ok);
    let mut walked = 0.0;
    let (mut px, mut py) = (0.0, 100.0);
    for k in 0..len {
        walked += f64::hypot(xs[k] - px, ys[k] - py);
        (px, py) = (xs[k], ys[k]);
    }
    assert!((walked - s.path_m).abs() < 1e-6, "{walked} vs {}", s.path_m);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let path = CString::new(out.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { soilmap_run_write_csv(run, path.as_ptr()) }, SoilmapStatus::Ok);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("step,sample_id,x_m,y_m,path_m,mse,rmse,kv\n"));
    assert_eq!(text.lines().count(), 11);
    unsafe { soilmap_run_free(run) };
}

#[test]
fn run_errors_carry_status_and_message() {
    let missing = CString::new("/no/such/config.toml").unwrap();
    let strategy = CString::new("greedy").unwrap();
    let mut run = ptr::null_mut();
    let st = unsafe { soilmap_run_explore(missing.as_ptr(), strategy.as_ptr(), 10, 0, &mut run) };
    assert_eq!(st, SoilmapStatus::NotFound);
    assert!(last_error().contains("config.toml"));

    let cfg = CString::new(DEMO).unwrap();
    let unknown = CString::new("zigzag").unwrap();
    let st = unsafe { soilmap_run_explore(cfg.as_ptr(), unknown.as_ptr(), 10, 0, &mut run) };
    assert_eq!(st, SoilmapStatus::InvalidArgument);
    assert!(last_error().contains("zigzag"));

    let st = unsafe { soilmap_run_explore(cfg.as_ptr(), strategy.as_ptr(), 1, 0, &mut run) };
    assert_eq!(st, SoilmapStatus::InvalidArgument);
    assert!(run.is_null());
}

#[test]
fn version_and_header_are_in_sync() {
    let v = unsafe { CStr::from_ptr(soilmap_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/soilmap.h")).unwrap();
    for name in [
        "soilmap_last_error_message",
        "soilmap_grid_new",
        "soilmap_model_predict",
        "soilmap_run_explore",
        "soilmap_run_route",
        "typedef struct SoilmapRun SoilmapRun",
        "SOILMAP_STATUS_BUFFER_TOO_SMALL = 13",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c99() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"soilmap.h\"\n\
         int main(void) {\n\
           SoilmapGrid *g = 0;\n\
           SoilmapStatus st = soilmap_grid_new(10.0, 10.0, 5.0, 0, 0, &g);\n\
           soilmap_grid_free(g);\n\
           return st == SOILMAP_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(e) => eprintln!("no C compiler available ({e}); header compile check not run"),
    }
}
