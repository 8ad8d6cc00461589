use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use soilmap::exploration::tsp::{nearest_neighbor, path_length, tsp_route};
use soilmap::exploration::{plan_area_split, plan_random, plan_w_shape};
use soilmap::grid::aggregate_layers;
use soilmap::io::format::{exact, sig9};
use soilmap::io::{export_grid_csv, load_grid_csv};
use soilmap::kriging::KrigingSystem;
use soilmap::simulation::pearson;
use soilmap::variogram::{experimental_semivariogram, fit_linear};
use soilmap::{CellIndex, DepthProfile, FieldGrid, GridValues, LayerSpec, Location, VariogramParams};

fn params() -> impl Strategy<Value = VariogramParams> {
    (0.0..100.0f64, 1.0..300.0f64, 0.0..3000.0f64).prop_map(|(n, r, s)| VariogramParams::new(n, r, s).unwrap())
}

fn location() -> impl Strategy<Value = Location> {
    (0.0..200.0f64, 0.0..100.0f64).prop_map(|(x, y)| Location::new(x, y))
}

fn field() -> impl Strategy<Value = FieldGrid> {
    (4usize..20, 3usize..12, prop::collection::vec(any::<bool>(), 240)).prop_map(|(nx, ny, holes)| {
        let mut mask: Vec<Vec<bool>> = (0..ny).map(|j| (0..nx).map(|i| !holes[j * nx + i] || i == 0).collect()).collect();
        mask[0][0] = true;
        FieldGrid::new(nx as f64 * 5.0, ny as f64 * 5.0, 5.0, Some(&mask)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semivariance_is_bounded_and_non_decreasing(p in params(), a in 0.0..500.0f64, b in 0.0..500.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert_eq!(p.gamma(0.0), 0.0);
        prop_assert!(p.gamma(lo) <= p.gamma(hi) + 1e-12);
        prop_assert!(p.gamma(hi) <= p.total_sill() + 1e-12);
        if hi >= p.range {
            prop_assert_eq!(p.gamma(hi), p.total_sill());
        }
    }

    #[test]
    fn kriging_weights_sum_to_one_and_variance_is_non_negative(
        p in params(),
        locs in prop::collection::vec(location(), 1..10),
        target in location(),
    ) {
        prop_assume!(p.total_sill() > 0.0);
        let system = match KrigingSystem::new(&locs, p) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        if let Ok(sol) = system.solve(target) {
            prop_assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let values: Vec<f64> = (0..locs.len()).map(|k| 100.0 + k as f64).collect();
        if let Ok(pred) = system.predict_many(&[target], &values) {
            prop_assert!(pred[0].1 >= 0.0);
        }
    }

    #[test]
    fn zero_nugget_kriging_honours_samples(
        p in params(),
        locs in prop::collection::vec(location(), 1..10),
    ) {
        let p = VariogramParams { nugget: 0.0, ..p };
        prop_assume!(p.sill > 0.0);
        let values: Vec<f64> = (0..locs.len()).map(|k| (k * k) as f64).collect();
        let system = KrigingSystem::new(&locs, p).unwrap();
        let pred = system.predict_many(&locs, &values).unwrap();
        for (k, (e, v)) in pred.iter().enumerate() {
            // Duplicated locations krige to the mean of their values.
            let same: Vec<f64> = locs.iter().zip(&values).filter(|(l, _)| **l == locs[k]).map(|(_, v)| *v).collect();
            let mean = same.iter().sum::<f64>() / same.len() as f64;
            prop_assert!((e - mean).abs() <= 1e-8);
            prop_assert!(*v <= 1e-8);
        }
    }

    #[test]
    fn fitted_variogram_respects_its_constraints(
        pts in prop::collection::vec((location(), 0.0..2000.0f64), 8..40),
    ) {
        let ev = experimental_semivariogram(&pts, 5.0, 120.0).unwrap();
        let n = pts.len();
        prop_assert!(ev.bins.iter().map(|b| b.pairs).sum::<usize>() <= n * (n - 1) / 2);
        prop_assert!(ev.bins.iter().all(|b| b.gamma >= 0.0 && b.pairs > 0));
        if let Ok(fit) = fit_linear(&ev) {
            prop_assert!(fit.params.validate().is_ok());
            prop_assert!(fit.params.range <= ev.max_lag().unwrap() + 1e-9);
        }
    }

    #[test]
    fn cell_centres_map_back_to_their_cells(g in field()) {
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let c = CellIndex::new(i, j);
                prop_assert_eq!(g.cell_of(g.cell_center(c)).unwrap(), c);
            }
        }
        let snapped = g.snap(Location::new(-50.0, 1e6));
        prop_assert!(g.is_reachable(snapped));
    }

    #[test]
    fn tsp_route_is_a_shorter_permutation(
        targets in prop::collection::vec((0usize..20, 0usize..10), 1..25),
        origin in location(),
    ) {
        let g = FieldGrid::new(100.0, 50.0, 5.0, None).unwrap();
        let cells: Vec<CellIndex> = targets.iter().map(|&(i, j)| CellIndex::new(i, j)).collect();
        let route = tsp_route(origin, &cells, &g).unwrap();
        let mut got = route.order.clone();
        got.sort();
        let mut want = cells.clone();
        want.sort();
        want.dedup();
        prop_assert_eq!(got, want);
        prop_assert!((route.length - path_length(origin, &route.order, &g)).abs() <= 1e-9 * route.length.max(1.0));
        let nn = nearest_neighbor(origin, &cells, &g);
        prop_assert!(route.length <= path_length(origin, &nn, &g) + 1e-9);
    }

    #[test]
    fn coverage_plans_pick_distinct_reachable_cells(g in field(), frac in 0.05..1.0f64, seed in any::<u64>()) {
        // The W needs one waypoint per vertex.
        prop_assume!(g.reachable_count() >= 5);
        let n = ((g.reachable_count() as f64 * frac).ceil() as usize).max(5);
        let origin = Location::new(0.0, g.height());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plans = [
            (plan_random(&g, n, origin, &mut rng).unwrap(), true),
            (plan_area_split(&g, n, origin).unwrap(), true),
            // Waypoints closer than a cell collapse onto one target.
            (plan_w_shape(&g, n, origin).unwrap(), false),
        ];
        for (plan, exact_count) in plans {
            if exact_count {
                prop_assert_eq!(plan.len(), n);
            } else {
                prop_assert!(plan.len() <= n && !plan.is_empty());
            }
            let n = plan.len();
            let mut cells = plan.route.clone();
            prop_assert!(cells.iter().all(|&c| g.is_reachable(c)));
            cells.sort();
            cells.dedup();
            prop_assert_eq!(cells.len(), n);
        }
    }

    #[test]
    fn layer_means_lie_within_their_readings(readings in prop::collection::vec(0.0..5000.0f64, 41..400)) {
        let spec = LayerSpec::new(8, 5.0).unwrap();
        let profile = DepthProfile::new(readings.clone(), 1.0).unwrap();
        let layers = aggregate_layers(&profile, &spec).unwrap();
        for (k, v) in layers.iter().enumerate() {
            let chunk = &readings[5 * k..5 * k + 5];
            let lo = chunk.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
    }

    #[test]
    fn grid_csv_round_trips_bit_exactly(
        rows in prop::collection::vec(prop::collection::vec(prop::option::of(-1e6..1e6f64), 5), 1..6),
    ) {
        let values = GridValues::from_rows(rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        export_grid_csv(&values, &path).unwrap();
        let back = load_grid_csv(&path).unwrap();
        prop_assert_eq!(back.nx(), values.nx());
        prop_assert_eq!(back.ny(), values.ny());
        for (a, b) in back.rows().zip(values.rows()) {
            for (x, y) in a.iter().zip(b) {
                // -0.0 is written as 0
                prop_assert_eq!(x.map(|v| (v + 0.0).to_bits()), y.map(|v| (v + 0.0).to_bits()));
            }
        }
    }

    #[test]
    fn number_formats_parse_back(v in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let s9: f64 = sig9(v).parse().unwrap();
        prop_assert!((s9 - v).abs() <= 5e-9 * v.abs());
        let ex: f64 = exact(v).parse().unwrap();
        prop_assert_eq!(ex, v);
    }

    #[test]
    fn correlation_is_bounded_and_symmetric(
        pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 2..50),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((r - pearson(&y, &x).unwrap()).abs() <= 1e-12);
        }
    }
}
