//! Experimental semivariograms and the bounded linear semivariogram model.
//!
//! The model is
//!
//! ```text
//! γ(h) = 0                 h = 0
//!        p0 + p2 · h / p1  0 < h < p1
//!        p0 + p2           h ≥ p1
//! ```
//!
//! with nugget `p0`, range `p1` and sill `p2`. The jump at the origin is
//! kept: the nugget only applies between distinct locations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, Location};

/// Nugget / range / sill of the bounded linear semivariogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramParams {
    /// Semivariance just above zero lag (kPa²).
    pub nugget: f64,
    /// Lag (m) beyond which the semivariance is flat.
    pub range: f64,
    /// Rise from nugget to plateau (kPa²).
    pub sill: f64,
}

impl VariogramParams {
    pub fn new(nugget: f64, range: f64, sill: f64) -> Result<Self> {
        let p = Self { nugget, range, sill };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nugget.is_finite() && self.nugget >= 0.0) {
            return Err(Error::invalid(format!("nugget must be >= 0, got {}", self.nugget)));
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(Error::invalid(format!("range must be > 0, got {}", self.range)));
        }
        if !(self.sill.is_finite() && self.sill >= 0.0) {
            return Err(Error::invalid(format!("sill must be >= 0, got {}", self.sill)));
        }
        Ok(())
    }

    /// Plateau value `p0 + p2`.
    pub fn total_sill(&self) -> f64 {
        self.nugget + self.sill
    }

    pub fn eval(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return Err(Error::invalid(format!("lag must be >= 0, got {h}")));
        }
        Ok(self.gamma(h))
    }

    /// Unchecked [`eval`](Self::eval) for lags known to be non-negative.
    #[inline]
    pub fn gamma(&self, h: f64) -> f64 {
        debug_assert!(h >= 0.0);
        if h == 0.0 {
            0.0
        } else if h < self.range {
            self.nugget + self.sill * h / self.range
        } else {
            self.nugget + self.sill
        }
    }
}

/// One lag class of an experimental semivariogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagBin {
    /// Mean pair distance in the class (m).
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentalVariogram {
    pub bins: Vec<LagBin>,
}

impl ExperimentalVariogram {
    pub fn max_lag(&self) -> Option<f64> {
        self.bins.last().map(|b| b.lag)
    }
}

/// Default lag binning: one cell per bin, out to half the field diagonal.
pub fn default_binning(grid: &FieldGrid) -> (f64, f64) {
    (grid.cell_size(), 0.5 * grid.width().hypot(grid.height()))
}

/// Matheron estimator `γ(h) = Σ (z_i − z_j)² / 2N(h)` over pairs binned by
/// distance into `[k·w, (k+1)·w)`. Pairs farther apart than `max_lag`, and
/// co-located pairs, are skipped; empty bins are omitted.
pub fn experimental_semivariogram(
    points: &[(Location, f64)],
    bin_width: f64,
    max_lag: f64,
) -> Result<ExperimentalVariogram> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    if !(bin_width.is_finite() && bin_width > 0.0) || !(max_lag.is_finite() && max_lag > 0.0) {
        return Err(Error::invalid("bin width and max lag must be positive"));
    }
    let nbins = (max_lag / bin_width).floor() as usize + 1;
    let mut dist_sum = vec![0.0; nbins];
    let mut sq_sum = vec![0.0; nbins];
    let mut counts = vec![0usize; nbins];
    for (a, (la, za)) in points.iter().enumerate() {
        for (lb, zb) in &points[a + 1..] {
            let h = la.distance(lb);
            if h == 0.0 || h > max_lag {
                continue;
            }
            let k = (h / bin_width).floor() as usize;
            dist_sum[k] += h;
            sq_sum[k] += (za - zb) * (za - zb);
            counts[k] += 1;
        }
    }
    let bins = (0..nbins)
        .filter(|&k| counts[k] > 0)
        .map(|k| LagBin {
            lag: dist_sum[k] / counts[k] as f64,
            gamma: sq_sum[k] / (2.0 * counts[k] as f64),
            pairs: counts[k],
        })
        .collect();
    Ok(ExperimentalVariogram { bins })
}

/// Result of [`fit_linear`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub params: VariogramParams,
    /// Pair-count weighted squared error of the fitted curve.
    pub weighted_sse: f64,
    /// Set when the bins carry no spatial structure (flat or all zero), in
    /// which case the params describe a pure nugget.
    pub degenerate: bool,
}

const GRID_POINTS: usize = 256;

/// Fits the linear model by pair-count weighted least squares.
///
/// For a fixed range the model is linear in nugget and sill, so those are
/// solved in closed form under non-negativity; the range is searched over
/// `(0, max bin lag]` by a grid scan refined with golden-section search.
pub fn fit_linear(ev: &ExperimentalVariogram) -> Result<LinearFit> {
    let bins = &ev.bins;
    if bins.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: bins.len(),
        });
    }
    let max_lag = bins.iter().map(|b| b.lag).fold(f64::MIN, f64::max);
    let min_lag = bins.iter().map(|b| b.lag).fold(f64::MAX, f64::min);
    if !(max_lag > 0.0) {
        return Err(Error::invalid("experimental variogram has no positive lag"));
    }

    if bins.iter().all(|b| b.gamma == 0.0) {
        return Ok(LinearFit {
            params: VariogramParams {
                nugget: 0.0,
                range: max_lag,
                sill: 0.0,
            },
            weighted_sse: 0.0,
            degenerate: true,
        });
    }

    let mut candidates: Vec<f64> = (1..=GRID_POINTS)
        .map(|k| max_lag * k as f64 / GRID_POINTS as f64)
        .chain(bins.iter().map(|b| b.lag))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let scored: Vec<(f64, Inner)> = candidates.iter().map(|&r| (r, solve_inner(bins, r))).collect();
    let (best_k, _) = scored
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.sse.total_cmp(&b.1 .1.sse))
        .expect("candidate set is non-empty");
    let (mut best_range, mut best) = scored[best_k];

    let lo = if best_k == 0 { candidates[0] * 1e-3 } else { candidates[best_k - 1] };
    let hi = candidates[(best_k + 1).min(candidates.len() - 1)];
    let (r, inner) = golden_section(lo, hi, |r| solve_inner(bins, r));
    if inner.sse < best.sse {
        best_range = r;
        best = inner;
    }

    let flat = best.sill == 0.0 || best_range <= min_lag;
    if flat {
        // Constant over every bin: report the plateau as a pure nugget.
        let level = best.nugget + best.sill;
        return Ok(LinearFit {
            params: VariogramParams {
                nugget: level,
                range: max_lag,
                sill: 0.0,
            },
            weighted_sse: best.sse,
            degenerate: true,
        });
    }

    Ok(LinearFit {
        params: VariogramParams {
            nugget: best.nugget,
            range: best_range,
            sill: best.sill,
        },
        weighted_sse: best.sse,
        degenerate: false,
    })
}

/// Pair-count weighted squared error of `params` against the bins.
pub fn weighted_sse(bins: &[LagBin], params: &VariogramParams) -> f64 {
    bins.iter()
        .map(|b| {
            let r = b.gamma - params.gamma(b.lag);
            b.pairs as f64 * r * r
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Inner {
    nugget: f64,
    sill: f64,
    sse: f64,
}

/// Non-negative weighted least squares for `γ ≈ a + b·min(h/range, 1)`.
fn solve_inner(bins: &[LagBin], range: f64) -> Inner {
    let (mut sw, mut sf, mut sff, mut sg, mut sfg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in bins {
        let w = b.pairs as f64;
        let f = (b.lag / range).min(1.0);
        sw += w;
        sf += w * f;
        sff += w * f * f;
        sg += w * b.gamma;
        sfg += w * f * b.gamma;
    }
    let sse = |a: f64, s: f64| {
        bins.iter()
            .map(|bin| {
                let r = bin.gamma - a - s * (bin.lag / range).min(1.0);
                bin.pairs as f64 * r * r
            })
            .sum::<f64>()
    };

    let det = sw * sff - sf * sf;
    if det > 1e-12 * sw * sff {
        let a = (sff * sg - sf * sfg) / det;
        let s = (sw * sfg - sf * sg) / det;
        if a >= 0.0 && s >= 0.0 {
            return Inner {
                nugget: a,
                sill: s,
                sse: sse(a, s),
            };
        }
    }
    // The optimum lies on the boundary of the feasible quadrant (or the
    // basis is collinear); the objective is convex so the best face wins.
    let faces = [
        (0.0, if sff > 0.0 { (sfg / sff).max(0.0) } else { 0.0 }),
        ((sg / sw).max(0.0), 0.0),
    ];
    faces
        .iter()
        .map(|&(a, s)| Inner {
            nugget: a,
            sill: s,
            sse: sse(a, s),
        })
        .min_by(|x, y| x.sse.total_cmp(&y.sse))
        .expect("two faces")
}

fn golden_section<F>(mut lo: f64, mut hi: f64, f: F) -> (f64, Inner)
where
    F: Fn(f64) -> Inner,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let tol = 1e-12 * hi.abs().max(1.0);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if fc.sse <= fd.sse {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc.sse <= fd.sse {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Whether `params` is conditionally negative definite on `locations`:
/// `−Σ wᵢ wⱼ γ(xᵢ − xⱼ) > 0` for every non-zero `w` with `Σ w = 0`.
///
/// The bounded linear model is a valid variogram in one dimension only. In
/// the plane some point sets violate the condition, and kriging on them
/// gives near-singular systems with huge weights. Repeated locations are
/// counted once.
pub fn is_admissible(params: &VariogramParams, locations: &[Location]) -> bool {
    let mut pts: Vec<Location> = Vec::with_capacity(locations.len());
    for &l in locations {
        if !pts.contains(&l) {
            pts.push(l);
        }
    }
    let n = pts.len();
    if n < 2 {
        return true;
    }
    let neg_gamma = DMatrix::from_fn(n, n, |a, b| -params.gamma(pts[a].distance(&pts[b])));
    // orthonormal basis of the sum-zero subspace: the trailing columns of Q
    // from a QR factorization whose first column is the all-ones vector
    let mut seed = DMatrix::<f64>::identity(n, n);
    seed.column_mut(0).fill(1.0);
    let q = seed.qr().q();
    let basis = q.columns(1, n - 1);
    let projected = basis.transpose() * neg_gamma * basis;
    let eig = projected.symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    max > 0.0 && min > ADMISSIBLE_RTOL * max
}

const ADMISSIBLE_RTOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bins_from(params: &VariogramParams, lags: &[f64], pairs: usize) -> ExperimentalVariogram {
        ExperimentalVariogram {
            bins: lags
                .iter()
                .map(|&h| LagBin {
                    lag: h,
                    gamma: params.gamma(h),
                    pairs,
                })
                .collect(),
        }
    }

    #[test]
    fn admissibility_of_linear_models() {
        let line: Vec<Location> = (0..6).map(|k| Location::new(7.0 * k as f64, 0.0)).collect();
        // bounded linear is valid along a line
        assert!(is_admissible(&VariogramParams::new(0.0, 10.0, 5.0).unwrap(), &line));
        // never reaching the sill it is the linear power model, valid anywhere
        let square = [
            Location::new(0.0, 0.0),
            Location::new(10.0, 0.0),
            Location::new(0.0, 10.0),
            Location::new(10.0, 10.0),
            Location::new(5.0, 5.0),
        ];
        assert!(is_admissible(&VariogramParams::new(0.0, 100.0, 5.0).unwrap(), &square));
        // a 6 x 6 lattice of 5 m spacing with range 7.5 m has a sum-zero
        // direction of negative variance (min eigenvalue -0.0156 per unit sill)
        let lattice: Vec<Location> = (0..36).map(|k| Location::new(5.0 * (k % 6) as f64, 5.0 * (k / 6) as f64)).collect();
        assert!(!is_admissible(&VariogramParams::new(0.0, 7.5, 1.0).unwrap(), &lattice));
        assert!(is_admissible(&VariogramParams::new(0.0, 500.0, 1.0).unwrap(), &lattice));
        // duplicates are ignored, single points are trivially fine
        assert!(is_admissible(&VariogramParams::new(0.0, 10.0, 5.0).unwrap(), &[line[0], line[0]]));
    }

    #[test]
    fn eval_branches() {
        let p = VariogramParams::new(1.0, 10.0, 4.0).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
        assert_eq!(p.eval(5.0).unwrap(), 3.0);
        assert_eq!(p.eval(20.0).unwrap(), 5.0);
        assert_eq!(p.eval(10.0).unwrap(), 5.0);
        assert!(matches!(p.eval(-1.0), Err(Error::InvalidArgument(_))));
        assert!(p.eval(f64::NAN).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(VariogramParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(VariogramParams::new(0.0, 0.0, 1.0).is_err());
        assert!(VariogramParams::new(0.0, 1.0, -1.0).is_err());
        assert!(VariogramParams::new(0.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn single_pair_bin() {
        let pts = [(Location::new(0.0, 0.0), 10.0), (Location::new(7.0, 0.0), 14.0)];
        let ev = experimental_semivariogram(&pts, 10.0, 50.0).unwrap();
        assert_eq!(ev.bins, vec![LagBin { lag: 7.0, gamma: 8.0, pairs: 1 }]);
    }

    #[test]
    fn too_few_samples() {
        let pts = [(Location::new(0.0, 0.0), 10.0)];
        assert!(matches!(
            experimental_semivariogram(&pts, 1.0, 10.0),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn equal_values_give_zero_gamma() {
        let pts: Vec<_> = (0..6).map(|k| (Location::new(k as f64 * 3.0, (k * k) as f64), 42.0)).collect();
        let ev = experimental_semivariogram(&pts, 5.0, 100.0).unwrap();
        assert!(!ev.bins.is_empty());
        assert!(ev.bins.iter().all(|b| b.gamma == 0.0));
    }

    #[test]
    fn matches_brute_force_over_all_pairs() {
        let pts = [
            (Location::new(0.0, 0.0), 3.0),
            (Location::new(4.0, 1.0), 7.5),
            (Location::new(9.0, 9.0), 1.0),
            (Location::new(2.0, 8.0), 4.0),
            (Location::new(13.0, 2.0), 9.0),
        ];
        let w = 4.0;
        let ev = experimental_semivariogram(&pts, w, 20.0).unwrap();
        // oracle: enumerate C(5,2) pairs into a map keyed by bin index
        let mut acc: std::collections::BTreeMap<usize, (f64, f64, usize)> = Default::default();
        for a in 0..5 {
            for b in a + 1..5 {
                let h = ((pts[a].0.x - pts[b].0.x).powi(2) + (pts[a].0.y - pts[b].0.y).powi(2)).sqrt();
                let e = acc.entry((h / w) as usize).or_default();
                e.0 += h;
                e.1 += 0.5 * (pts[a].1 - pts[b].1).powi(2);
                e.2 += 1;
            }
        }
        let expected: Vec<LagBin> = acc
            .values()
            .map(|&(hs, gs, n)| LagBin {
                lag: hs / n as f64,
                gamma: gs / n as f64,
                pairs: n,
            })
            .collect();
        assert_eq!(ev.bins.len(), expected.len());
        for (got, want) in ev.bins.iter().zip(&expected) {
            assert_eq!(got.pairs, want.pairs);
            assert!((got.lag - want.lag).abs() < 1e-12);
            assert!((got.gamma - want.gamma).abs() < 1e-12);
        }
        assert_eq!(expected.iter().map(|b| b.pairs).sum::<usize>(), 10);
    }

    #[test]
    fn recovers_generating_params() {
        let truth = VariogramParams::new(2.0, 30.0, 6.0).unwrap();
        let lags: Vec<f64> = (0..20).map(|k| 2.5 + 5.0 * k as f64).collect();
        let fit = fit_linear(&bins_from(&truth, &lags, 10)).unwrap();
        assert!(!fit.degenerate);
        assert!((fit.params.nugget - 2.0).abs() / 2.0 < 1e-3, "{:?}", fit.params);
        assert!((fit.params.range - 30.0).abs() / 30.0 < 1e-3, "{:?}", fit.params);
        assert!((fit.params.sill - 6.0).abs() / 6.0 < 1e-3, "{:?}", fit.params);
    }

    #[test]
    fn constant_bins_are_pure_nugget() {
        let ev = ExperimentalVariogram {
            bins: (1..8).map(|k| LagBin { lag: k as f64, gamma: 5.0, pairs: 3 }).collect(),
        };
        let fit = fit_linear(&ev).unwrap();
        assert!(fit.degenerate);
        assert!((fit.params.nugget + fit.params.sill - 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_bins_are_degenerate() {
        let ev = ExperimentalVariogram {
            bins: (1..5).map(|k| LagBin { lag: k as f64 * 2.0, gamma: 0.0, pairs: 1 }).collect(),
        };
        let fit = fit_linear(&ev).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params, VariogramParams { nugget: 0.0, range: 8.0, sill: 0.0 });
    }

    #[test]
    fn needs_three_bins() {
        let ev = ExperimentalVariogram {
            bins: vec![LagBin { lag: 1.0, gamma: 1.0, pairs: 1 }, LagBin { lag: 2.0, gamma: 2.0, pairs: 1 }],
        };
        assert!(matches!(fit_linear(&ev), Err(Error::InsufficientData { needed: 3, got: 2 })));
    }

    #[test]
    fn noisy_fit_beats_generating_params() {
        let truth = VariogramParams::new(50.0, 40.0, 900.0).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bins: Vec<LagBin> = (0..25)
                .map(|k| {
                    let h = 2.5 + 4.0 * k as f64;
                    LagBin {
                        lag: h,
                        gamma: (truth.gamma(h) + rng.random_range(-120.0..120.0)).max(0.0),
                        pairs: rng.random_range(1..40),
                    }
                })
                .collect();
            let ev = ExperimentalVariogram { bins };
            let fit = fit_linear(&ev).unwrap();
            let reference = weighted_sse(&ev.bins, &truth);
            assert!(fit.weighted_sse <= reference, "seed {seed}: {} > {}", fit.weighted_sse, reference);
            assert!((fit.weighted_sse - weighted_sse(&ev.bins, &fit.params)).abs() <= 1e-9 * reference.max(1.0));
        }
    }
}
