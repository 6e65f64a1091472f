//! Randomized well-conditioned instances of every least-squares fitter,
//! each compared against the exact oracle.
//!
//! Differences are measured in the term-contribution norm: coefficient `k`
//! is weighted by `X^k`, `X` the largest abscissa magnitude, so a
//! coefficient that contributes nothing over the data range cannot
//! dominate the comparison.

use ndarray::Array2;
use num::BigRational;

use thermonu::characterize::{eval_spatial, fit_ambient, fit_pixelwise, fit_radial, fit_spatial};
use thermonu::estimate::fit_linear_gd;
use thermonu::model::{RadialCoeffs, SpatialPolyCoeffs};
use thermonu::{make_basis_grids, GrayFrame, OperatingPoint};

use super::{exact, exact_pow, lstsq, polyfit, polyfit_exact, to_f64, TestRng};

/// Weighted relative difference for one coefficient vector.
pub fn weighted_rel(got: &[f64], want: &[f64], weights: &[f64]) -> f64 {
    let scale = want.iter().zip(weights).fold(0.0f64, |m, (c, w)| m.max((c * w).abs()));
    let diff = got
        .iter()
        .zip(want)
        .zip(weights)
        .fold(0.0f64, |m, ((a, b), w)| m.max(((a - b) * w).abs()));
    diff / scale.max(f64::MIN_POSITIVE)
}

fn powers(x: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| x.powi(k as i32)).collect()
}

/// `n` distinct, well-separated samples in `[lo, hi]`, one per stratum.
fn stratified(rng: &mut TestRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.1 + 0.8 * rng.uniform(0.0, 1.0)) / n as f64)
        .collect()
}

pub fn pixelwise(seed: u64) -> f64 {
    let mut rng = TestRng::new(seed);
    let (h, w) = (rng.range(2, 4), rng.range(2, 4));
    let m_gl = rng.range(1, 3);
    let n = rng.range(m_gl + 2, 9);
    let t_obj = stratified(&mut rng, n, 20.0, 60.0);
    let frames: Vec<Array2<f64>> = t_obj
        .iter()
        .map(|&t| {
            Array2::from_shape_fn((h, w), |_| {
                2000.0 + 0.4 * t + 2.5 * t * t + rng.uniform(-50.0, 50.0)
            })
        })
        .collect();
    let points: Vec<OperatingPoint> = t_obj
        .iter()
        .zip(&frames)
        .map(|(&t, f)| OperatingPoint::noiseless(33.0, t, GrayFrame::new(f.clone()).unwrap()))
        .collect();
    let got = fit_pixelwise(&points, m_gl).unwrap();

    let ys: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().copied().collect()).collect();
    let want = polyfit(&t_obj, &ys, m_gl);
    let weights = powers(60.0, m_gl + 1);
    (0..h * w)
        .map(|px| {
            let g: Vec<f64> = got.maps.iter().map(|m| m.as_slice().unwrap()[px]).collect();
            let o: Vec<f64> = want.iter().map(|row| row[px]).collect();
            weighted_rel(&g, &o, &weights)
        })
        .fold(0.0, f64::max)
}

pub fn spatial(seed: u64) -> f64 {
    let mut rng = TestRng::new(seed);
    let max_exp = rng.range(1, 3);
    let (h, w) = (rng.range(max_exp + 2, 9), rng.range(max_exp + 2, 9));
    let map = Array2::from_shape_fn((h, w), |(i, j)| {
        1000.0 + 3.0 * i as f64 - 2.0 * (j * j) as f64 + rng.uniform(-10.0, 10.0)
    });
    let got = fit_spatial(&map, max_exp).unwrap();

    let grids = make_basis_grids(h, w).unwrap();
    let mut design = Vec::with_capacity(h * w);
    let mut rhs = Vec::with_capacity(h * w);
    for ((i, j), &v) in map.indexed_iter() {
        let hh = exact(grids.h[[i, j]]);
        let ww = exact(grids.w[[i, j]]);
        let mut row = Vec::new();
        for q in 0..=max_exp {
            for z in 0..=max_exp {
                row.push(exact_pow(&hh, q) * exact_pow(&ww, z));
            }
        }
        design.push(row);
        rhs.push(vec![exact(v)]);
    }
    let want: Vec<f64> = lstsq(&design, &rhs).iter().map(|r| to_f64(&r[0])).collect();
    let mut g = Vec::new();
    let mut weights = Vec::new();
    for q in 0..=max_exp {
        for z in 0..=max_exp {
            g.push(got.coeffs[[q, z]]);
            weights.push(0.5f64.powi((q + z) as i32));
        }
    }
    weighted_rel(&g, &want, &weights)
}

pub fn radial(seed: u64) -> f64 {
    let mut rng = TestRng::new(seed);
    let (h, w) = (rng.range(5, 12), rng.range(5, 12));
    let spatial_exp = rng.range(2, 4);
    let max_exp = rng.range(1, 4);
    let spatial = SpatialPolyCoeffs {
        coeffs: Array2::from_shape_fn((spatial_exp + 1, spatial_exp + 1), |_| rng.uniform(-5.0, 5.0)),
    };
    let grids = make_basis_grids(h, w).unwrap();
    let got = fit_radial(&spatial, &grids, max_exp).unwrap();

    let surface = eval_spatial(&spatial, h, w);
    let radii: Vec<f64> = grids.p.iter().copied().collect();
    let ys: Vec<Vec<f64>> = surface.iter().map(|&v| vec![v]).collect();
    let want: Vec<f64> = polyfit(&radii, &ys, max_exp).iter().map(|r| r[0]).collect();
    let pmax = radii.iter().copied().fold(0.0, f64::max);
    weighted_rel(&got.coeffs, &want, &powers(pmax, max_exp + 1))
}

pub fn ambient(seed: u64) -> f64 {
    let mut rng = TestRng::new(seed);
    let m_ambient = rng.range(1, 3);
    let n = rng.range(m_ambient + 2, 12);
    let t_amb = stratified(&mut rng, n, 27.0, 51.0);
    let ncoef = rng.range(3, 9);
    let sets: Vec<RadialCoeffs> = t_amb
        .iter()
        .map(|&t| RadialCoeffs {
            coeffs: (0..ncoef)
                .map(|r| (r as f64 + 1.0) * (100.0 + 2.0 * t) + rng.uniform(-5.0, 5.0))
                .collect(),
        })
        .collect();
    let got = fit_ambient(&sets, &t_amb, m_ambient).unwrap();

    let ys: Vec<Vec<f64>> = sets.iter().map(|s| s.coeffs.clone()).collect();
    let want = polyfit(&t_amb, &ys, m_ambient);
    let weights = powers(51.0, m_ambient + 1);
    (0..ncoef)
        .map(|r| {
            let g: Vec<f64> = (0..=m_ambient).map(|k| got[[k, r]]).collect();
            let o: Vec<f64> = (0..=m_ambient).map(|k| want[k][r]).collect();
            weighted_rel(&g, &o, &weights)
        })
        .fold(0.0, f64::max)
}

pub fn linear_gd(seed: u64) -> f64 {
    let mut rng = TestRng::new(seed);
    let m_ambient = rng.range(1, 2);
    let (h, w) = (2, rng.range(2, 3));
    let npix = h * w;
    let n = rng.range(m_ambient + 2, 6);
    let t_amb = stratified(&mut rng, n, 27.0, 51.0);
    let n_obj = rng.range(3, 5);
    let mut points = Vec::new();
    // per ambient: (t_obj list, frames)
    let mut series: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    for &ta in &t_amb {
        let t_obj = stratified(&mut rng, n_obj, 20.0, 60.0);
        let mut frames = Vec::new();
        for &to in &t_obj {
            let vals: Vec<f64> = (0..npix)
                .map(|_| (80.0 + 0.5 * ta) * to + 1500.0 - 3.0 * ta + rng.uniform(-20.0, 20.0))
                .collect();
            let frame = Array2::from_shape_vec((h, w), vals.clone()).unwrap();
            points.push(OperatingPoint::noiseless(ta, to, GrayFrame::new(frame).unwrap()));
            frames.push(vals);
        }
        series.push((t_obj, frames));
    }
    let got = fit_linear_gd(&points, m_ambient).unwrap();

    // stage 1 exactly per ambient, stage 2 exactly on the rational results
    let mut gains: Vec<Vec<BigRational>> = Vec::new();
    let mut offsets: Vec<Vec<BigRational>> = Vec::new();
    for (t_obj, frames) in &series {
        let xs: Vec<BigRational> = t_obj.iter().map(|&t| exact(t)).collect();
        let ys: Vec<Vec<BigRational>> = frames.iter().map(|f| f.iter().map(|&v| exact(v)).collect()).collect();
        let fit = polyfit_exact(&xs, &ys, 1);
        offsets.push(fit[0].clone());
        gains.push(fit[1].clone());
    }
    let xs: Vec<BigRational> = t_amb.iter().map(|&t| exact(t)).collect();
    let g_want = polyfit_exact(&xs, &gains, m_ambient);
    let d_want = polyfit_exact(&xs, &offsets, m_ambient);
    let weights = powers(51.0, m_ambient + 1);
    let mut worst = 0.0f64;
    for px in 0..npix {
        for (poly, want) in [(&got.g_poly, &g_want), (&got.d_poly, &d_want)] {
            let g: Vec<f64> = poly.iter().map(|m| m.as_slice().unwrap()[px]).collect();
            let o: Vec<f64> = want.iter().map(|row| to_f64(&row[px])).collect();
            worst = worst.max(weighted_rel(&g, &o, &weights));
        }
    }
    worst
}

/// Instance generator: seed to weighted relative difference from the oracle.
pub type Case = fn(u64) -> f64;

/// Every fitter with its instance generator, for suites that run them all.
pub const FITTERS: [(&str, Case); 5] = [
    ("fit_pixelwise", pixelwise),
    ("fit_spatial", spatial),
    ("fit_radial", radial),
    ("fit_ambient", ambient),
    ("fit_linear_gd", linear_gd),
];
