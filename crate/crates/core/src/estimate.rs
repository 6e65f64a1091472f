//! Closed-form temperature estimation from one gray-level frame and the
//! ambient temperature.
//!
//! [`invert_polynomial`] solves the characterized per-pixel response for the
//! object temperature. [`LinearGD`] is the gain/offset approximation
//! `GL = G(t_amb)·t + D(t_amb)` inverted as `t = (GL − D)/G`.

use nalgebra::DMatrix;
use ndarray::{Array2, Zip};

use crate::characterize::{fit_pixelwise, group_by_ambient};
use crate::error::{Error, Result};
use crate::frame::{GrayFrame, OperatingPoint, TemperatureMap};
use crate::lstsq::{horner, polyfit_columns};
use crate::model::CameraModel;
use crate::simulate::{apply_pixelwise, pixelwise_at};

const BISECT_MAX_ITER: usize = 200;

/// Estimated temperatures with a validity mask (`true` = valid).
///
/// Masked pixels hold a placeholder: the nearest temperature bound for
/// out-of-range gray levels, 0 °C for vanishing gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub map: TemperatureMap,
    pub mask: Array2<bool>,
}

impl Estimate {
    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }
}

enum Root {
    Found(f64),
    Below,
    Above,
}

/// Root of `Σ β_m t^m = gl` on `[lo, hi]` for a response known to be
/// monotone there.
fn solve_pixel(beta: &[f64], gl: f64, lo: f64, hi: f64) -> Root {
    let f_lo = horner(beta, lo);
    let f_hi = horner(beta, hi);
    let increasing = f_hi >= f_lo;
    if gl == f_lo {
        return Root::Found(lo);
    }
    if gl == f_hi {
        return Root::Found(hi);
    }
    let (min, max) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if gl < min {
        return if increasing { Root::Below } else { Root::Above };
    }
    if gl > max {
        return if increasing { Root::Above } else { Root::Below };
    }
    if beta.len() == 3 && beta[2] > 0.0 && increasing {
        return Root::Found(quadratic_root(beta, gl).clamp(lo, hi));
    }
    Root::Found(bisect(beta, gl, lo, hi, increasing))
}

/// Increasing-branch root of `β₂t² + β₁t + β₀ = gl`, `β₂ > 0`, in the form
/// that avoids cancellation.
fn quadratic_root(beta: &[f64], gl: f64) -> f64 {
    let (c, b, a) = (beta[0] - gl, beta[1], beta[2]);
    let sqrt_d = (b * b - 4.0 * a * c).max(0.0).sqrt();
    if b > 0.0 {
        -2.0 * c / (b + sqrt_d)
    } else {
        (-b + sqrt_d) / (2.0 * a)
    }
}

/// Bisection down to the bracket's floating-point resolution, which is far
/// below a 1e-6 relative gray-level residual.
fn bisect(beta: &[f64], gl: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
    let mut best = (f64::INFINITY, lo);
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = horner(beta, mid) - gl;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r == 0.0 {
            return mid;
        }
        if (r < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.1
}

fn check_monotone(beta_maps: &[Array2<f64>], lo: f64, hi: f64) -> Result<()> {
    let (h, w) = beta_maps[0].dim();
    for i in 0..h {
        for j in 0..w {
            let slope = |t: f64| {
                beta_maps
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (m, b)| acc * t + m as f64 * b[[i, j]])
            };
            let (d_lo, d_hi) = (slope(lo), slope(hi));
            if !(d_lo * d_hi > 0.0) {
                return Err(Error::NotMonotone { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Inverts the per-pixel response polynomial of `model` at `t_amb`.
///
/// Every pixel must have a derivative of one strict sign at both ends of
/// `model.temp_bounds`. Gray levels outside the response range are masked.
pub fn invert_polynomial(model: &CameraModel, frame: &GrayFrame, t_amb: f64) -> Result<Estimate> {
    if frame.dim() != model.dim() {
        return Err(Error::GeometryMismatch {
            expected: model.dim(),
            found: frame.dim(),
        });
    }
    let coeffs = pixelwise_at(model, t_amb)?;
    let (lo, hi) = model.temp_bounds;
    check_monotone(&coeffs.maps, lo, hi)?;

    let (h, w) = frame.dim();
    let mut temps = Array2::zeros((h, w));
    let mut mask = Array2::from_elem((h, w), false);
    let maps = &coeffs.maps;
    Zip::indexed(&mut temps)
        .and(&mut mask)
        .and(frame.values())
        .par_for_each(|(i, j), t, valid, &gl| {
            let beta: Vec<f64> = maps.iter().map(|b| b[[i, j]]).collect();
            (*t, *valid) = match solve_pixel(&beta, gl, lo, hi) {
                Root::Found(x) => (x, true),
                Root::Below => (lo, false),
                Root::Above => (hi, false),
            };
        });
    Ok(Estimate {
        map: TemperatureMap::new(temps)?,
        mask,
    })
}

/// Per-pixel gain and offset as polynomials of the ambient temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGD {
    /// `g_poly[k]` multiplies `t_amb^k`.
    pub g_poly: Vec<Array2<f64>>,
    pub d_poly: Vec<Array2<f64>>,
    /// Smallest `|G|` over all pixels at the fitted ambient temperatures.
    pub min_abs_gain: f64,
    /// Pixels with `|G|` at or below this are masked.
    pub gain_floor: f64,
    pub t_amb_range: (f64, f64),
}

impl LinearGD {
    pub fn dim(&self) -> (usize, usize) {
        self.g_poly[0].dim()
    }

    pub fn m_ambient(&self) -> usize {
        self.g_poly.len() - 1
    }

    fn eval(poly: &[Array2<f64>], t_amb: f64) -> Array2<f64> {
        let mut out = Array2::zeros(poly[0].dim());
        for c in poly.iter().rev() {
            Zip::from(&mut out).and(c).for_each(|acc, &c| *acc = *acc * t_amb + c);
        }
        out
    }

    pub fn gain_at(&self, t_amb: f64) -> Array2<f64> {
        Self::eval(&self.g_poly, t_amb)
    }

    pub fn offset_at(&self, t_amb: f64) -> Array2<f64> {
        Self::eval(&self.d_poly, t_amb)
    }

    /// GxPD form `t = 𝒢·GL + 𝒟` with `𝒢 = 1/G` and `𝒟 = −D/G`.
    pub fn gxpd_at(&self, t_amb: f64) -> (Array2<f64>, Array2<f64>) {
        let g = self.gain_at(t_amb);
        let d = self.offset_at(t_amb);
        (g.mapv(|g| 1.0 / g), Zip::from(&d).and(&g).map_collect(|&d, &g| -d / g))
    }
}

/// Fits `GL = G·t_obj + D` per pixel at each ambient temperature, then
/// each of `G` and `D` as a degree-`m_ambient` polynomial of `t_amb`.
pub fn fit_linear_gd(points: &[OperatingPoint], m_ambient: usize) -> Result<LinearGD> {
    let groups = group_by_ambient(points);
    if groups.is_empty() {
        return Err(Error::Empty("no operating points"));
    }
    let (h, w) = groups[0].1[0].mean_frame.dim();
    if let Some(p) = points.iter().find(|p| p.mean_frame.dim() != (h, w)) {
        return Err(Error::GeometryMismatch {
            expected: (h, w),
            found: p.mean_frame.dim(),
        });
    }
    let npix = h * w;
    let t_amb: Vec<f64> = groups.iter().map(|(t, _)| *t).collect();
    let mut gains = DMatrix::zeros(t_amb.len(), npix);
    let mut offsets = DMatrix::zeros(t_amb.len(), npix);
    for (a, (t, pts)) in groups.iter().enumerate() {
        let fit = fit_pixelwise(pts, 1).map_err(|e| e.in_stage(format!("gain/offset at t_amb={t}")))?;
        for (k, (&d, &g)) in fit.maps[0].iter().zip(fit.maps[1].iter()).enumerate() {
            offsets[(a, k)] = d;
            gains[(a, k)] = g;
        }
    }
    let g_fit = polyfit_columns(&t_amb, &gains, m_ambient, "gain ambient fit")?;
    let d_fit = polyfit_columns(&t_amb, &offsets, m_ambient, "offset ambient fit")?;
    let unpack = |fit: &DMatrix<f64>| -> Vec<Array2<f64>> {
        (0..=m_ambient)
            .map(|k| Array2::from_shape_fn((h, w), |(i, j)| fit[(k, i * w + j)]))
            .collect()
    };
    let mut cal = LinearGD {
        g_poly: unpack(&g_fit),
        d_poly: unpack(&d_fit),
        min_abs_gain: 0.0,
        gain_floor: 0.0,
        t_amb_range: (t_amb[0], t_amb[t_amb.len() - 1]),
    };
    cal.min_abs_gain = t_amb
        .iter()
        .map(|&t| cal.gain_at(t).iter().fold(f64::INFINITY, |m, g| m.min(g.abs())))
        .fold(f64::INFINITY, f64::min);
    cal.gain_floor = 0.5 * cal.min_abs_gain;
    Ok(cal)
}

/// Linear calibration of a characterized camera, fitted to its noiseless
/// response on a grid of `n_amb × n_obj` operating points spanning the
/// model's ambient range and temperature bounds.
pub fn linear_gd_from_model(
    model: &CameraModel,
    m_ambient: usize,
    n_amb: usize,
    n_obj: usize,
) -> Result<LinearGD> {
    let (a0, a1) = model.t_amb_range;
    let (t0, t1) = model.temp_bounds;
    let n_amb = if a0 < a1 { n_amb.max(2) } else { 1 };
    let lin = |lo: f64, hi: f64, n: usize, i: usize| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(n_amb * n_obj);
    let (h, w) = model.dim();
    for a in 0..n_amb {
        let t_amb = lin(a0, a1, n_amb, a);
        let coeffs = pixelwise_at(model, t_amb)?;
        for o in 0..n_obj.max(2) {
            let t_obj = lin(t0, t1, n_obj.max(2), o);
            let gl = apply_pixelwise(&coeffs, &Array2::from_elem((h, w), t_obj));
            points.push(OperatingPoint::noiseless(t_amb, t_obj, GrayFrame::new(gl)?));
        }
    }
    fit_linear_gd(&points, m_ambient.min(n_amb - 1))
}

/// `t = (GL − D(t_amb)) / G(t_amb)`; pixels with `|G| ≤ gain_floor` are
/// masked and set to 0.
pub fn estimate_linear(cal: &LinearGD, frame: &GrayFrame, t_amb: f64) -> Result<Estimate> {
    if frame.dim() != cal.dim() {
        return Err(Error::GeometryMismatch {
            expected: cal.dim(),
            found: frame.dim(),
        });
    }
    let g = cal.gain_at(t_amb);
    let d = cal.offset_at(t_amb);
    let mut temps = Array2::zeros(frame.dim());
    let mut mask = Array2::from_elem(frame.dim(), false);
    Zip::from(&mut temps)
        .and(&mut mask)
        .and(frame.values())
        .and(&g)
        .and(&d)
        .for_each(|t, valid, &gl, &g, &d| {
            if g.abs() > cal.gain_floor {
                *t = (gl - d) / g;
                *valid = true;
            }
        });
    Ok(Estimate {
        map: TemperatureMap::new(temps)?,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Degrees;
    use ndarray::array;
    use proptest::prelude::*;

    const FIG_S1: [f64; 3] = [2215.32, 0.36, 2.55];

    fn quad_model(beta: [f64; 3], dim: usize) -> CameraModel {
        CameraModel {
            height: dim,
            width: dim,
            degrees: Degrees {
                m_gl: 2,
                m_spatial_fine: 15,
                m_radial: 0,
                m_ambient: 0,
            },
            gamma: beta.iter().map(|&b| array![[b]]).collect(),
            gl_bounds: (0.0, 16383.0),
            temp_bounds: (0.0, 100.0),
            t_amb_range: (20.0, 50.0),
            noise_var_gl2: 0.0,
        }
    }

    #[test]
    fn center_pixel_inversion() {
        let model = quad_model(FIG_S1, 3);
        let frame = GrayFrame::new(Array2::from_elem((3, 3), 6309.72)).unwrap();
        let est = invert_polynomial(&model, &frame, 38.9).unwrap();
        assert!(est.map.values().iter().all(|&t| (t - 40.0).abs() < 1e-6));
        assert_eq!(est.valid_count(), 9);
    }

    #[test]
    fn boundary_and_out_of_range() {
        let model = quad_model(FIG_S1, 2);
        let f_min = horner(&FIG_S1, 0.0);
        let frame = GrayFrame::new(array![[f_min, f_min - 1.0], [horner(&FIG_S1, 100.0), 1e6]]).unwrap();
        let est = invert_polynomial(&model, &frame, 30.0).unwrap();
        assert_eq!(est.map.values()[[0, 0]], 0.0);
        assert!(est.mask[[0, 0]]);
        assert!(!est.mask[[0, 1]]);
        assert_eq!(est.map.values()[[0, 1]], 0.0);
        assert_eq!(est.map.values()[[1, 0]], 100.0);
        assert!(!est.mask[[1, 1]]);
        assert_eq!(est.map.values()[[1, 1]], 100.0);
    }

    #[test]
    fn non_monotone_is_rejected() {
        // vertex at t = 50 inside the bounds
        let model = quad_model([1000.0, -100.0, 1.0], 2);
        let frame = GrayFrame::new(Array2::from_elem((2, 2), 1000.0)).unwrap();
        assert!(matches!(
            invert_polynomial(&model, &frame, 30.0),
            Err(Error::NotMonotone { row: 0, col: 0 })
        ));
    }

    #[test]
    fn decreasing_response_inverts_by_bisection() {
        let model = quad_model([9000.0, -40.0, -0.1], 2);
        let t = 63.25;
        let frame = GrayFrame::new(Array2::from_elem((2, 2), horner(&[9000.0, -40.0, -0.1], t))).unwrap();
        let est = invert_polynomial(&model, &frame, 30.0).unwrap();
        assert!(est.map.values().iter().all(|&x| (x - t).abs() < 1e-9));
    }

    fn linear_points(g: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64) -> Vec<OperatingPoint> {
        let mut pts = Vec::new();
        for &ta in &[25.0, 35.0, 45.0] {
            for &to in &[20.0, 40.0, 60.0] {
                let frame = Array2::from_elem((2, 3), g(ta) * to + d(ta));
                pts.push(OperatingPoint::noiseless(ta, to, GrayFrame::new(frame).unwrap()));
            }
        }
        pts
    }

    #[test]
    fn linear_gd_constant_recovery() {
        let cal = fit_linear_gd(&linear_points(|_| 2.0, |_| 100.0), 1).unwrap();
        assert!(cal.gain_at(33.0).iter().all(|&g| (g - 2.0).abs() < 1e-9));
        assert!(cal.offset_at(33.0).iter().all(|&d| (d - 100.0).abs() < 1e-9));
        let frame = GrayFrame::new(Array2::from_elem((2, 3), 180.0)).unwrap();
        let est = estimate_linear(&cal, &frame, 33.0).unwrap();
        assert!(est.map.values().iter().all(|&t| (t - 40.0).abs() < 1e-9));
        let at_d = GrayFrame::new(cal.offset_at(40.0)).unwrap();
        let est = estimate_linear(&cal, &at_d, 40.0).unwrap();
        assert!(est.map.values().iter().all(|&t| t.abs() < 1e-12));
    }

    #[test]
    fn linear_gd_ambient_dependent_gain() {
        let cal = fit_linear_gd(&linear_points(|t| 1.0 + 0.1 * t, |_| 50.0), 1).unwrap();
        for &t in &[25.0, 30.0, 45.0] {
            assert!(cal.gain_at(t).iter().all(|&g| (g - (1.0 + 0.1 * t)).abs() < 1e-9));
        }
        assert!((cal.min_abs_gain - 3.5).abs() < 1e-9);
        let (gg, dd) = cal.gxpd_at(30.0);
        assert!((gg[[0, 0]] - 0.25).abs() < 1e-12 && (dd[[0, 0]] + 12.5).abs() < 1e-9);
    }

    #[test]
    fn tiny_gain_is_masked() {
        let mut cal = fit_linear_gd(&linear_points(|_| 2.0, |_| 100.0), 0).unwrap();
        cal.g_poly[0][[1, 2]] = 1e-12;
        let frame = GrayFrame::new(Array2::from_elem((2, 3), 180.0)).unwrap();
        let est = estimate_linear(&cal, &frame, 30.0).unwrap();
        assert!(!est.mask[[1, 2]]);
        assert_eq!(est.valid_count(), 5);
    }

    #[test]
    fn linear_fit_needs_two_objects() {
        let pts: Vec<_> = linear_points(|_| 2.0, |_| 1.0)
            .into_iter()
            .filter(|p| p.t_obj == 20.0)
            .collect();
        assert!(matches!(fit_linear_gd(&pts, 0), Err(Error::Stage { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn closed_form_matches_bisection(
            b0 in 0.0f64..5000.0,
            b1 in -20.0f64..50.0,
            b2 in 0.01f64..5.0,
            u in 0.0f64..=1.0,
        ) {
            // keep the vertex left of the bracket so the response is increasing
            let lo = (-b1 / (2.0 * b2)).max(0.0) + 0.5;
            let hi = lo + 80.0;
            let beta = [b0, b1, b2];
            let gl = horner(&beta, lo) + u * (horner(&beta, hi) - horner(&beta, lo));
            let closed = quadratic_root(&beta, gl);
            let bis = bisect(&beta, gl, lo, hi, true);
            prop_assert!((closed - bis).abs() < 1e-6, "{closed} vs {bis}");
        }
    }
}
