//! Build a [`CameraModel`] from blackbody operating points.
//!
//! Per ambient temperature a polynomial in object temperature is fitted at
//! every pixel. Each coefficient map is then smoothed, reduced to a
//! tensor-product spatial polynomial (once quadratic, once fine), de-skewed
//! by subtracting the two, projected onto a radial polynomial in `P`, and
//! finally every radial coefficient is fitted as a polynomial of the ambient
//! temperature. The result is one Γ matrix per gray-level order.

use nalgebra::DMatrix;
use ndarray::Array2;
use rayon::prelude::*;

use crate::basis::{centered_ramp, check_geometry, make_basis_grids, BasisGrids};
use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::frame::OperatingPoint;
use crate::lstsq::{polyfit_columns, pseudo_inverse, to_dmatrix, to_array2, vandermonde, Scaling};
use crate::model::{CameraModel, FitConfig, PixelwiseCoeffs, RadialCoeffs, SpatialPolyCoeffs};

fn common_dim(points: &[OperatingPoint]) -> Result<(usize, usize)> {
    let first = points
        .first()
        .ok_or(Error::Empty("no operating points"))?
        .mean_frame
        .dim();
    for p in points {
        if p.mean_frame.dim() != first {
            return Err(Error::GeometryMismatch {
                expected: first,
                found: p.mean_frame.dim(),
            });
        }
    }
    Ok(first)
}

/// Per-pixel least-squares polynomial of gray level against object
/// temperature, for operating points sharing one ambient temperature.
///
/// One pseudoinverse of the shared Vandermonde design is applied to every
/// pixel.
pub fn fit_pixelwise(points: &[OperatingPoint], m_gl: usize) -> Result<PixelwiseCoeffs> {
    let (h, w) = common_dim(points)?;
    let t_amb = points[0].t_amb;
    if points.iter().any(|p| p.t_amb != t_amb) {
        return Err(Error::InvalidConfig(
            "fit_pixelwise expects operating points at a single ambient temperature".into(),
        ));
    }
    let npix = h * w;
    let t_obj: Vec<f64> = points.iter().map(|p| p.t_obj).collect();
    let mut responses = DMatrix::zeros(points.len(), npix);
    for (i, p) in points.iter().enumerate() {
        for (k, &v) in p.mean_frame.values().iter().enumerate() {
            responses[(i, k)] = v;
        }
    }
    let coeffs = polyfit_columns(&t_obj, &responses, m_gl, "pixel-wise object-temperature fit")?;
    let maps = (0..=m_gl)
        .map(|m| Array2::from_shape_fn((h, w), |(i, j)| coeffs[(m, i * w + j)]))
        .collect();
    Ok(PixelwiseCoeffs { maps })
}

/// Smooths every coefficient map with a normalized Gaussian of width `sigma`.
pub fn smooth_coeffs(coeffs: &PixelwiseCoeffs, sigma: f64) -> PixelwiseCoeffs {
    PixelwiseCoeffs {
        maps: coeffs
            .maps
            .iter()
            .map(|m| gaussian_smooth(m, sigma))
            .collect(),
    }
}

/// Scaled 1-D Vandermonde for a ramp in `[-0.5, 0.5]`: column `k` holds `(2x)^k`.
fn ramp_vandermonde(n: usize, max_exp: usize) -> DMatrix<f64> {
    let ramp = centered_ramp(n);
    vandermonde(
        ramp.as_slice().expect("contiguous"),
        max_exp,
        Scaling {
            center: 0.0,
            half_width: 0.5,
        },
    )
}

/// Least-squares fit of `coeff_map` onto `{H^q · W^z : 0 ≤ q, z ≤ max_exp}`.
///
/// The pixel grid is a tensor product of the row and column ramps, so the
/// full design matrix is the Kronecker product of two small Vandermonde
/// matrices and its pseudoinverse factors the same way.
pub fn fit_spatial(coeff_map: &Array2<f64>, max_exp: usize) -> Result<SpatialPolyCoeffs> {
    let (h, w) = coeff_map.dim();
    check_geometry(h, w)?;
    let unknowns = (max_exp + 1) * (max_exp + 1);
    if unknowns > h * w || max_exp + 1 > h || max_exp + 1 > w {
        return Err(Error::SingularFit {
            what: "spatial fit",
            rank: (max_exp + 1).min(h) * (max_exp + 1).min(w),
            unknowns,
        });
    }
    let pinv_h = pseudo_inverse(&ramp_vandermonde(h, max_exp), "spatial fit (rows)")?;
    let pinv_w = pseudo_inverse(&ramp_vandermonde(w, max_exp), "spatial fit (columns)")?;
    let scaled = &pinv_h * to_dmatrix(coeff_map) * pinv_w.transpose();
    let coeffs = Array2::from_shape_fn((max_exp + 1, max_exp + 1), |(q, z)| {
        scaled[(q, z)] * 2f64.powi((q + z) as i32)
    });
    Ok(SpatialPolyCoeffs { coeffs })
}

/// Evaluates `Σ coeffs[q,z] H^q W^z` on an `h × w` grid.
pub fn eval_spatial(spatial: &SpatialPolyCoeffs, height: usize, width: usize) -> Array2<f64> {
    let n = spatial.max_exp();
    let scaled = DMatrix::from_fn(n + 1, n + 1, |q, z| {
        spatial.coeffs[[q, z]] / 2f64.powi((q + z) as i32)
    });
    let surface = ramp_vandermonde(height, n) * scaled * ramp_vandermonde(width, n).transpose();
    to_array2(&surface)
}

/// Bias averaged between the fits, every other term `fine − quad`, with quad
/// terms beyond its own degree read as zero.
fn deskew_unchecked(fine: &SpatialPolyCoeffs, quad: &SpatialPolyCoeffs) -> SpatialPolyCoeffs {
    let n = fine.max_exp().max(quad.max_exp());
    let get = |c: &SpatialPolyCoeffs, q: usize, z: usize| c.coeffs.get([q, z]).copied().unwrap_or(0.0);
    let mut coeffs = Array2::from_shape_fn((n + 1, n + 1), |(q, z)| get(fine, q, z) - get(quad, q, z));
    coeffs[[0, 0]] = 0.5 * (get(fine, 0, 0) + get(quad, 0, 0));
    SpatialPolyCoeffs { coeffs }
}

/// Removes low-order skew by subtracting the quadratic spatial fit from the
/// fine one. The bias term is the mean of the two fits' biases.
pub fn deskew(fine: &SpatialPolyCoeffs, quad: &SpatialPolyCoeffs) -> Result<SpatialPolyCoeffs> {
    if quad.max_exp() != 2 {
        return Err(Error::InvalidConfig(format!(
            "deskew needs a quadratic fit (max exponent 2), got {}",
            quad.max_exp()
        )));
    }
    if fine.max_exp() <= 2 {
        return Err(Error::InvalidConfig(format!(
            "deskew needs a fine fit above exponent 2, got {}",
            fine.max_exp()
        )));
    }
    Ok(deskew_unchecked(fine, quad))
}

/// Least-squares projection of the evaluated spatial surface onto
/// `{P^r : 0 ≤ r ≤ max_exp}` over all pixels.
pub fn fit_radial(
    spatial: &SpatialPolyCoeffs,
    grids: &BasisGrids,
    max_exp: usize,
) -> Result<RadialCoeffs> {
    let (h, w) = grids.dim();
    let surface = eval_spatial(spatial, h, w);
    fit_radial_surface(&surface, grids, max_exp)
}

pub(crate) fn fit_radial_surface(
    surface: &Array2<f64>,
    grids: &BasisGrids,
    max_exp: usize,
) -> Result<RadialCoeffs> {
    if surface.dim() != grids.dim() {
        return Err(Error::GeometryMismatch {
            expected: grids.dim(),
            found: surface.dim(),
        });
    }
    let radii: Vec<f64> = grids.p.iter().copied().collect();
    let ys = DMatrix::from_iterator(radii.len(), 1, surface.iter().copied());
    let fit = polyfit_columns(&radii, &ys, max_exp, "radial fit")?;
    Ok(RadialCoeffs {
        coeffs: fit.column(0).iter().copied().collect(),
    })
}

/// Fits each radial coefficient's trajectory over ambient temperature with
/// a polynomial of degree `m_ambient`. Returns Γ, `(m_ambient+1) × (m_radial+1)`.
pub fn fit_ambient(
    radial_sets: &[RadialCoeffs],
    t_amb: &[f64],
    m_ambient: usize,
) -> Result<Array2<f64>> {
    if radial_sets.is_empty() {
        return Err(Error::Empty("no radial coefficient sets"));
    }
    if radial_sets.len() != t_amb.len() {
        return Err(Error::InvalidConfig(format!(
            "{} radial sets for {} ambient temperatures",
            radial_sets.len(),
            t_amb.len()
        )));
    }
    let ncoef = radial_sets[0].coeffs.len();
    if radial_sets.iter().any(|r| r.coeffs.len() != ncoef) {
        return Err(Error::InvalidConfig(
            "radial sets differ in length".into(),
        ));
    }
    let ys = DMatrix::from_fn(t_amb.len(), ncoef, |i, r| radial_sets[i].coeffs[r]);
    let gamma = polyfit_columns(t_amb, &ys, m_ambient, "ambient fit")?;
    Ok(to_array2(&gamma))
}

/// Spatial mean of each point's variance frame, averaged over all points.
pub fn estimate_noise_variance(points: &[OperatingPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("no operating points for noise estimate"));
    }
    let total: f64 = points
        .iter()
        .map(|p| p.var_frame.mean().unwrap_or(0.0))
        .sum();
    Ok(total / points.len() as f64)
}

/// RMS residual of every fitting stage for one (order, ambient) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResiduals {
    pub order: usize,
    pub t_amb: f64,
    /// pixel-wise fit vs. measured responses, over this ambient's points;
    /// reported on the order-0 row, NaN on the others
    pub pixelwise_rms: f64,
    pub smoothing_rms: f64,
    pub spatial_quad_rms: f64,
    pub spatial_fine_rms: f64,
    /// de-skewed surface vs. its radial projection
    pub radial_rms: f64,
}

#[derive(Debug, Clone)]
pub struct Characterization {
    pub model: CameraModel,
    pub residuals: Vec<StageResiduals>,
}

fn rms_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.len() as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

fn ordered_bounds(lo: f64, hi: f64, pad: f64) -> (f64, f64) {
    if lo < hi {
        (lo, hi)
    } else {
        (lo - pad, hi + pad)
    }
}

/// Groups points by exact ambient temperature, ascending.
pub(crate) fn group_by_ambient(points: &[OperatingPoint]) -> Vec<(f64, Vec<OperatingPoint>)> {
    let mut sorted: Vec<&OperatingPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.t_amb.total_cmp(&b.t_amb).then(a.t_obj.total_cmp(&b.t_obj)));
    let mut groups: Vec<(f64, Vec<OperatingPoint>)> = Vec::new();
    for p in sorted {
        match groups.last_mut() {
            Some((t, g)) if *t == p.t_amb => g.push(p.clone()),
            _ => groups.push((p.t_amb, vec![p.clone()])),
        }
    }
    groups
}

fn pixelwise_rms(points: &[OperatingPoint], coeffs: &PixelwiseCoeffs) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in points {
        for (idx, &gl) in p.mean_frame.values().indexed_iter() {
            let mut pred = 0.0;
            for map in coeffs.maps.iter().rev() {
                pred = pred * p.t_obj + map[idx];
            }
            sum += (gl - pred) * (gl - pred);
            n += 1;
        }
    }
    (sum / n as f64).sqrt()
}

pub fn characterize_camera(points: &[OperatingPoint], cfg: &FitConfig) -> Result<CameraModel> {
    characterize_camera_with_residuals(points, cfg).map(|c| c.model)
}

/// Full characterization, also returning the residual of every stage.
///
/// Spatial and radial degrees are capped at what the frame geometry can
/// resolve (`h−1`, `w−1`, and the number of distinct radii minus one); Γ
/// columns above the cap are zero.
pub fn characterize_camera_with_residuals(
    points: &[OperatingPoint],
    cfg: &FitConfig,
) -> Result<Characterization> {
    cfg.validate()?;
    let (h, w) = common_dim(points)?;
    let grids = make_basis_grids(h, w)?;
    let groups = group_by_ambient(points);
    if groups.len() < cfg.m_ambient + 1 {
        return Err(Error::SingularFit {
            what: "ambient fit (too few distinct ambient temperatures)",
            rank: groups.len(),
            unknowns: cfg.m_ambient + 1,
        });
    }

    let pixelwise: Vec<PixelwiseCoeffs> = groups
        .par_iter()
        .map(|(t_amb, pts)| {
            fit_pixelwise(pts, cfg.m_gl)
                .map_err(|e| e.in_stage(format!("pixel-wise fit at t_amb={t_amb}")))
        })
        .collect::<Result<_>>()?;

    let quad_exp = cfg.m_spatial_quad.min(h - 1).min(w - 1);
    let fine_exp = cfg.m_spatial_fine.min(h - 1).min(w - 1);
    let mut radii: Vec<f64> = grids.p.iter().copied().collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let radial_exp = cfg.m_radial.min(radii.len() - 1);
    if quad_exp < cfg.m_spatial_quad || fine_exp < cfg.m_spatial_fine || radial_exp < cfg.m_radial {
        log::warn!(
            "{h}x{w} frame caps degrees at quad={quad_exp} fine={fine_exp} radial={radial_exp}"
        );
    }

    let jobs: Vec<(usize, usize)> = (0..=cfg.m_gl)
        .flat_map(|m| (0..groups.len()).map(move |g| (m, g)))
        .collect();
    let stage_out: Vec<(RadialCoeffs, StageResiduals)> = jobs
        .par_iter()
        .map(|&(m, g)| {
            let t_amb = groups[g].0;
            let label = |stage: &str| format!("{stage} for order {m} at t_amb={t_amb}");
            let raw = &pixelwise[g].maps[m];
            let smoothed = gaussian_smooth(raw, cfg.smoothing_sigma);
            let quad = fit_spatial(&smoothed, quad_exp).map_err(|e| e.in_stage(label("quadratic spatial fit")))?;
            let fine = fit_spatial(&smoothed, fine_exp).map_err(|e| e.in_stage(label("fine spatial fit")))?;
            let skewless = deskew_unchecked(&fine, &quad);
            let surface = eval_spatial(&skewless, h, w);
            let mut radial = fit_radial_surface(&surface, &grids, radial_exp)
                .map_err(|e| e.in_stage(label("radial fit")))?;
            let radial_surface = eval_radial(&radial.coeffs, &grids.p);
            radial.coeffs.resize(cfg.m_radial + 1, 0.0);
            let residuals = StageResiduals {
                order: m,
                t_amb,
                pixelwise_rms: if m == 0 {
                    pixelwise_rms(&groups[g].1, &pixelwise[g])
                } else {
                    f64::NAN
                },
                smoothing_rms: rms_diff(raw, &smoothed),
                spatial_quad_rms: rms_diff(&smoothed, &eval_spatial(&quad, h, w)),
                spatial_fine_rms: rms_diff(&smoothed, &eval_spatial(&fine, h, w)),
                radial_rms: rms_diff(&surface, &radial_surface),
            };
            Ok((radial, residuals))
        })
        .collect::<Result<_>>()?;

    let t_amb: Vec<f64> = groups.iter().map(|(t, _)| *t).collect();
    let mut gamma = Vec::with_capacity(cfg.m_gl + 1);
    let mut residuals = Vec::with_capacity(stage_out.len());
    for m in 0..=cfg.m_gl {
        let sets: Vec<RadialCoeffs> = stage_out[m * groups.len()..(m + 1) * groups.len()]
            .iter()
            .map(|(r, _)| r.clone())
            .collect();
        let g = fit_ambient(&sets, &t_amb, cfg.m_ambient)
            .map_err(|e| e.in_stage(format!("ambient fit for order {m}")))?;
        gamma.push(g);
    }
    for (_, r) in stage_out {
        residuals.push(r);
    }

    let (gl_lo, gl_hi) = points
        .iter()
        .flat_map(|p| p.mean_frame.values().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (t_lo, t_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.t_obj), hi.max(p.t_obj)));
    let model = CameraModel {
        height: h,
        width: w,
        degrees: cfg.degrees(),
        gamma,
        gl_bounds: ordered_bounds(gl_lo, gl_hi, 0.5),
        temp_bounds: ordered_bounds(t_lo, t_hi, 0.5),
        t_amb_range: (t_amb[0], t_amb[t_amb.len() - 1]),
        noise_var_gl2: estimate_noise_variance(points)?,
    };
    model.validate()?;
    Ok(Characterization { model, residuals })
}

/// `Σ coeffs[r] P^r` element-wise.
pub(crate) fn eval_radial(coeffs: &[f64], p: &Array2<f64>) -> Array2<f64> {
    p.mapv(|r| coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c))
}
