//! Least-squares plumbing shared by every fitting stage.
//!
//! All fits go through an SVD-based pseudoinverse of a column-equilibrated
//! design matrix. Polynomial abscissae are mapped onto `[-1, 1]` before the
//! Vandermonde matrix is built and the coefficients are mapped back to the
//! raw variable afterwards.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one count as zero.
const RANK_RTOL: f64 = 1e-10;

/// Affine map `u = (x - center) / half_width` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scaling {
    pub center: f64,
    pub half_width: f64,
}

impl Scaling {
    pub fn spanning(xs: &[f64]) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let half_width = 0.5 * (hi - lo);
        if !(half_width > 0.0) || !half_width.is_finite() {
            // a single abscissa; keep the variable as is and let the rank
            // check reject anything above degree 0
            return Self {
                center: if lo.is_finite() { lo } else { 0.0 },
                half_width: 1.0,
            };
        }
        Self {
            center: 0.5 * (hi + lo),
            half_width,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.half_width
    }
}

/// Rows `[1, u, u², ..., u^degree]` for each `u = scaling(x)`.
pub(crate) fn vandermonde(xs: &[f64], degree: usize, scaling: Scaling) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), degree + 1, |i, k| {
        scaling.apply(xs[i]).powi(k as i32)
    })
}

/// Rewrites `Σ a_k u^k`, `u = (x - c)/s`, as `Σ b_j x^j`.
pub(crate) fn unscale_poly(scaled: &[f64], scaling: Scaling) -> Vec<f64> {
    let Scaling {
        center: c,
        half_width: s,
    } = scaling;
    let n = scaled.len();
    let mut out = vec![0.0; n];
    let mut binom = vec![1.0f64; n];
    for (k, &a) in scaled.iter().enumerate() {
        // binom holds C(k, j) for j = 0..=k
        if k > 0 {
            for j in (1..k).rev() {
                binom[j] += binom[j - 1];
            }
            binom[k] = 1.0;
        }
        let ak = a / s.powi(k as i32);
        for j in 0..=k {
            out[j] += ak * binom[j] * (-c).powi((k - j) as i32);
        }
    }
    out
}

/// Moore–Penrose pseudoinverse of a full-column-rank design matrix.
///
/// Fails with [`Error::SingularFit`] when the numerical rank is below the
/// column count.
pub(crate) fn pseudo_inverse(design: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(Error::SingularFit {
            what,
            rank: rows,
            unknowns: cols,
        });
    }
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    let mut scaled = design.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        if norms[k] > 0.0 {
            col /= norms[k];
        }
    }
    let svd = scaled.svd(true, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > sigma_max * RANK_RTOL)
        .count();
    if rank < cols || norms.contains(&0.0) {
        return Err(Error::SingularFit {
            what,
            rank,
            unknowns: cols,
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    // pinv(A D^-1) = V S^-1 U^T, so pinv(A) = D^-1 V S^-1 U^T
    let mut v_sinv = v_t.transpose();
    for (k, mut col) in v_sinv.column_iter_mut().enumerate() {
        col /= svd.singular_values[k];
    }
    let mut pinv = v_sinv * u.transpose();
    for (k, mut row) in pinv.row_iter_mut().enumerate() {
        row /= norms[k];
    }
    Ok(pinv)
}

/// Least-squares polynomial fit of several series sharing the abscissae `xs`.
///
/// `ys` holds one series per column (`xs.len()` rows). Returns a
/// `(degree + 1) × ncols` matrix whose row `k` multiplies `x^k`.
pub(crate) fn polyfit_columns(
    xs: &[f64],
    ys: &DMatrix<f64>,
    degree: usize,
    what: &'static str,
) -> Result<DMatrix<f64>> {
    let scaling = Scaling::spanning(xs);
    let pinv = pseudo_inverse(&vandermonde(xs, degree, scaling), what)?;
    let scaled = pinv * ys;
    let mut out = DMatrix::zeros(degree + 1, ys.ncols());
    let mut buf = vec![0.0; degree + 1];
    for c in 0..ys.ncols() {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = scaled[(k, c)];
        }
        for (k, v) in unscale_poly(&buf, scaling).into_iter().enumerate() {
            out[(k, c)] = v;
        }
    }
    Ok(out)
}

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub(crate) fn to_array2(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn(m.shape(), |(i, j)| m[(i, j)])
}

/// Horner evaluation of `Σ coeffs[k] x^k`.
pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
