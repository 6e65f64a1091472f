//! Scoring of estimated temperature maps against ground truth.

use ndarray::{s, Array2, ArrayView2, Zip};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frame::DEFAULT_TEMP_RANGE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    /// DSSIM weight.
    pub beta: f64,
    /// Total-variation weight.
    pub gamma: f64,
    /// Side of the square SSIM window, odd.
    pub window: usize,
    pub window_sigma: f64,
    /// Dynamic range `L` used by SSIM and PSNR.
    pub dynamic_range: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self::e2e()
    }
}

impl MetricsConfig {
    /// Weights of the direct end-to-end estimator.
    pub fn e2e() -> Self {
        Self {
            beta: 0.01,
            gamma: 0.001,
            window: 11,
            window_sigma: 1.5,
            dynamic_range: DEFAULT_TEMP_RANGE.1 - DEFAULT_TEMP_RANGE.0,
        }
    }

    /// Weights of the gain/offset (GxPD) estimator.
    pub fn gxpd() -> Self {
        Self {
            gamma: 0.0001,
            ..Self::e2e()
        }
    }

    pub fn with_dynamic_range(self, dynamic_range: f64) -> Self {
        Self {
            dynamic_range,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be >= 0, got beta={} gamma={}",
                self.beta, self.gamma
            )));
        }
        if self.window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "SSIM window must be odd, got {}",
                self.window
            )));
        }
        if !(self.window_sigma > 0.0) || !(self.dynamic_range > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SSIM sigma and dynamic range must be positive, got {} and {}",
                self.window_sigma, self.dynamic_range
            )));
        }
        Ok(())
    }
}

fn same_dim(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::GeometryMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Mean absolute difference over pixels where `mask` is `true` (all pixels
/// without a mask).
pub fn mae(a: &Array2<f64>, b: &Array2<f64>, mask: Option<&Array2<bool>>) -> Result<f64> {
    same_dim(a, b)?;
    let (sum, n) = match mask {
        None => (Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y).abs()), a.len()),
        Some(mask) => {
            if mask.dim() != a.dim() {
                return Err(Error::GeometryMismatch {
                    expected: a.dim(),
                    found: mask.dim(),
                });
            }
            Zip::from(a).and(b).and(mask).fold((0.0, 0), |(s, n), &x, &y, &m| {
                if m {
                    (s + (x - y).abs(), n + 1)
                } else {
                    (s, n)
                }
            })
        }
    };
    if n == 0 {
        return Err(Error::Empty("mask selects no pixels"));
    }
    Ok(sum / n as f64)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|k| {
            let x = k as f64 - r;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable weighted sum over every full window position.
fn filter_valid(x: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let n = k.len();
    let (h, w) = x.dim();
    let rows: Array2<f64> = Array2::from_shape_fn((h, w + 1 - n), |(i, j)| {
        k.iter().enumerate().map(|(t, &c)| c * x[[i, j + t]]).sum::<f64>()
    });
    Array2::from_shape_fn((h + 1 - n, w + 1 - n), |(i, j)| {
        k.iter().enumerate().map(|(t, &c)| c * rows[[i + t, j]]).sum::<f64>()
    })
}

/// Mean local SSIM over all window positions fully inside the frame.
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>, cfg: &MetricsConfig) -> Result<f64> {
    same_dim(a, b)?;
    cfg.validate()?;
    let (h, w) = a.dim();
    if h < cfg.window || w < cfg.window {
        return Err(Error::InvalidGeometry {
            height: h,
            width: w,
            reason: "smaller than the SSIM window",
        });
    }
    let k = gaussian_window(cfg.window, cfg.window_sigma);
    let c1 = (0.01 * cfg.dynamic_range).powi(2);
    let c2 = (0.03 * cfg.dynamic_range).powi(2);
    let mu_a = filter_valid(a, &k);
    let mu_b = filter_valid(b, &k);
    let aa = filter_valid(&(a * a), &k);
    let bb = filter_valid(&(b * b), &k);
    let ab = filter_valid(&(a * b), &k);
    let mut total = 0.0;
    Zip::from(&mu_a)
        .and(&mu_b)
        .and(&aa)
        .and(&bb)
        .and(&ab)
        .for_each(|&ma, &mb, &aa, &bb, &ab| {
            let var_a = aa - ma * ma;
            let var_b = bb - mb * mb;
            let cov = ab - ma * mb;
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        });
    Ok(total / mu_a.len() as f64)
}

pub fn dssim(a: &Array2<f64>, b: &Array2<f64>, cfg: &MetricsConfig) -> Result<f64> {
    Ok((1.0 - ssim(a, b, cfg)?) / 2.0)
}

/// `(Σ|∂x| + Σ|∂y|) / (h·w)` with forward differences inside the frame.
pub fn tv(map: &Array2<f64>) -> f64 {
    let (h, w) = map.dim();
    if h == 0 || w == 0 {
        return 0.0;
    }
    let abs_diff_sum = |x: ArrayView2<f64>, y: ArrayView2<f64>| {
        Zip::from(x).and(y).fold(0.0, |acc, &p, &q| acc + (q - p).abs())
    };
    let horizontal = abs_diff_sum(map.slice(s![.., ..w - 1]), map.slice(s![.., 1..]));
    let vertical = abs_diff_sum(map.slice(s![..h - 1, ..]), map.slice(s![1.., ..]));
    (horizontal + vertical) / (h * w) as f64
}

/// `10·log10(L² / MSE)`; infinite for identical inputs.
pub fn psnr(a: &Array2<f64>, b: &Array2<f64>, peak: f64) -> Result<f64> {
    same_dim(a, b)?;
    let mse = Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y)) / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// `mae + β·dssim + γ·tv(estimate)`.
pub fn combined_loss(estimate: &Array2<f64>, truth: &Array2<f64>, cfg: &MetricsConfig) -> Result<f64> {
    Ok(mae(estimate, truth, None)? + cfg.beta * dssim(estimate, truth, cfg)? + cfg.gamma * tv(estimate))
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub name: String,
    pub mae: f64,
    #[serde(serialize_with = "ser_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub valid_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_mae: f64,
    #[serde(serialize_with = "ser_db")]
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub dynamic_range: f64,
}

/// One estimate/truth pair to score, with an optional validity mask.
pub struct EvalPair<'a> {
    pub name: String,
    pub estimate: &'a Array2<f64>,
    pub truth: &'a Array2<f64>,
    pub mask: Option<&'a Array2<bool>>,
}

/// Per-pair MAE/PSNR/SSIM and their means.
pub fn evaluate(pairs: &[EvalPair<'_>], cfg: &MetricsConfig) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("nothing to evaluate"));
    }
    let rows = pairs
        .iter()
        .map(|p| {
            let valid_pixels = p.mask.map_or(p.estimate.len(), |m| m.iter().filter(|&&v| v).count());
            Ok(EvalRow {
                name: p.name.clone(),
                mae: mae(p.estimate, p.truth, p.mask)?,
                psnr_db: psnr(p.estimate, p.truth, cfg.dynamic_range)?,
                ssim: ssim(p.estimate, p.truth, cfg)?,
                valid_pixels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    Ok(EvalReport {
        mean_mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
        mean_psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
        mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        dynamic_range: cfg.dynamic_range,
        rows,
    })
}
