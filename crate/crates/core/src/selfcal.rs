//! End-to-end self-consistency check: synthesize a blackbody campaign from a
//! reference model, characterize it, and measure how well the rebuilt model
//! reproduces the campaign and inverts fresh frames.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Zip};
use rand_distr::{ChiSquared, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::characterize::characterize_camera_with_residuals;
use crate::error::{Error, Result};
use crate::estimate::invert_polynomial;
use crate::frame::{GrayFrame, OperatingPoint, TemperatureMap};
use crate::frameio::{write_gray, Dtype, FrameHeader, FrameKind};
use crate::lstsq::{unscale_poly, Scaling};
use crate::metrics::mae;
use crate::model::{CameraModel, Degrees, FitConfig};
use crate::simulate::{add_read_noise, apply_pixelwise, derive_seed, pixelwise_at, quantize, stream_rng};

/// Ambient temperatures of the reference chamber campaign, °C.
pub const CHAMBER_T_AMB: [f64; 12] = [27.0, 31.0, 37.2, 38.9, 40.4, 41.5, 43.6, 44.7, 46.2, 46.8, 48.0, 50.8];

/// Blackbody set points 20..=60 °C in 5 °C steps.
pub fn chamber_t_obj() -> Vec<f64> {
    (0..9).map(|i| 20.0 + 5.0 * i as f64).collect()
}

/// Polynomial in `u = t_amb − 38.9` rewritten in powers of `t_amb`, padded
/// to four terms.
fn ambient_poly(centered: [f64; 4]) -> [f64; 4] {
    let raw = unscale_poly(
        &centered,
        Scaling {
            center: 38.9,
            half_width: 1.0,
        },
    );
    [raw[0], raw[1], raw[2], raw[3]]
}

/// A 14-bit uncooled camera: at 38.9 °C ambient the center pixel reads
/// `2215.32 + 0.36·t + 2.55·t²`, with a radial falloff of a few tenths of a
/// percent that steepens with the ambient temperature.
pub fn reference_model(height: usize, width: usize) -> Result<CameraModel> {
    let m_radial = 8;
    let m_ambient = 3;
    // (order, radial exponent) -> ambient polynomial in u = t_amb - 38.9
    let terms: [(usize, usize, [f64; 4]); 8] = [
        (0, 0, [2215.32, 30.0, 0.2, 0.002]),
        (0, 2, [-9.0, -0.3, 0.0, 0.0]),
        (0, 4, [4.0, 0.05, 0.0, 0.0]),
        (1, 0, [0.36, -0.01, 0.0, 0.0]),
        (1, 2, [-0.004, 0.0, 0.0, 0.0]),
        (2, 0, [2.55, 0.005, 0.0, 0.0]),
        (2, 2, [-0.012, -0.0002, 0.0, 0.0]),
        (2, 4, [0.004, 0.0, 0.0, 0.0]),
    ];
    let mut gamma = vec![Array2::zeros((m_ambient + 1, m_radial + 1)); 3];
    for (m, r, centered) in terms {
        for (k, c) in ambient_poly(centered).into_iter().enumerate() {
            gamma[m][[k, r]] = c;
        }
    }
    let model = CameraModel {
        height,
        width,
        degrees: Degrees {
            m_gl: 2,
            m_spatial_fine: 15,
            m_radial,
            m_ambient,
        },
        gamma,
        gl_bounds: (0.0, 16383.0),
        temp_bounds: (0.0, 70.0),
        t_amb_range: (CHAMBER_T_AMB[0], CHAMBER_T_AMB[CHAMBER_T_AMB.len() - 1]),
        noise_var_gl2: 5.0,
    };
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub t_amb: Vec<f64>,
    pub t_obj: Vec<f64>,
    /// Per-frame additive read-noise variance, GL².
    pub noise_var: f64,
    /// Frames averaged per operating point.
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            t_amb: CHAMBER_T_AMB.to_vec(),
            t_obj: chamber_t_obj(),
            noise_var: 0.0,
            n_frames: 1,
            seed: 0,
        }
    }
}

impl CampaignSpec {
    fn validate(&self) -> Result<()> {
        if self.t_amb.is_empty() || self.t_obj.is_empty() {
            return Err(Error::Empty("campaign temperature sets"));
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidConfig("n_frames must be at least 1".into()));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be finite and >= 0, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        self.t_amb
            .iter()
            .flat_map(|&a| self.t_obj.iter().map(move |&o| (a, o)))
            .collect()
    }
}

/// Averaged operating points drawn from `reference`.
///
/// With noise, the mean of `N` frames is drawn directly as `N(0, σ²/N)`
/// around the response and the sample variance as `σ²·χ²(N−1)/(N−1)`.
pub fn synthesize_campaign(reference: &CameraModel, spec: &CampaignSpec) -> Result<Vec<OperatingPoint>> {
    spec.validate()?;
    let dim = reference.dim();
    spec.grid()
        .into_par_iter()
        .enumerate()
        .map(|(i, (t_amb, t_obj))| {
            let coeffs = pixelwise_at(reference, t_amb)?;
            let clean = apply_pixelwise(&coeffs, &Array2::from_elem(dim, t_obj));
            if spec.noise_var == 0.0 {
                let p = OperatingPoint::noiseless(t_amb, t_obj, GrayFrame::new(clean)?);
                return Ok(OperatingPoint { n_frames: spec.n_frames, ..p });
            }
            let n = spec.n_frames as f64;
            let seed = derive_seed(spec.seed, i as u64);
            let mut rng = stream_rng(seed, 0);
            let normal = Normal::new(0.0, (spec.noise_var / n).sqrt()).expect("finite std");
            let mean = clean.mapv(|v| v + normal.sample(&mut rng));
            let var = if spec.n_frames > 1 {
                let chi = ChiSquared::new(n - 1.0).expect("positive dof");
                Array2::from_shape_simple_fn(dim, || spec.noise_var * chi.sample(&mut rng) / (n - 1.0))
            } else {
                Array2::zeros(dim)
            };
            OperatingPoint::new(t_amb, t_obj, GrayFrame::new(mean)?, var, spec.n_frames)
        })
        .collect()
}

/// Writes every individual quantized frame of the campaign into `dir`,
/// tagged for [`crate::frameio::ingest_campaign`].
pub fn write_campaign(reference: &CameraModel, spec: &CampaignSpec, dir: impl AsRef<Path>) -> Result<usize> {
    spec.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = reference.dim();
    let grid = spec.grid();
    grid.par_iter().enumerate().try_for_each(|(i, &(t_amb, t_obj))| {
        let coeffs = pixelwise_at(reference, t_amb)?;
        let clean = GrayFrame::new(apply_pixelwise(&coeffs, &Array2::from_elem(dim, t_obj)))?;
        for k in 0..spec.n_frames {
            let seed = derive_seed(derive_seed(spec.seed, i as u64), k as u64);
            let (frame, _) = quantize(&add_read_noise(&clean, spec.noise_var, seed)?);
            let header = FrameHeader::new(FrameKind::Graylevel, Dtype::U16, dim)
                .with_temps(Some(t_amb), Some(t_obj))
                .with_seed(seed);
            write_gray(&frame, header, dir.join(format!("p{i:04}_f{k:04}.tframe")))?;
        }
        Ok(())
    })?;
    Ok(grid.len() * spec.n_frames)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub t_amb: f64,
    pub t_obj: f64,
    /// max over pixels of |rebuilt − campaign| / |campaign|
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmbientReport {
    pub t_amb: f64,
    /// Coefficient of determination of each pixel's response over the
    /// object-temperature series, minimum and mean over pixels.
    pub min_pixel_r2: f64,
    pub mean_pixel_r2: f64,
    /// Inversion of a fresh reference frame with the rebuilt model, °C.
    pub roundtrip_mae: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcalReport {
    pub height: usize,
    pub width: usize,
    pub noise_var: f64,
    pub n_frames: usize,
    pub points: Vec<PointReport>,
    pub ambients: Vec<AmbientReport>,
    pub min_r2: f64,
    pub max_rel_err: f64,
    pub max_roundtrip_mae: f64,
    pub characterize_seconds: f64,
}

/// Smooth in-bounds scene used for the round-trip part of the check.
fn roundtrip_scene(dim: (usize, usize), lo: f64, hi: f64) -> Result<TemperatureMap> {
    let (h, w) = dim;
    let (a, b) = (lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
    TemperatureMap::new(Array2::from_shape_fn(dim, |(i, j)| {
        let x = j as f64 / (w - 1) as f64;
        let y = i as f64 / (h - 1) as f64;
        a + (b - a) * (0.5 * x + 0.3 * y + 0.2 * (3.0 * x * y).sin().abs())
    }))
}

pub fn selfcal_check(
    reference: &CameraModel,
    spec: &CampaignSpec,
    cfg: &FitConfig,
) -> Result<(SelfcalReport, CameraModel)> {
    let points = synthesize_campaign(reference, spec).map_err(|e| e.in_stage("synthesize"))?;
    let start = Instant::now();
    let rebuilt = characterize_camera_with_residuals(&points, cfg)
        .map_err(|e| e.in_stage("characterize"))?
        .model;
    let characterize_seconds = start.elapsed().as_secs_f64();
    let (report_points, ambients) = score(reference, &rebuilt, &points, spec)?;
    let report = SelfcalReport {
        height: reference.height,
        width: reference.width,
        noise_var: spec.noise_var,
        n_frames: spec.n_frames,
        min_r2: ambients.iter().map(|a| a.min_pixel_r2).fold(f64::INFINITY, f64::min),
        max_rel_err: report_points.iter().map(|p| p.max_rel_err).fold(0.0, f64::max),
        max_roundtrip_mae: ambients.iter().map(|a| a.roundtrip_mae).fold(0.0, f64::max),
        points: report_points,
        ambients,
        characterize_seconds,
    };
    Ok((report, rebuilt))
}

/// Scores `rebuilt` against the campaign `points` it was fitted to.
fn score(
    reference: &CameraModel,
    rebuilt: &CameraModel,
    points: &[OperatingPoint],
    spec: &CampaignSpec,
) -> Result<(Vec<PointReport>, Vec<AmbientReport>)> {
    let dim = rebuilt.dim();
    let (lo, hi) = rebuilt.temp_bounds;
    let scene = roundtrip_scene(dim, lo, hi)?;
    let per_ambient = spec
        .t_amb
        .par_iter()
        .map(|&t_amb| -> Result<(Vec<PointReport>, AmbientReport)> {
            let coeffs = pixelwise_at(rebuilt, t_amb)?;
            let series: Vec<&OperatingPoint> = points.iter().filter(|p| p.t_amb == t_amb).collect();
            let n = series.len() as f64;
            let mut mean = Array2::<f64>::zeros(dim);
            for p in &series {
                mean += p.mean_frame.values();
            }
            mean /= n;
            let mut ss_res = Array2::<f64>::zeros(dim);
            let mut ss_tot = Array2::<f64>::zeros(dim);
            let mut reports = Vec::with_capacity(series.len());
            for p in &series {
                let pred = apply_pixelwise(&coeffs, &Array2::from_elem(dim, p.t_obj));
                let y = p.mean_frame.values();
                let mut max_rel = 0.0f64;
                Zip::from(&mut ss_res)
                    .and(&mut ss_tot)
                    .and(&pred)
                    .and(y)
                    .and(&mean)
                    .for_each(|res, tot, &f, &y, &m| {
                        *res += (y - f) * (y - f);
                        *tot += (y - m) * (y - m);
                        max_rel = max_rel.max((f - y).abs() / y.abs());
                    });
                reports.push(PointReport {
                    t_amb,
                    t_obj: p.t_obj,
                    max_rel_err: max_rel,
                });
            }
            let r2 = Zip::from(&ss_res).and(&ss_tot).map_collect(|&res, &tot| {
                if tot > 0.0 {
                    1.0 - res / tot
                } else if res == 0.0 {
                    1.0
                } else {
                    f64::NEG_INFINITY
                }
            });
            let truth_gl = apply_pixelwise(&pixelwise_at(reference, t_amb)?, scene.values());
            let est = invert_polynomial(rebuilt, &GrayFrame::new(truth_gl)?, t_amb)
                .map_err(|e| e.in_stage(format!("round trip at t_amb={t_amb}")))?;
            let roundtrip_mae = mae(est.map.values(), scene.values(), None)?;
            let ambient = AmbientReport {
                t_amb,
                min_pixel_r2: r2.iter().copied().fold(f64::INFINITY, f64::min),
                mean_pixel_r2: r2.mean().unwrap_or(f64::NAN),
                roundtrip_mae,
            };
            Ok((reports, ambient))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut point_reports = Vec::new();
    let mut ambients = Vec::new();
    for (p, a) in per_ambient {
        point_reports.extend(p);
        ambients.push(a);
    }
    Ok((point_reports, ambients))
}
