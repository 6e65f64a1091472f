//! Forward synthesis of nonuniform gray-level frames and the noise / FPN
//! degradation applied to them.
//!
//! Randomness comes from ChaCha20 streams: every frame gets its own seed, and
//! within a frame the FPN and the Gaussian field draw from separate streams
//! so either can be regenerated alone.

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::make_basis_grids;
use crate::characterize::eval_radial;
use crate::error::{Error, Result};
use crate::frame::{GrayFrame, TemperatureMap, GL_MAX_14BIT};
use crate::lstsq::horner;
use crate::model::{CameraModel, PixelwiseCoeffs, RadialCoeffs};

const FPN_STREAM: u64 = 0;
const GAUSSIAN_STREAM: u64 = 1;
const READ_NOISE_STREAM: u64 = 2;

/// ChaCha20 generator for stream `stream` of key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `index`-th frame produced under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).random()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Additive-equivalent variance in GL².
    pub gaussian_var: f64,
    pub fpn_vmin: f64,
    pub fpn_vmax: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gaussian_var: 5.0,
            fpn_vmin: 0.9,
            fpn_vmax: 1.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// No noise and a unit FPN map.
    pub fn clean() -> Self {
        Self {
            gaussian_var: 0.0,
            fpn_vmin: 1.0,
            fpn_vmax: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_var >= 0.0) || !self.gaussian_var.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gaussian variance must be finite and >= 0, got {}",
                self.gaussian_var
            )));
        }
        if !(self.fpn_vmin > 0.0 && self.fpn_vmin <= self.fpn_vmax) || !self.fpn_vmax.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "FPN bounds must satisfy 0 < vmin <= vmax, got [{}, {}]",
                self.fpn_vmin, self.fpn_vmax
            )));
        }
        Ok(())
    }

    pub fn is_stochastic(&self) -> bool {
        self.gaussian_var > 0.0 || self.fpn_vmin < self.fpn_vmax
    }
}

fn check_order(model: &CameraModel, m: usize) -> Result<()> {
    if m > model.degrees.m_gl {
        return Err(Error::InvalidConfig(format!(
            "gray-level order {m} exceeds model degree {}",
            model.degrees.m_gl
        )));
    }
    Ok(())
}

/// Radial coefficients of order `m` at ambient temperature `t_amb`:
/// `Σ_k Γ[m][k, r] · t_amb^k`.
///
/// Outside the characterized ambient range this extrapolates with a warning.
pub fn radial_at(model: &CameraModel, m: usize, t_amb: f64) -> Result<RadialCoeffs> {
    check_order(model, m)?;
    let (lo, hi) = model.t_amb_range;
    if t_amb < lo || t_amb > hi {
        log::warn!("t_amb={t_amb} outside characterized range [{lo}, {hi}]; extrapolating");
    }
    let gamma = &model.gamma[m];
    let coeffs = gamma
        .columns()
        .into_iter()
        .map(|col| horner(&col.to_vec(), t_amb))
        .collect();
    Ok(RadialCoeffs { coeffs })
}

/// Pixel-wise coefficient maps at `t_amb`, one per gray-level order.
pub fn pixelwise_at(model: &CameraModel, t_amb: f64) -> Result<PixelwiseCoeffs> {
    let grids = make_basis_grids(model.height, model.width)?;
    let maps = (0..=model.degrees.m_gl)
        .map(|m| radial_at(model, m, t_amb).map(|r| eval_radial(&r.coeffs, &grids.p)))
        .collect::<Result<_>>()?;
    Ok(PixelwiseCoeffs { maps })
}

/// Evaluates the per-pixel response polynomial on a temperature map.
pub fn apply_pixelwise(coeffs: &PixelwiseCoeffs, t_obj: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(t_obj.dim());
    for map in coeffs.maps.iter().rev() {
        Zip::from(&mut out)
            .and(map)
            .and(t_obj)
            .for_each(|acc, &c, &t| *acc = *acc * t + c);
    }
    out
}

/// Noiseless real-valued camera response to `t_obj` at ambient `t_amb`.
pub fn simulate_frame(model: &CameraModel, t_obj: &TemperatureMap, t_amb: f64) -> Result<GrayFrame> {
    if t_obj.dim() != model.dim() {
        return Err(Error::GeometryMismatch {
            expected: model.dim(),
            found: t_obj.dim(),
        });
    }
    t_obj.check_range(model.temp_bounds.0, model.temp_bounds.1)?;
    let coeffs = pixelwise_at(model, t_amb)?;
    GrayFrame::new(apply_pixelwise(&coeffs, t_obj.values()))
}

/// Column fixed-pattern map: one `U[vmin, vmax]` draw per column, repeated
/// down every row.
pub fn gen_fpn(height: usize, width: usize, spec: &NoiseSpec) -> Array2<f64> {
    let columns: Vec<f64> = if spec.fpn_vmin == spec.fpn_vmax {
        vec![spec.fpn_vmin; width]
    } else {
        let mut rng = stream_rng(spec.seed, FPN_STREAM);
        (0..width)
            .map(|_| rng.random_range(spec.fpn_vmin..=spec.fpn_vmax))
            .collect()
    };
    Array2::from_shape_fn((height, width), |(_, j)| columns[j])
}

/// Multiplicative Gaussian field with mean 1 and variance `σ² / gl_span²`.
pub fn gen_gaussian_field(height: usize, width: usize, spec: &NoiseSpec, gl_span: f64) -> Array2<f64> {
    if spec.gaussian_var == 0.0 {
        return Array2::ones((height, width));
    }
    let std = spec.gaussian_var.sqrt() / gl_span;
    let normal = Normal::new(1.0, std).expect("finite std");
    let mut rng = stream_rng(spec.seed, GAUSSIAN_STREAM);
    Array2::from_shape_simple_fn((height, width), || normal.sample(&mut rng))
}

/// Applies `N(1, σ²/span²) ⊗ FPN ⊗ frame` to a normalized frame.
///
/// `gl_span` is `I_max − I_min` of the normalization; at a normalized level
/// of 1 the additive-equivalent variance is exactly `σ²` GL².
pub fn degrade(frame_norm: &GrayFrame, spec: &NoiseSpec, gl_span: f64) -> Result<GrayFrame> {
    spec.validate()?;
    if !(gl_span > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "gray-level span must be positive, got {gl_span}"
        )));
    }
    let (h, w) = frame_norm.dim();
    let field = gen_gaussian_field(h, w, spec, gl_span);
    let fpn = gen_fpn(h, w, spec);
    GrayFrame::new(field * fpn * frame_norm.values())
}

/// Additive `N(0, σ²)` read noise in gray levels.
pub fn add_read_noise(frame: &GrayFrame, variance: f64, seed: u64) -> Result<GrayFrame> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be finite and >= 0, got {variance}"
        )));
    }
    if variance == 0.0 {
        return GrayFrame::new(frame.values().clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite std");
    let mut rng = stream_rng(seed, READ_NOISE_STREAM);
    GrayFrame::new(frame.values().mapv(|v| v + normal.sample(&mut rng)))
}

/// Round half to even and clamp into the 14-bit range. Returns the
/// quantized frame and the number of clamped pixels.
pub fn quantize(frame: &GrayFrame) -> (GrayFrame, usize) {
    let mut clamped = 0usize;
    let values = frame.values().mapv(|v| {
        let r = v.round_ties_even();
        if r < 0.0 {
            clamped += 1;
            0.0
        } else if r > GL_MAX_14BIT {
            clamped += 1;
            GL_MAX_14BIT
        } else {
            r
        }
    });
    let frame = GrayFrame::quantized(values).expect("values rounded and clamped");
    (frame, clamped)
}
