//! Camera model container, coefficient types and the `.tcam.json` file.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::basis::check_geometry;
use crate::error::{Error, Result};

const MODEL_MAGIC: &str = "tcam1";

/// Pixel-wise polynomial coefficients; `maps[m]` multiplies `t_obj^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelwiseCoeffs {
    pub maps: Vec<Array2<f64>>,
}

impl PixelwiseCoeffs {
    pub fn order_count(&self) -> usize {
        self.maps.len()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.maps.first().map(|m| m.dim()).unwrap_or((0, 0))
    }
}

/// Tensor-product spatial polynomial; `coeffs[[q, z]]` multiplies `H^q · W^z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPolyCoeffs {
    pub coeffs: Array2<f64>,
}

impl SpatialPolyCoeffs {
    pub fn zeros(max_exp: usize) -> Self {
        Self {
            coeffs: Array2::zeros((max_exp + 1, max_exp + 1)),
        }
    }

    pub fn max_exp(&self) -> usize {
        self.coeffs.nrows() - 1
    }
}

/// Radial polynomial; `coeffs[r]` multiplies `P^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCoeffs {
    pub coeffs: Vec<f64>,
}

impl RadialCoeffs {
    pub fn max_exp(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Maximum exponents of every polynomial in the model. All sums run
/// inclusively from 0 to the stated exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degrees {
    pub m_gl: usize,
    pub m_spatial_fine: usize,
    pub m_radial: usize,
    pub m_ambient: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub m_gl: usize,
    pub m_spatial_quad: usize,
    pub m_spatial_fine: usize,
    pub m_radial: usize,
    pub m_ambient: usize,
    /// Standard deviation of the coefficient-map smoothing kernel, pixels.
    pub smoothing_sigma: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m_gl: 2,
            m_spatial_quad: 2,
            m_spatial_fine: 15,
            m_radial: 8,
            m_ambient: 3,
            smoothing_sigma: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_spatial_fine <= self.m_spatial_quad {
            return Err(Error::InvalidConfig(format!(
                "fine spatial degree {} must exceed quadratic degree {}",
                self.m_spatial_fine, self.m_spatial_quad
            )));
        }
        if !(self.smoothing_sigma > 0.0) || !self.smoothing_sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "smoothing sigma must be positive, got {}",
                self.smoothing_sigma
            )));
        }
        Ok(())
    }

    pub fn degrees(&self) -> Degrees {
        Degrees {
            m_gl: self.m_gl,
            m_spatial_fine: self.m_spatial_fine,
            m_radial: self.m_radial,
            m_ambient: self.m_ambient,
        }
    }
}

/// The complete characterization of one camera.
///
/// `gamma[m]` is the `(m_ambient+1) × (m_radial+1)` matrix for gray-level
/// order `m`; entry `[k, r]` multiplies `t_amb^k · P^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub height: usize,
    pub width: usize,
    pub degrees: Degrees,
    pub gamma: Vec<Array2<f64>>,
    pub gl_bounds: (f64, f64),
    pub temp_bounds: (f64, f64),
    pub t_amb_range: (f64, f64),
    pub noise_var_gl2: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        check_geometry(self.height, self.width)?;
        let d = self.degrees;
        if self.gamma.len() != d.m_gl + 1 {
            return Err(Error::InvalidConfig(format!(
                "gamma: expected {} matrices, found {}",
                d.m_gl + 1,
                self.gamma.len()
            )));
        }
        for (m, g) in self.gamma.iter().enumerate() {
            if g.dim() != (d.m_ambient + 1, d.m_radial + 1) {
                return Err(Error::InvalidConfig(format!(
                    "gamma[{m}]: expected {}x{}, found {:?}",
                    d.m_ambient + 1,
                    d.m_radial + 1,
                    g.dim()
                )));
            }
            if let Some(index) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: format!("gamma[{m}]"),
                    index,
                });
            }
        }
        for (name, (lo, hi)) in [
            ("gl_bounds", self.gl_bounds),
            ("temp_bounds", self.temp_bounds),
        ] {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite {
                    field: name.to_string(),
                    index: usize::from(lo.is_finite()),
                });
            }
            if lo >= hi {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly ordered, got [{lo}, {hi}]"
                )));
            }
        }
        let (a, b) = self.t_amb_range;
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(Error::InvalidConfig(format!(
                "t_amb_range must be finite and ordered, got [{a}, {b}]"
            )));
        }
        if !self.noise_var_gl2.is_finite() || self.noise_var_gl2 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_var_gl2 must be finite and non-negative, got {}",
                self.noise_var_gl2
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// The same characterization applied to a different frame size.
    ///
    /// Γ is expressed in normalized coordinates, so this only changes the
    /// grid the radial kernel is evaluated on.
    pub fn with_geometry(&self, height: usize, width: usize) -> Result<Self> {
        check_geometry(height, width)?;
        Ok(Self {
            height,
            width,
            ..self.clone()
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Bounds(f64, f64);

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    height: usize,
    width: usize,
    degrees: Degrees,
    gamma: Vec<Vec<Vec<f64>>>,
    gl_bounds: Bounds,
    temp_bounds: Bounds,
    t_amb_range: Bounds,
    noise_var_gl2: f64,
}

impl From<&CameraModel> for ModelFile {
    fn from(m: &CameraModel) -> Self {
        Self {
            magic: MODEL_MAGIC.to_string(),
            height: m.height,
            width: m.width,
            degrees: m.degrees,
            gamma: m
                .gamma
                .iter()
                .map(|g| g.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            gl_bounds: Bounds(m.gl_bounds.0, m.gl_bounds.1),
            temp_bounds: Bounds(m.temp_bounds.0, m.temp_bounds.1),
            t_amb_range: Bounds(m.t_amb_range.0, m.t_amb_range.1),
            noise_var_gl2: m.noise_var_gl2,
        }
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>, field: &str) -> std::result::Result<Array2<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{field}: ragged matrix rows"));
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| format!("{field}: {e}"))
}

pub fn model_to_json(model: &CameraModel) -> Result<String> {
    model.validate()?;
    serde_json::to_string_pretty(&ModelFile::from(model))
        .map_err(|e| Error::InvalidConfig(format!("model serialization: {e}")))
}

pub fn model_from_json(text: &str, path: &Path) -> Result<CameraModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::format(path, format!("model file: {e}")))?;
    if file.magic != MODEL_MAGIC {
        return Err(Error::format(
            path,
            format!("magic: expected {MODEL_MAGIC:?}, found {:?}", file.magic),
        ));
    }
    let gamma = file
        .gamma
        .into_iter()
        .enumerate()
        .map(|(m, rows)| matrix_from_rows(rows, &format!("gamma[{m}]")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e))?;
    let model = CameraModel {
        height: file.height,
        width: file.width,
        degrees: file.degrees,
        gamma,
        gl_bounds: (file.gl_bounds.0, file.gl_bounds.1),
        temp_bounds: (file.temp_bounds.0, file.temp_bounds.1),
        t_amb_range: (file.t_amb_range.0, file.t_amb_range.1),
        noise_var_gl2: file.noise_var_gl2,
    };
    model
        .validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(model)
}

/// Writes `model` as a `.tcam.json` document. Invalid models are rejected
/// before anything is written.
pub fn save_model(model: &CameraModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = model_to_json(model)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CameraModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}
