//! Frame-shaped domain values: temperature maps, gray-level frames and
//! averaged blackbody operating points.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Largest value representable by the camera's 14-bit readout.
pub const GL_MAX_14BIT: f64 = 16383.0;

/// Default global temperature range in °C.
pub const DEFAULT_TEMP_RANGE: (f64, f64) = (0.0, 100.0);

fn check_finite(values: &Array2<f64>, field: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            field: field.to_string(),
            index,
        }),
        None => Ok(()),
    }
}

/// Scene temperatures in °C, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureMap {
    values: Array2<f64>,
}

impl TemperatureMap {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite(&values, "temperature map")?;
        Ok(Self { values })
    }

    pub fn constant(height: usize, width: usize, t: f64) -> Result<Self> {
        Self::new(Array2::from_elem((height, width), t))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// (height, width)
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Fails on the first pixel outside `[lo, hi]`.
    pub fn check_range(&self, lo: f64, hi: f64) -> Result<()> {
        for (index, &value) in self.values.iter().enumerate() {
            if !(lo..=hi).contains(&value) {
                return Err(Error::OutOfRange {
                    what: "temperature",
                    value,
                    index,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Camera gray levels. When `quantized` every value is an integer in
/// `[0, 16383]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    values: Array2<f64>,
    quantized: bool,
}

impl GrayFrame {
    /// Real-valued (pre-quantization) frame.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite(&values, "gray-level frame")?;
        Ok(Self {
            values,
            quantized: false,
        })
    }

    pub fn quantized(values: Array2<f64>) -> Result<Self> {
        check_finite(&values, "gray-level frame")?;
        for (index, &value) in values.iter().enumerate() {
            if value.fract() != 0.0 || !(0.0..=GL_MAX_14BIT).contains(&value) {
                return Err(Error::OutOfRange {
                    what: "14-bit gray level",
                    value,
                    index,
                    lo: 0.0,
                    hi: GL_MAX_14BIT,
                });
            }
        }
        Ok(Self {
            values,
            quantized: true,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn is_quantized(&self) -> bool {
        self.quantized
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// One averaged blackbody measurement at a fixed `(t_amb, t_obj)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub t_amb: f64,
    pub t_obj: f64,
    pub mean_frame: GrayFrame,
    /// Per-pixel variance over the averaged frames, in GL².
    pub var_frame: Array2<f64>,
    pub n_frames: usize,
}

impl OperatingPoint {
    pub fn new(
        t_amb: f64,
        t_obj: f64,
        mean_frame: GrayFrame,
        var_frame: Array2<f64>,
        n_frames: usize,
    ) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::Empty("operating point with zero frames"));
        }
        if !t_amb.is_finite() || !t_obj.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "operating point temperatures must be finite (t_amb={t_amb}, t_obj={t_obj})"
            )));
        }
        if var_frame.dim() != mean_frame.dim() {
            return Err(Error::GeometryMismatch {
                expected: mean_frame.dim(),
                found: var_frame.dim(),
            });
        }
        check_finite(&var_frame, "variance frame")?;
        if let Some(index) = var_frame.iter().position(|&v| v < 0.0) {
            return Err(Error::OutOfRange {
                what: "variance",
                value: var_frame.iter().nth(index).copied().unwrap_or(f64::NAN),
                index,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self {
            t_amb,
            t_obj,
            mean_frame,
            var_frame,
            n_frames,
        })
    }

    /// Noiseless operating point (zero variance, one frame).
    pub fn noiseless(t_amb: f64, t_obj: f64, mean_frame: GrayFrame) -> Self {
        let var_frame = Array2::zeros(mean_frame.dim());
        Self {
            t_amb,
            t_obj,
            mean_frame,
            var_frame,
            n_frames: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_nan_temperature() {
        let err = TemperatureMap::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }

    #[test]
    fn quantized_accepts_14bit_max_only() {
        assert!(GrayFrame::quantized(array![[0.0, 16383.0]]).is_ok());
        assert!(GrayFrame::quantized(array![[16384.0]]).is_err());
        assert!(GrayFrame::quantized(array![[1.5]]).is_err());
    }

    #[test]
    fn range_check_reports_index() {
        let map = TemperatureMap::new(array![[20.0, 120.0]]).unwrap();
        let err = map.check_range(0.0, 100.0).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { index: 1, .. }));
    }

    #[test]
    fn operating_point_rejects_negative_variance() {
        let frame = GrayFrame::new(array![[1.0, 2.0]]).unwrap();
        assert!(OperatingPoint::new(30.0, 40.0, frame.clone(), array![[0.0, -1.0]], 2).is_err());
        assert!(OperatingPoint::new(30.0, 40.0, frame, array![[0.0, 1.0]], 0).is_err());
    }
}
