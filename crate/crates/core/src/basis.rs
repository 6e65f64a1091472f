//! Normalized coordinate grids.
//!
//! `W` ramps from −0.5 to 0.5 along each row, `H` ramps from −0.5 to 0.5
//! down each column, and `P = sqrt(H² + W²)` is the distance from the frame
//! center in those normalized units.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// `n` uniformly spaced points from −0.5 to 0.5.
///
/// Each point is computed as `(2j − (n−1)) / (2(n−1))` so the ramp is exactly
/// antisymmetric (`x[n−1−j] == −x[j]`) and hits both endpoints exactly.
pub fn centered_ramp(n: usize) -> Array1<f64> {
    let denom = 2.0 * (n as f64 - 1.0);
    Array1::from_iter((0..n).map(|j| (2.0 * j as f64 - (n as f64 - 1.0)) / denom))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisGrids {
    /// Row coordinate of each pixel.
    pub h: Array2<f64>,
    /// Column coordinate of each pixel.
    pub w: Array2<f64>,
    /// Radial distance from the frame center.
    pub p: Array2<f64>,
}

impl BasisGrids {
    pub fn dim(&self) -> (usize, usize) {
        self.p.dim()
    }

    /// The 1-D ramp underlying `H` (length `height`).
    pub fn row_ramp(&self) -> Array1<f64> {
        self.h.column(0).to_owned()
    }

    /// The 1-D ramp underlying `W` (length `width`).
    pub fn col_ramp(&self) -> Array1<f64> {
        self.w.row(0).to_owned()
    }
}

pub(crate) fn check_geometry(height: usize, width: usize) -> Result<()> {
    if height < 2 || width < 2 {
        return Err(Error::InvalidGeometry {
            height,
            width,
            reason: "both dimensions must be at least 2",
        });
    }
    Ok(())
}

pub fn make_basis_grids(height: usize, width: usize) -> Result<BasisGrids> {
    check_geometry(height, width)?;
    let rows = centered_ramp(height);
    let cols = centered_ramp(width);
    let h = Array2::from_shape_fn((height, width), |(i, _)| rows[i]);
    let w = Array2::from_shape_fn((height, width), |(_, j)| cols[j]);
    let p = Array2::from_shape_fn((height, width), |(i, j)| {
        (rows[i] * rows[i] + cols[j] * cols[j]).sqrt()
    });
    Ok(BasisGrids { h, w, p })
}
