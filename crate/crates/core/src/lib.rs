//! Physics-based nonuniformity modelling for uncooled microbolometer cameras.
//!
//! A camera is characterized from blackbody recordings into a compact
//! [`CameraModel`]: per gray-level order, a small matrix of ambient × radial
//! polynomial coefficients. The model can then synthesize realistic raw
//! frames from temperature maps, feed supervised training datasets, and
//! invert raw frames back into temperature.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod characterize;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod filter;
pub mod frame;
pub mod frameio;
mod lstsq;
pub mod metrics;
pub mod model;
pub mod selfcal;
pub mod simulate;

pub use basis::{make_basis_grids, BasisGrids};
pub use characterize::{characterize_camera, characterize_camera_with_residuals, Characterization};
pub use error::{Error, Result};
pub use frame::{GrayFrame, OperatingPoint, TemperatureMap};
pub use model::{load_model, save_model, CameraModel, Degrees, FitConfig};
pub use simulate::{degrade, quantize, simulate_frame, NoiseSpec};
pub use dataset::{generate_dataset, AugmentSpec, DatasetConfig, NormBounds};
pub use estimate::{estimate_linear, fit_linear_gd, invert_polynomial, Estimate, LinearGD};
pub use frameio::{ingest_campaign, read_frame, write_frame, FrameHeader, Payload};
pub use metrics::MetricsConfig;
