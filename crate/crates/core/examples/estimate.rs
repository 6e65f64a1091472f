//! Recover temperature from a noisy raw frame, by exact inversion of the
//! polynomial model and by a per-pixel linear gain/offset calibration fitted
//! to the chamber operating points.
//!
//! cargo run --release --example estimate

use ndarray::Array2;

use thermonu::metrics::mae;
use thermonu::selfcal::{reference_model, synthesize_campaign, CampaignSpec};
use thermonu::simulate::add_read_noise;
use thermonu::{estimate_linear, fit_linear_gd, invert_polynomial, simulate_frame, TemperatureMap};

fn main() -> thermonu::Result<()> {
    let (h, w) = (128, 160);
    let model = reference_model(h, w)?;
    let truth = TemperatureMap::new(Array2::from_shape_fn((h, w), |(i, j)| 25.0 + 0.15 * i as f64 + 0.05 * j as f64))?;
    let linear = fit_linear_gd(&synthesize_campaign(&model, &CampaignSpec::default())?, 2)?;

    for t_amb in [30.0, 45.0] {
        let raw = add_read_noise(&simulate_frame(&model, &truth, t_amb)?, 5.0, 3)?;
        let inv = invert_polynomial(&model, &raw, t_amb)?;
        let lin = estimate_linear(&linear, &raw, t_amb)?;
        println!(
            "t_amb {t_amb} °C: inversion MAE {:.4} °C ({} valid), linear MAE {:.3} °C ({} valid)",
            mae(inv.map.values(), truth.values(), Some(&inv.mask))?,
            inv.valid_count(),
            mae(lin.map.values(), truth.values(), Some(&lin.mask))?,
            lin.valid_count()
        );
    }
    Ok(())
}
