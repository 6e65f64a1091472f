//! Turn a temperature map into a raw frame: noiseless response, then
//! column fixed-pattern noise and Gaussian noise, then 14-bit quantization.
//!
//! cargo run --release --example simulate

use ndarray::Array2;

use thermonu::dataset::{denormalize_gl, normalize_gl, NormBounds};
use thermonu::selfcal::reference_model;
use thermonu::{degrade, quantize, simulate_frame, NoiseSpec, TemperatureMap};

fn main() -> thermonu::Result<()> {
    let (h, w) = (120, 160);
    let model = reference_model(h, w)?;
    // warm disc on a cool background
    let scene = TemperatureMap::new(Array2::from_shape_fn((h, w), |(i, j)| {
        let r2 = (i as f64 - 60.0).powi(2) + (j as f64 - 80.0).powi(2);
        if r2 < 900.0 { 48.0 } else { 22.0 }
    }))?;

    for t_amb in [27.0, 39.0, 51.0] {
        let clean = simulate_frame(&model, &scene, t_amb)?;
        let b = NormBounds::from_model(&model)?;
        let noisy = degrade(&normalize_gl(&clean, &b)?, &NoiseSpec::default().with_seed(7), b.gl_span())?;
        let (raw, clamped) = quantize(&denormalize_gl(&noisy, &b)?);
        let v = raw.values();
        println!(
            "t_amb {t_amb:>4.1} °C: background {:.0} GL, disc {:.0} GL, corner {:.0} GL, {clamped} clamped",
            v[[60, 5]],
            v[[60, 80]],
            v[[0, 0]]
        );
    }
    Ok(())
}
