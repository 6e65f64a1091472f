//! Synthesize a full chamber campaign from a known model, characterize it
//! and compare the rebuilt model with the reference.
//!
//! cargo run --release --example selfcal -- [height width noise_var frames]

use thermonu::selfcal::{reference_model, selfcal_check, CampaignSpec};
use thermonu::FitConfig;

fn main() -> thermonu::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let (h, w) = (arg(0, 256.0) as usize, arg(1, 336.0) as usize);
    let spec = CampaignSpec {
        noise_var: arg(2, 0.0),
        n_frames: arg(3, 1.0) as usize,
        seed: 5,
        ..CampaignSpec::default()
    };

    let reference = reference_model(h, w)?;
    let (report, rebuilt) = selfcal_check(&reference, &spec, &FitConfig::default())?;
    println!("{h}x{w}, {} points, characterized in {:.2} s", report.points.len(), report.characterize_seconds);
    println!("t_amb  min pixel R²  round-trip MAE (°C)");
    for a in &report.ambients {
        println!("{:>5.1}  {:.6}      {:.4}", a.t_amb, a.min_pixel_r2, a.roundtrip_mae);
    }
    println!("min R² {:.6}, max relative error {:.3e}", report.min_r2, report.max_rel_err);
    println!("rebuilt model degrees: {:?}", rebuilt.degrees);
    Ok(())
}
