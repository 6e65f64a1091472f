//! Record a synthetic blackbody campaign to disk, ingest it and fit a
//! camera model, printing the residual of every fitting stage.
//!
//! cargo run --release --example characterize

use thermonu::selfcal::{reference_model, write_campaign, CampaignSpec};
use thermonu::{characterize_camera_with_residuals, ingest_campaign, save_model, FitConfig};

fn main() -> thermonu::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let reference = reference_model(64, 80)?;
    let spec = CampaignSpec {
        noise_var: 4.0,
        n_frames: 8,
        seed: 1,
        ..CampaignSpec::default()
    };
    let written = write_campaign(&reference, &spec, dir.path().join("campaign"))?;
    println!("wrote {written} quantized frames");

    let points = ingest_campaign(dir.path().join("campaign"))?;
    println!("{} operating points", points.len());

    let fit = characterize_camera_with_residuals(&points, &FitConfig::default())?;
    println!("order  t_amb  pixelwise  smoothing  quad     fine     radial   (RMS, GL)");
    for r in fit.residuals.iter().filter(|r| r.t_amb == points[0].t_amb || r.order == 0) {
        println!(
            "{:>5}  {:>5.1}  {:>9}  {:>9.3e}  {:.2e} {:.2e} {:.2e}",
            r.order,
            r.t_amb,
            if r.pixelwise_rms.is_nan() { "-".to_string() } else { format!("{:.3e}", r.pixelwise_rms) }, r.smoothing_rms, r.spatial_quad_rms, r.spatial_fine_rms, r.radial_rms
        );
    }

    let path = dir.path().join("camera.tcam.json");
    save_model(&fit.model, &path)?;
    println!("model: {:?}, saved to {}", fit.model.degrees, path.display());
    Ok(())
}
