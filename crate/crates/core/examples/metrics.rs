//! Score temperature estimates with MAE, PSNR and SSIM and print the JSON
//! report.
//!
//! cargo run --release --example metrics

use ndarray::Array2;

use thermonu::metrics::{combined_loss, evaluate, EvalPair};
use thermonu::MetricsConfig;

fn main() -> thermonu::Result<()> {
    let truth = Array2::from_shape_fn((64, 64), |(i, j)| 20.0 + 0.3 * i as f64 + 10.0 * (j as f64 / 9.0).sin());
    let offset = truth.mapv(|v| v + 0.5);
    let blurred = Array2::from_shape_fn((64, 64), |(i, j)| {
        let (a, b) = (j.saturating_sub(1), (j + 1).min(63));
        (truth[[i, a]] + truth[[i, j]] + truth[[i, b]]) / 3.0
    });
    let mut mask = Array2::from_elem((64, 64), true);
    mask.row_mut(0).fill(false);

    let cfg = MetricsConfig::default();
    let pairs = [
        EvalPair { name: "identical".into(), estimate: &truth, truth: &truth, mask: None },
        EvalPair { name: "offset".into(), estimate: &offset, truth: &truth, mask: None },
        EvalPair { name: "blurred".into(), estimate: &blurred, truth: &truth, mask: Some(&mask) },
    ];
    let report = evaluate(&pairs, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    println!("training loss (blurred): {:.5}", combined_loss(&blurred, &truth, &MetricsConfig::e2e())?);
    Ok(())
}
