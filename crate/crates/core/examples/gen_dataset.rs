//! Build a small supervised dataset of (raw input, temperature target)
//! pairs from a few temperature maps, in train and validation mode.
//!
//! cargo run --release --example gen_dataset

use ndarray::Array2;

use thermonu::frameio::{Split, MANIFEST_FILE};
use thermonu::selfcal::reference_model;
use thermonu::{generate_dataset, AugmentSpec, DatasetConfig, NoiseSpec, TemperatureMap};

fn main() -> thermonu::Result<()> {
    let model = reference_model(256, 336)?;
    let maps: Vec<(String, TemperatureMap)> = (0..3)
        .map(|k| {
            let map = Array2::from_shape_fn((300, 400), |(i, j)| {
                20.0 + 10.0 * k as f64 + 0.02 * i as f64 + 5.0 * (j as f64 / 40.0).sin()
            });
            (format!("scene{k}"), TemperatureMap::new(map).unwrap())
        })
        .collect();

    let dir = tempfile::tempdir().expect("temp dir");
    for (name, augment, count) in [("train", AugmentSpec::train(), 6), ("val", AugmentSpec::val(), 3)] {
        let cfg = DatasetConfig {
            count,
            seed: 42,
            augment,
            noise: NoiseSpec::default(),
            norm: None,
        };
        let out = dir.path().join(name);
        let records = generate_dataset(&model, &maps, &cfg, &out)?;
        println!("{name}: {} samples, manifest at {}", records.len(), out.join(MANIFEST_FILE).display());
        for r in &records {
            let kind = if r.split == Split::Train { "random" } else { "center" };
            println!(
                "  {} <- {} t_amb {:.2} crop {:?} ({kind}) flips {:?} rot90 {}",
                r.input, r.source, r.t_amb, r.crop, r.flips, r.rot90
            );
        }
    }
    Ok(())
}
