mod common;

use std::fs;

use ndarray::Array2;

use common::TestRng;
use thermonu::dataset::{denormalize_temp, normalize_gl, AugmentSpec, DatasetConfig, NormBounds};
use thermonu::frameio::{read_gray, read_manifest, read_temperature, Split, MANIFEST_FILE};
use thermonu::selfcal::reference_model;
use thermonu::simulate::{degrade, simulate_frame, NoiseSpec};
use thermonu::{generate_dataset, TemperatureMap};

fn maps(n: usize, seed: u64) -> Vec<(String, TemperatureMap)> {
    let mut rng = TestRng::new(seed);
    (0..n)
        .map(|k| {
            let map = Array2::from_shape_simple_fn((40, 48), || rng.uniform(15.0, 55.0));
            (format!("scene{k}"), TemperatureMap::new(map).unwrap())
        })
        .collect()
}

fn train_config(seed: u64) -> DatasetConfig {
    DatasetConfig {
        count: 7,
        seed,
        augment: AugmentSpec::train().with_crop(Some((32, 32))),
        noise: NoiseSpec::default(),
        norm: None,
    }
}

#[test]
fn train_runs_are_reproducible_and_seed_dependent() {
    let model = reference_model(40, 48).unwrap();
    let maps = maps(3, 1);
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = generate_dataset(&model, &maps, &train_config(4), a.path()).unwrap();
    let rb = generate_dataset(&model, &maps, &train_config(4), b.path()).unwrap();
    let rc = generate_dataset(&model, &maps, &train_config(5), c.path()).unwrap();
    assert_eq!(ra, rb);
    for r in &ra {
        assert_eq!(fs::read(a.path().join(&r.input)).unwrap(), fs::read(b.path().join(&r.input)).unwrap());
    }
    assert_ne!(
        fs::read(a.path().join(&ra[0].input)).unwrap(),
        fs::read(c.path().join(&rc[0].input)).unwrap()
    );
}

#[test]
fn manifest_lists_every_sample() {
    let model = reference_model(40, 48).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let records = generate_dataset(&model, &maps(3, 2), &train_config(9), dir.path()).unwrap();
    let manifest = read_manifest(dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest, records);
    assert_eq!(manifest.len(), 7);
    let (lo, hi) = model.t_amb_range;
    for (i, r) in manifest.iter().enumerate() {
        assert_eq!(r.index, i);
        assert_eq!(r.split, Split::Train);
        assert_eq!(r.source, format!("scene{}", i % 3));
        assert!((lo..=hi).contains(&r.t_amb));
        assert!(r.crop[0] + 32 <= 40 && r.crop[1] + 32 <= 48);
        assert!(dir.path().join(&r.input).is_file() && dir.path().join(&r.target).is_file());
    }
}

#[test]
fn input_is_simulate_normalize_degrade_of_target() {
    let model = reference_model(40, 48).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        count: 4,
        seed: 21,
        augment: AugmentSpec::val().with_crop(Some((24, 32))),
        noise: NoiseSpec::default(),
        norm: Some(NormBounds::new(0.0, 16383.0, 0.0, 100.0).unwrap()),
    };
    let records = generate_dataset(&model, &maps(2, 3), &cfg, dir.path()).unwrap();
    for r in &records {
        let (_, target) = read_temperature(dir.path().join(&r.target)).unwrap();
        let (header, input) = read_gray(dir.path().join(&r.input)).unwrap();
        assert_eq!(header.seed, Some(r.seed));
        let map = denormalize_temp(&target, &r.norm).unwrap();
        let (h, w) = map.dim();
        let gl = simulate_frame(&model.with_geometry(h, w).unwrap(), &map, r.t_amb).unwrap();
        let expected = degrade(&normalize_gl(&gl, &r.norm).unwrap(), &cfg.noise.with_seed(r.seed), r.norm.gl_span()).unwrap();
        for (a, b) in input.values().iter().zip(expected.values()) {
            // f32 storage on both the target and the input
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn no_maps_means_no_samples() {
    let model = reference_model(40, 48).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(generate_dataset(&model, &[], &train_config(1), dir.path()).unwrap().is_empty());
}
