//! Supervised training-pair generation: augmentation, normalization,
//! simulation and degradation of temperature-map corpora.

use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, TemperatureMap};
use crate::frameio::{
    write_gray, write_manifest, write_temperature, Dtype, FrameHeader, FrameKind, SampleRecord,
    Split, MANIFEST_FILE,
};
use crate::model::CameraModel;
use crate::simulate::{degrade, derive_seed, simulate_frame, stream_rng, NoiseSpec};

const AUGMENT_STREAM: u64 = 3;
const AMBIENT_STREAM: u64 = 4;

/// Gray-level and temperature ranges mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub i_min: f64,
    pub i_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl NormBounds {
    pub fn new(i_min: f64, i_max: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let b = Self {
            i_min,
            i_max,
            t_min,
            t_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// The model's gray-level and temperature bounds.
    pub fn from_model(model: &CameraModel) -> Result<Self> {
        Self::new(
            model.gl_bounds.0,
            model.gl_bounds.1,
            model.temp_bounds.0,
            model.temp_bounds.1,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ordered(self.i_min, self.i_max) || !ordered(self.t_min, self.t_max) {
            return Err(Error::InvalidConfig(format!(
                "normalization bounds must be finite and ordered, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn gl_span(&self) -> f64 {
        self.i_max - self.i_min
    }
}

pub fn normalize_gl(frame: &GrayFrame, b: &NormBounds) -> Result<GrayFrame> {
    let span = b.gl_span();
    GrayFrame::new(frame.values().mapv(|x| (x - b.i_min) / span))
}

pub fn denormalize_gl(frame: &GrayFrame, b: &NormBounds) -> Result<GrayFrame> {
    let span = b.gl_span();
    GrayFrame::new(frame.values().mapv(|x| x * span + b.i_min))
}

pub fn normalize_temp(map: &TemperatureMap, b: &NormBounds) -> Result<TemperatureMap> {
    let span = b.t_max - b.t_min;
    TemperatureMap::new(map.values().mapv(|x| (x - b.t_min) / span))
}

pub fn denormalize_temp(map: &TemperatureMap, b: &NormBounds) -> Result<TemperatureMap> {
    let span = b.t_max - b.t_min;
    TemperatureMap::new(map.values().mapv(|x| x * span + b.t_min))
}

/// Fixed or random choice of a boolean augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Toggle {
    #[default]
    Off,
    On,
    Random,
}

impl Toggle {
    fn resolve(self, rng: &mut impl Rng) -> bool {
        match self {
            Toggle::Off => false,
            Toggle::On => true,
            Toggle::Random => rng.random(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// `(height, width)` of the crop; `None` keeps the full frame.
    pub crop: Option<(usize, usize)>,
    pub flip_h: Toggle,
    pub flip_v: Toggle,
    /// Random multiple of 90° (train mode only).
    pub rotate: bool,
    pub mode: Split,
}

impl AugmentSpec {
    /// No crop, flip or rotation.
    pub fn identity() -> Self {
        Self {
            crop: None,
            flip_h: Toggle::Off,
            flip_v: Toggle::Off,
            rotate: false,
            mode: Split::Train,
        }
    }

    /// Random 256×256 crop, random flips and quarter turns.
    pub fn train() -> Self {
        Self {
            crop: Some((256, 256)),
            flip_h: Toggle::Random,
            flip_v: Toggle::Random,
            rotate: true,
            mode: Split::Train,
        }
    }

    /// Centered 256×256 crop, nothing else.
    pub fn val() -> Self {
        Self {
            crop: Some((256, 256)),
            ..Self::identity()
        }
        .with_mode(Split::Val)
    }

    pub fn with_mode(self, mode: Split) -> Self {
        Self { mode, ..self }
    }

    pub fn with_crop(self, crop: Option<(usize, usize)>) -> Self {
        Self { crop, ..self }
    }
}

/// What [`augment`] did to a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentRecord {
    pub crop: [usize; 2],
    pub flips: [bool; 2],
    pub rot90: u8,
}

fn rot90_ccw(a: &Array2<f64>) -> Array2<f64> {
    a.t().slice(s![..;-1, ..]).to_owned()
}

/// Crops, flips and rotates `map`. Train mode draws every random choice
/// from `seed`; val mode takes the exact center crop and nothing else.
pub fn augment(
    map: &TemperatureMap,
    spec: &AugmentSpec,
    seed: u64,
) -> Result<(TemperatureMap, AugmentRecord)> {
    let (h, w) = map.dim();
    let (ch, cw) = spec.crop.unwrap_or((h, w));
    if ch > h || cw > w {
        return Err(Error::InvalidConfig(format!(
            "crop {ch}x{cw} larger than frame {h}x{w}"
        )));
    }
    if ch < 2 || cw < 2 {
        return Err(Error::InvalidGeometry {
            height: ch,
            width: cw,
            reason: "crop must be at least 2x2",
        });
    }
    let mut rng = stream_rng(seed, AUGMENT_STREAM);
    let (record, values) = match spec.mode {
        Split::Val => {
            let (r0, c0) = ((h - ch) / 2, (w - cw) / 2);
            let values = map.values().slice(s![r0..r0 + ch, c0..c0 + cw]).to_owned();
            let record = AugmentRecord {
                crop: [r0, c0],
                flips: [false, false],
                rot90: 0,
            };
            (record, values)
        }
        Split::Train => {
            let r0 = rng.random_range(0..=h - ch);
            let c0 = rng.random_range(0..=w - cw);
            let flip_h = spec.flip_h.resolve(&mut rng);
            let flip_v = spec.flip_v.resolve(&mut rng);
            let rot90 = if spec.rotate { rng.random_range(0..4u8) } else { 0 };
            let crop = map.values().slice(s![r0..r0 + ch, c0..c0 + cw]);
            let mut values = match (flip_h, flip_v) {
                (false, false) => crop.to_owned(),
                (true, false) => crop.slice(s![.., ..;-1]).to_owned(),
                (false, true) => crop.slice(s![..;-1, ..]).to_owned(),
                (true, true) => crop.slice(s![..;-1, ..;-1]).to_owned(),
            };
            for _ in 0..rot90 {
                values = rot90_ccw(&values);
            }
            let record = AugmentRecord {
                crop: [r0, c0],
                flips: [flip_h, flip_v],
                rot90,
            };
            (record, values)
        }
    };
    Ok((TemperatureMap::new(values)?, record))
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    /// Number of samples; sources are cycled in order.
    pub count: usize,
    pub seed: u64,
    pub augment: AugmentSpec,
    /// Noise and FPN; the seed field is replaced per sample.
    pub noise: NoiseSpec,
    /// Defaults to the model's bounds.
    pub norm: Option<NormBounds>,
}

/// Per-sample seed. Val samples key on the source map so that its noise and
/// FPN realization is the same wherever the map is reused.
fn sample_seed(cfg: &DatasetConfig, index: usize, source: usize) -> u64 {
    match cfg.augment.mode {
        Split::Train => derive_seed(cfg.seed, index as u64),
        Split::Val => derive_seed(cfg.seed, source as u64),
    }
}

/// Generates `cfg.count` (input, target) pairs under `out_dir` and writes
/// the manifest. Records come back in sample-index order.
pub fn generate_dataset(
    model: &CameraModel,
    maps: &[(String, TemperatureMap)],
    cfg: &DatasetConfig,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<SampleRecord>> {
    let out_dir = out_dir.as_ref();
    cfg.noise.validate()?;
    let norm = match cfg.norm {
        Some(b) => {
            b.validate()?;
            b
        }
        None => NormBounds::from_model(model)?,
    };
    let count = if maps.is_empty() { 0 } else { cfg.count };
    for sub in ["inputs", "targets"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let records = (0..count)
        .into_par_iter()
        .map(|index| {
            let source = index % maps.len();
            let (name, map) = &maps[source];
            let seed = sample_seed(cfg, index, source);
            generate_sample(model, map, cfg, &norm, index, seed, out_dir)
                .map(|(rec, t_amb)| SampleRecord {
                    index,
                    input: format!("inputs/{index:06}.tframe"),
                    target: format!("targets/{index:06}.tframe"),
                    source: name.clone(),
                    t_amb,
                    seed,
                    split: cfg.augment.mode,
                    crop: rec.crop,
                    flips: rec.flips,
                    rot90: rec.rot90,
                    norm,
                })
                .map_err(|e| e.in_stage(format!("sample {index} ({name})")))
        })
        .collect::<Result<Vec<_>>>()?;

    write_manifest(&records, out_dir.join(MANIFEST_FILE))?;
    Ok(records)
}

fn generate_sample(
    model: &CameraModel,
    map: &TemperatureMap,
    cfg: &DatasetConfig,
    norm: &NormBounds,
    index: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(AugmentRecord, f64)> {
    let (map, rec) = augment(map, &cfg.augment, seed)?;
    let (lo, hi) = model.t_amb_range;
    let t_amb = if lo < hi {
        stream_rng(seed, AMBIENT_STREAM).random_range(lo..=hi)
    } else {
        lo
    };
    let (h, w) = map.dim();
    let local = model.with_geometry(h, w)?;
    let gl = simulate_frame(&local, &map, t_amb)?;
    let input = degrade(&normalize_gl(&gl, norm)?, &cfg.noise.with_seed(seed), norm.gl_span())?;
    let target = normalize_temp(&map, norm)?;

    let header = FrameHeader::new(FrameKind::Graylevel, Dtype::F32, (h, w))
        .with_temps(Some(t_amb), None)
        .with_seed(seed);
    write_gray(&input, header.clone(), out_dir.join(format!("inputs/{index:06}.tframe")))?;
    write_temperature(
        &target,
        FrameHeader { kind: FrameKind::Temperature, ..header },
        out_dir.join(format!("targets/{index:06}.tframe")),
    )?;
    Ok((rec, t_amb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn bounds() -> NormBounds {
        NormBounds::new(0.0, 16383.0, 0.0, 100.0).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let f = GrayFrame::new(array![[8191.5, 0.0, 16383.0, 20000.0]]).unwrap();
        let n = normalize_gl(&f, &bounds()).unwrap();
        assert_eq!(n.values().row(0).to_vec()[..3], [0.5, 0.0, 1.0]);
        assert!(n.values()[[0, 3]] > 1.0);
        let t = TemperatureMap::new(array![[50.0, 0.0, 100.0]]).unwrap();
        assert_eq!(normalize_temp(&t, &bounds()).unwrap().values().row(0).to_vec(), [0.5, 0.0, 1.0]);
        assert!(NormBounds::new(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn val_center_crop_offset() {
        let map = TemperatureMap::new(Array2::from_shape_fn((480, 640), |(i, j)| (i + j) as f64)).unwrap();
        let (out, rec) = augment(&map, &AugmentSpec::val(), 9).unwrap();
        assert_eq!(rec.crop, [112, 192]);
        assert_eq!(rec.flips, [false, false]);
        assert_eq!(out.dim(), (256, 256));
        assert_eq!(out.values()[[0, 0]], 304.0);
    }

    #[test]
    fn identity_augment() {
        let map = TemperatureMap::new(Array2::from_shape_fn((5, 7), |(i, j)| (i * 7 + j) as f64)).unwrap();
        let (out, _) = augment(&map, &AugmentSpec::identity(), 1).unwrap();
        assert_eq!(out, map);
    }

    #[test]
    fn augment_deterministic_and_checked() {
        let map = TemperatureMap::new(Array2::from_shape_fn((40, 30), |(i, j)| (i * 30 + j) as f64)).unwrap();
        let spec = AugmentSpec::train().with_crop(Some((16, 16)));
        assert_eq!(augment(&map, &spec, 5).unwrap(), augment(&map, &spec, 5).unwrap());
        let big = AugmentSpec::train().with_crop(Some((41, 16)));
        assert!(augment(&map, &big, 5).is_err());
    }

    #[test]
    fn rot90_is_counter_clockwise() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(rot90_ccw(&a), array![[2.0, 4.0], [1.0, 3.0]]);
    }
}
