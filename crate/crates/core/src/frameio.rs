//! Frame container I/O, campaign ingestion and dataset manifests.
//!
//! A frame file is a single JSON header line, a newline, then the row-major
//! little-endian payload (`f32` or `u16`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::NormBounds;
use crate::error::{Error, Result};
use crate::frame::{GrayFrame, OperatingPoint, TemperatureMap};

pub const FRAME_MAGIC: &str = "tframe1";
/// Extension used for frame files written by this crate.
pub const FRAME_EXT: &str = "tframe";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U16,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Temperature,
    Graylevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub magic: String,
    pub dtype: Dtype,
    pub height: usize,
    pub width: usize,
    pub kind: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_amb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_obj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl FrameHeader {
    pub fn new(kind: FrameKind, dtype: Dtype, (height, width): (usize, usize)) -> Self {
        Self {
            magic: FRAME_MAGIC.to_string(),
            dtype,
            height,
            width,
            kind,
            t_amb: None,
            t_obj: None,
            seed: None,
        }
    }

    pub fn with_temps(mut self, t_amb: Option<f64>, t_obj: Option<f64>) -> Self {
        self.t_amb = t_amb;
        self.t_obj = t_obj;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn validate(&self, path: &Path) -> Result<()> {
        if self.magic != FRAME_MAGIC {
            return Err(Error::format(path, format!("bad magic {:?}", self.magic)));
        }
        if self.height < 2 || self.width < 2 {
            return Err(Error::format(
                path,
                format!("frame dims {}x{} below 2x2", self.height, self.width),
            ));
        }
        if self.dtype == Dtype::U16 && self.kind != FrameKind::Graylevel {
            return Err(Error::format(path, "u16 payload requires kind \"graylevel\""));
        }
        for (name, v) in [("t_amb", self.t_amb), ("t_obj", self.t_obj)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(Error::format(path, format!("non-finite {name} in header")));
            }
        }
        Ok(())
    }
}

/// Raw frame samples as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Array2<f32>),
    U16(Array2<u16>),
}

impl Payload {
    pub fn dtype(&self) -> Dtype {
        match self {
            Payload::F32(_) => Dtype::F32,
            Payload::U16(_) => Dtype::U16,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        match self {
            Payload::F32(a) => a.dim(),
            Payload::U16(a) => a.dim(),
        }
    }

    pub fn to_f64(&self) -> Array2<f64> {
        match self {
            Payload::F32(a) => a.mapv(f64::from),
            Payload::U16(a) => a.mapv(f64::from),
        }
    }

    /// Narrows to `f32`; values that overflow `f32` are rejected.
    pub fn f32_from(values: &Array2<f64>) -> Result<Self> {
        for (index, &v) in values.iter().enumerate() {
            if !(v as f32).is_finite() {
                return Err(Error::OutOfRange {
                    what: "f32 payload",
                    value: v,
                    index,
                    lo: f32::MIN as f64,
                    hi: f32::MAX as f64,
                });
            }
        }
        Ok(Payload::F32(values.mapv(|v| v as f32)))
    }

    /// Requires integers in `[0, 65535]`.
    pub fn u16_from(values: &Array2<f64>) -> Result<Self> {
        for (index, &v) in values.iter().enumerate() {
            if !(0.0..=u16::MAX as f64).contains(&v) || v.fract() != 0.0 {
                return Err(Error::OutOfRange {
                    what: "u16 payload",
                    value: v,
                    index,
                    lo: 0.0,
                    hi: u16::MAX as f64,
                });
            }
        }
        Ok(Payload::U16(values.mapv(|v| v as u16)))
    }
}

pub fn write_frame(header: &FrameHeader, payload: &Payload, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    header.validate(path)?;
    if header.dtype != payload.dtype() {
        return Err(Error::format(
            path,
            format!("header dtype {:?} but payload {:?}", header.dtype, payload.dtype()),
        ));
    }
    if payload.dim() != (header.height, header.width) {
        return Err(Error::GeometryMismatch {
            expected: (header.height, header.width),
            found: payload.dim(),
        });
    }
    let mut bytes = serde_json::to_vec(header).expect("header serializes");
    bytes.push(b'\n');
    match payload {
        Payload::F32(a) => {
            if let Some(index) = a.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: "f32 payload".into(),
                    index,
                });
            }
            bytes.reserve(a.len() * 4);
            a.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
        }
        Payload::U16(a) => {
            bytes.reserve(a.len() * 2);
            a.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<(FrameHeader, Payload)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing header line"))?;
    let header: FrameHeader = serde_json::from_slice(&bytes[..split])
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    header.validate(path)?;
    let body = &bytes[split + 1..];
    let n = header.height * header.width;
    let expected = n * header.dtype.size();
    if body.len() != expected {
        let what = if body.len() < expected { "truncated" } else { "oversized" };
        return Err(Error::format(
            path,
            format!(
                "{what} payload: {} bytes for {}x{} {:?} (expected {expected})",
                body.len(),
                header.height,
                header.width,
                header.dtype
            ),
        ));
    }
    let shape = (header.height, header.width);
    let payload = match header.dtype {
        Dtype::F32 => {
            let values: Vec<f32> = body
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: path.display().to_string(),
                    index,
                });
            }
            Payload::F32(Array2::from_shape_vec(shape, values).expect("length checked"))
        }
        Dtype::U16 => {
            let values: Vec<u16> = body
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            Payload::U16(Array2::from_shape_vec(shape, values).expect("length checked"))
        }
    };
    Ok((header, payload))
}

/// Writes a temperature map as `f32`.
pub fn write_temperature(
    map: &TemperatureMap,
    header: FrameHeader,
    path: impl AsRef<Path>,
) -> Result<()> {
    let header = FrameHeader {
        kind: FrameKind::Temperature,
        dtype: Dtype::F32,
        height: map.dim().0,
        width: map.dim().1,
        ..header
    };
    write_frame(&header, &Payload::f32_from(map.values())?, path)
}

/// Writes a gray-level frame: `u16` when quantized, `f32` otherwise.
pub fn write_gray(frame: &GrayFrame, header: FrameHeader, path: impl AsRef<Path>) -> Result<()> {
    let (payload, dtype) = if frame.is_quantized() {
        (Payload::u16_from(frame.values())?, Dtype::U16)
    } else {
        (Payload::f32_from(frame.values())?, Dtype::F32)
    };
    let header = FrameHeader {
        kind: FrameKind::Graylevel,
        dtype,
        height: frame.dim().0,
        width: frame.dim().1,
        ..header
    };
    write_frame(&header, &payload, path)
}

pub fn read_temperature(path: impl AsRef<Path>) -> Result<(FrameHeader, TemperatureMap)> {
    let path = path.as_ref();
    let (header, payload) = read_frame(path)?;
    if header.kind != FrameKind::Temperature {
        return Err(Error::format(path, "expected a temperature frame"));
    }
    Ok((header, TemperatureMap::new(payload.to_f64())?))
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<(FrameHeader, GrayFrame)> {
    let path = path.as_ref();
    let (header, payload) = read_frame(path)?;
    if header.kind != FrameKind::Graylevel {
        return Err(Error::format(path, "expected a gray-level frame"));
    }
    let frame = match payload {
        Payload::U16(_) => GrayFrame::quantized(payload.to_f64()),
        Payload::F32(_) => GrayFrame::new(payload.to_f64()),
    };
    Ok((header, frame.map_err(|e| e.in_stage(path.display().to_string()))?))
}

/// Frame files (`*.tframe`) directly inside `dir`, sorted by name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == FRAME_EXT) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Running per-pixel mean and sum of squared deviations.
struct Welford {
    n: usize,
    mean: Array2<f64>,
    m2: Array2<f64>,
}

impl Welford {
    fn new(dim: (usize, usize)) -> Self {
        Self {
            n: 0,
            mean: Array2::zeros(dim),
            m2: Array2::zeros(dim),
        }
    }

    fn push(&mut self, x: &Array2<f64>) {
        self.n += 1;
        let n = self.n as f64;
        ndarray::Zip::from(&mut self.mean)
            .and(&mut self.m2)
            .and(x)
            .for_each(|mean, m2, &x| {
                let delta = x - *mean;
                *mean += delta / n;
                *m2 += delta * (x - *mean);
            });
    }

    /// Sample variance (divisor N − 1); zero for a single frame.
    fn variance(&self) -> Array2<f64> {
        if self.n < 2 {
            Array2::zeros(self.mean.dim())
        } else {
            let d = (self.n - 1) as f64;
            self.m2.mapv(|v| v / d)
        }
    }
}

/// Groups the gray-level frames in `dir` by their `(t_amb, t_obj)` header
/// tags and averages each group into an [`OperatingPoint`].
///
/// Points come back ordered by `t_amb`, then `t_obj`.
pub fn ingest_campaign(dir: impl AsRef<Path>) -> Result<Vec<OperatingPoint>> {
    let dir = dir.as_ref();
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(Error::Empty("campaign directory holds no frame files"));
    }

    let mut groups: BTreeMap<(u64, u64), (f64, f64, Vec<PathBuf>)> = BTreeMap::new();
    let mut dim: Option<(usize, usize, PathBuf)> = None;
    for path in paths {
        let (header, _) = read_frame(&path)?;
        if header.kind != FrameKind::Graylevel {
            return Err(Error::format(&path, "campaign frames must be gray-level"));
        }
        let (Some(t_amb), Some(t_obj)) = (header.t_amb, header.t_obj) else {
            return Err(Error::format(&path, "missing t_amb/t_obj tag"));
        };
        match &dim {
            None => dim = Some((header.height, header.width, path.clone())),
            Some((h, w, first)) if (*h, *w) != (header.height, header.width) => {
                return Err(Error::format(
                    &path,
                    format!(
                        "dims {}x{} differ from {}x{} of {}",
                        header.height,
                        header.width,
                        h,
                        w,
                        first.display()
                    ),
                ));
            }
            Some(_) => {}
        }
        groups
            .entry((ordered_key(t_amb), ordered_key(t_obj)))
            .or_insert_with(|| (t_amb, t_obj, Vec::new()))
            .2
            .push(path);
    }

    let (h, w, _) = dim.expect("at least one frame");
    groups
        .into_values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(t_amb, t_obj, paths)| {
            let mut acc = Welford::new((h, w));
            for path in &paths {
                let (_, frame) = read_gray(path)?;
                acc.push(frame.values());
            }
            let var = acc.variance();
            OperatingPoint::new(t_amb, t_obj, GrayFrame::new(acc.mean)?, var, acc.n)
        })
        .collect()
}

/// Monotone map from `f64` to `u64` so tags sort numerically.
fn ordered_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// One supervised sample of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    /// Degraded, normalized gray-level frame, relative to the dataset root.
    pub input: String,
    /// Normalized temperature target, relative to the dataset root.
    pub target: String,
    /// Source temperature map file name.
    pub source: String,
    pub t_amb: f64,
    pub seed: u64,
    pub split: Split,
    /// Top-left `(row, col)` of the crop in the source map.
    pub crop: [usize; 2],
    /// `[horizontal, vertical]`
    pub flips: [bool; 2],
    /// Number of counter-clockwise quarter turns.
    pub rot90: u8,
    pub norm: NormBounds,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub fn write_manifest(records: &[SampleRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn gray_header(dim: (usize, usize), dtype: Dtype) -> FrameHeader {
        FrameHeader::new(FrameKind::Graylevel, dtype, dim)
    }

    #[test]
    fn f32_file_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tframe");
        let map = TemperatureMap::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        write_temperature(&map, FrameHeader::new(FrameKind::Temperature, Dtype::F32, (2, 2)), &path)
            .unwrap();
        let bytes = fs::read(&path).unwrap();
        let header_len = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len(), header_len + 1 + 16);
        let (_, back) = read_temperature(&path).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn u16_range() {
        assert!(Payload::u16_from(&array![[16383.0, 0.0]]).is_ok());
        let err = Payload::u16_from(&array![[70000.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { index: 0, .. }));
    }

    #[test]
    fn u16_needs_graylevel_kind() {
        let dir = tempfile::tempdir().unwrap();
        let header = FrameHeader::new(FrameKind::Temperature, Dtype::U16, (2, 2));
        let payload = Payload::U16(Array2::zeros((2, 2)));
        assert!(write_frame(&header, &payload, dir.path().join("x")).is_err());
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tframe");
        write_frame(
            &gray_header((3, 3), Dtype::U16),
            &Payload::U16(Array2::ones((3, 3))),
            &path,
        )
        .unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, bytes).unwrap();
        let err = read_frame(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tframe");
        let mut header = gray_header((2, 2), Dtype::U16);
        header.magic = "nope".into();
        let mut bytes = serde_json::to_vec(&header).unwrap();
        bytes.push(b'\n');
        bytes.extend_from_slice(&[0; 8]);
        fs::write(&path, bytes).unwrap();
        assert!(read_frame(&path).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn nan_payload_rejected_with_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tframe");
        let header = gray_header((2, 2), Dtype::F32);
        let mut bytes = serde_json::to_vec(&header).unwrap();
        bytes.push(b'\n');
        for v in [1.0f32, 2.0, f32::NAN, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_frame(&path), Err(Error::NonFinite { index: 2, .. })));
    }

    #[test]
    fn ordered_key_sorts_numerically() {
        let xs = [-5.5, -0.0, 0.0, 1e-300, 2.0, 40.5];
        for p in xs.windows(2) {
            assert!(ordered_key(p[0]) < ordered_key(p[1]));
        }
    }

    #[test]
    fn ingest_hand_variance() {
        let dir = tempfile::tempdir().unwrap();
        for (i, v) in [10.0, 12.0].into_iter().enumerate() {
            let frame = GrayFrame::quantized(Array2::from_elem((2, 3), v)).unwrap();
            let header = gray_header((2, 3), Dtype::U16).with_temps(Some(30.0), Some(40.0));
            write_gray(&frame, header, dir.path().join(format!("f{i}.tframe"))).unwrap();
        }
        let points = ingest_campaign(dir.path()).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].n_frames, 2);
        assert!(points[0].mean_frame.values().iter().all(|&v| v == 11.0));
        assert!(points[0].var_frame.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn ingest_rejects_mixed_dims_and_missing_tags() {
        let dir = tempfile::tempdir().unwrap();
        let a = GrayFrame::quantized(Array2::zeros((2, 3))).unwrap();
        let b = GrayFrame::quantized(Array2::zeros((3, 3))).unwrap();
        let tagged = |d| gray_header(d, Dtype::U16).with_temps(Some(30.0), Some(40.0));
        write_gray(&a, tagged((2, 3)), dir.path().join("a.tframe")).unwrap();
        write_gray(&b, tagged((3, 3)), dir.path().join("b.tframe")).unwrap();
        let err = ingest_campaign(dir.path()).unwrap_err();
        assert!(err.to_string().contains("b.tframe"), "{err}");

        let dir = tempfile::tempdir().unwrap();
        write_gray(&a, gray_header((2, 3), Dtype::U16), dir.path().join("a.tframe")).unwrap();
        assert!(ingest_campaign(dir.path()).unwrap_err().to_string().contains("tag"));
    }
}
