//! Write and read tagged frame files and list a directory of them.
//!
//! cargo run --example frameio

use ndarray::Array2;

use thermonu::frameio::{list_frames, read_gray, write_gray, write_temperature, Dtype, FrameKind};
use thermonu::{read_frame, FrameHeader, GrayFrame, TemperatureMap};

fn main() -> thermonu::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let map = TemperatureMap::new(Array2::from_shape_fn((4, 6), |(i, j)| 20.0 + i as f64 + 0.5 * j as f64))?;
    write_temperature(
        &map,
        FrameHeader::new(FrameKind::Temperature, Dtype::F32, map.dim()),
        dir.path().join("scene.tframe"),
    )?;

    let raw = GrayFrame::quantized(Array2::from_shape_fn((4, 6), |(i, j)| (8000 + 10 * i + j) as f64))?;
    let header = FrameHeader::new(FrameKind::Graylevel, Dtype::U16, raw.dim())
        .with_temps(Some(35.0), Some(40.0))
        .with_seed(3);
    write_gray(&raw, header, dir.path().join("raw.tframe"))?;

    for path in list_frames(dir.path())? {
        let (header, payload) = read_frame(&path)?;
        println!("{}: {:?}, payload {:?} {:?}", path.display(), header, payload.dtype(), payload.dim());
    }
    let (_, back) = read_gray(dir.path().join("raw.tframe"))?;
    assert_eq!(back, raw);
    Ok(())
}
