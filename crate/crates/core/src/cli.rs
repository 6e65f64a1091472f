//! The `thermonu` command line.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

use crate::characterize::characterize_camera_with_residuals;
use crate::dataset::{generate_dataset, AugmentSpec, DatasetConfig};
use crate::error::{Error, Result};
use crate::estimate::{estimate_linear, invert_polynomial, linear_gd_from_model, Estimate};
use crate::frame::GrayFrame;
use crate::frameio::{
    ingest_campaign, list_frames, read_frame, read_gray, read_temperature, write_frame, write_gray,
    write_temperature, Dtype, FrameHeader, FrameKind, Payload, Split,
};
use crate::metrics::{evaluate, EvalPair, MetricsConfig};
use crate::model::{load_model, save_model, FitConfig};
use crate::selfcal::{reference_model, selfcal_check, write_campaign, CampaignSpec};
use crate::simulate::{add_read_noise, gen_fpn, quantize, simulate_frame, NoiseSpec};

/// Ambient-dependent nonuniformity toolkit for microbolometer cameras.
#[derive(Debug, Parser)]
#[command(name = "thermonu", version)]
pub struct Cli {
    /// Print a machine-readable JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a camera model from a directory of tagged blackbody frames.
    Characterize(CharacterizeArgs),
    /// Render the raw camera response to a temperature map.
    Simulate(SimulateArgs),
    /// Generate supervised (gray level, temperature) training pairs.
    GenDataset(GenDatasetArgs),
    /// Estimate temperatures from a raw frame.
    Estimate(EstimateArgs),
    /// Score estimated temperature maps against ground truth.
    Evaluate(EvaluateArgs),
    /// Synthesize a campaign from a reference model, re-characterize it and
    /// report the reconstruction error.
    SelfcalCheck(SelfcalArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, default_value_t = 2)]
    m_gl: usize,
    #[arg(long, default_value_t = 15)]
    m_spatial_fine: usize,
    #[arg(long, default_value_t = 8)]
    m_radial: usize,
    #[arg(long, default_value_t = 3)]
    m_ambient: usize,
    /// Coefficient-map smoothing sigma, pixels.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            m_gl: self.m_gl,
            m_spatial_fine: self.m_spatial_fine,
            m_radial: self.m_radial,
            m_ambient: self.m_ambient,
            smoothing_sigma: self.sigma,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct CharacterizeArgs {
    /// Directory of `.tframe` files tagged with t_amb and t_obj.
    #[arg(long)]
    campaign: PathBuf,
    /// Output model (`.tcam.json`).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Temperature map frame.
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    tamb: f64,
    #[arg(long)]
    out: PathBuf,
    /// Additive read-noise variance, GL².
    #[arg(long, default_value_t = 0.0)]
    noise_var: f64,
    #[arg(long, default_value_t = 1.0)]
    fpn_min: f64,
    #[arg(long, default_value_t = 1.0)]
    fpn_max: f64,
    /// Round and clamp to 14-bit integers, stored as u16.
    #[arg(long)]
    quantize: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Train,
    Val,
}

#[derive(Debug, Args)]
struct GenDatasetArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory of temperature-map frames.
    #[arg(long)]
    maps: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Number of samples (default: one per map).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Square crop side; 0 keeps the full frame.
    #[arg(long, default_value_t = 256)]
    crop: usize,
    #[arg(long, default_value_t = 5.0)]
    noise_var: f64,
    #[arg(long, default_value_t = 0.9)]
    fpn_min: f64,
    #[arg(long, default_value_t = 1.0)]
    fpn_max: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Invert,
    Linear,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Raw gray-level frame.
    #[arg(long)]
    frame: PathBuf,
    #[arg(long)]
    tamb: f64,
    #[arg(long, value_enum, default_value_t = Method::Invert)]
    method: Method,
    #[arg(long)]
    out: PathBuf,
    /// Validity mask output (u16, 1 = valid).
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Estimated temperature frame, or a directory of them.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth frame, or a directory with matching file names.
    #[arg(long)]
    truth: PathBuf,
    /// Validity mask frame or directory (nonzero = valid).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// JSON report output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Dynamic range L for PSNR and SSIM (default: the 0..100 °C range).
    #[arg(long)]
    peak: Option<f64>,
}

#[derive(Debug, Args)]
struct SelfcalArgs {
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 336)]
    width: usize,
    /// Per-frame read-noise variance, GL².
    #[arg(long, default_value_t = 0.0)]
    noise_var: f64,
    /// Frames averaged per operating point.
    #[arg(long, default_value_t = 1)]
    frames: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the individual quantized campaign frames here.
    #[arg(long)]
    write_campaign: Option<PathBuf>,
    /// Write the rebuilt model here.
    #[arg(long)]
    out_model: Option<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| Failure::Usage(format!("--seed is required for {what}")))
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    init_threads();
    match dispatch(&cli) {
        Ok(report) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            0
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let mut msg = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!(": {s}"));
                source = s.source();
            }
            eprintln!("error: {msg}");
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn init_threads() {
    if let Some(n) = std::env::var("THERMONU_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cli: &Cli) -> CliResult<serde_json::Value> {
    let quiet = cli.json;
    match &cli.command {
        Command::Characterize(a) => characterize(a, quiet),
        Command::Simulate(a) => simulate(a, quiet),
        Command::GenDataset(a) => gen_dataset(a, quiet),
        Command::Estimate(a) => estimate(a, quiet),
        Command::Evaluate(a) => evaluate_cmd(a, quiet),
        Command::SelfcalCheck(a) => selfcal(a, quiet),
    }
}

fn to_value(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn characterize(a: &CharacterizeArgs, quiet: bool) -> CliResult<serde_json::Value> {
    let points = ingest_campaign(&a.campaign).map_err(|e| e.in_stage("ingest"))?;
    let result = characterize_camera_with_residuals(&points, &a.fit.config())
        .map_err(|e| e.in_stage("characterize"))?;
    save_model(&result.model, &a.out)?;
    let m = &result.model;
    if !quiet {
        println!(
            "characterized {}x{} from {} operating points -> {}",
            m.height,
            m.width,
            points.len(),
            a.out.display()
        );
    }
    Ok(json!({
        "model": a.out,
        "height": m.height,
        "width": m.width,
        "operating_points": points.len(),
        "degrees": m.degrees,
        "gl_bounds": [m.gl_bounds.0, m.gl_bounds.1],
        "temp_bounds": [m.temp_bounds.0, m.temp_bounds.1],
        "t_amb_range": [m.t_amb_range.0, m.t_amb_range.1],
        "noise_var_gl2": m.noise_var_gl2,
        "residuals": result.residuals.iter().map(|r| json!({
            "order": r.order,
            "t_amb": r.t_amb,
            "pixelwise_rms": r.pixelwise_rms,
            "smoothing_rms": r.smoothing_rms,
            "spatial_quad_rms": r.spatial_quad_rms,
            "spatial_fine_rms": r.spatial_fine_rms,
            "radial_rms": r.radial_rms,
        })).collect::<Vec<_>>(),
    }))
}

fn simulate(a: &SimulateArgs, quiet: bool) -> CliResult<serde_json::Value> {
    let stochastic = a.noise_var > 0.0 || a.fpn_min < a.fpn_max;
    let seed = if stochastic {
        require_seed(a.seed, "noisy simulation")?
    } else {
        a.seed.unwrap_or(0)
    };
    let model = load_model(&a.model)?;
    let (_, map) = read_temperature(&a.map)?;
    let (h, w) = map.dim();
    let model = model.with_geometry(h, w)?;
    let spec = NoiseSpec {
        gaussian_var: a.noise_var,
        fpn_vmin: a.fpn_min,
        fpn_vmax: a.fpn_max,
        seed,
    };
    spec.validate()?;
    let clean = simulate_frame(&model, &map, a.tamb)?;
    let noisy = add_read_noise(&clean, a.noise_var, seed)?;
    let mut frame = GrayFrame::new(noisy.into_values() * gen_fpn(h, w, &spec))?;
    let mut clamped = 0;
    if a.quantize {
        (frame, clamped) = quantize(&frame);
        if clamped > 0 {
            log::warn!("{clamped} pixels clamped to the 14-bit range");
        }
    }
    let mut header = FrameHeader::new(FrameKind::Graylevel, Dtype::F32, (h, w)).with_temps(Some(a.tamb), None);
    if stochastic {
        header = header.with_seed(seed);
    }
    write_gray(&frame, header, &a.out)?;
    if !quiet {
        println!("simulated {h}x{w} at t_amb={} -> {}", a.tamb, a.out.display());
    }
    Ok(json!({ "out": a.out, "height": h, "width": w, "t_amb": a.tamb, "clamped": clamped }))
}

fn gen_dataset(a: &GenDatasetArgs, quiet: bool) -> CliResult<serde_json::Value> {
    let seed = require_seed(a.seed, "dataset generation")?;
    let model = load_model(&a.model)?;
    let mut maps = Vec::new();
    for path in list_frames(&a.maps)? {
        let (_, map) = read_temperature(&path)?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        maps.push((name, map));
    }
    let crop = (a.crop > 0).then_some((a.crop, a.crop));
    let augment = match a.mode {
        Mode::Train => AugmentSpec::train(),
        Mode::Val => AugmentSpec::val(),
    }
    .with_crop(crop);
    let cfg = DatasetConfig {
        count: a.count.unwrap_or(maps.len()),
        seed,
        augment,
        noise: NoiseSpec {
            gaussian_var: a.noise_var,
            fpn_vmin: a.fpn_min,
            fpn_vmax: a.fpn_max,
            seed,
        },
        norm: None,
    };
    let records = generate_dataset(&model, &maps, &cfg, &a.out)?;
    if !quiet {
        println!("wrote {} samples to {}", records.len(), a.out.display());
    }
    Ok(json!({
        "out": a.out,
        "samples": records.len(),
        "split": match a.mode { Mode::Train => Split::Train, Mode::Val => Split::Val },
        "norm": records.first().map(|r| r.norm),
    }))
}

fn estimate(a: &EstimateArgs, quiet: bool) -> CliResult<serde_json::Value> {
    let model = load_model(&a.model)?;
    let (_, frame) = read_gray(&a.frame)?;
    let (h, w) = frame.dim();
    let model = model.with_geometry(h, w)?;
    let est: Estimate = match a.method {
        Method::Invert => invert_polynomial(&model, &frame, a.tamb)?,
        Method::Linear => {
            let cal = linear_gd_from_model(&model, model.degrees.m_ambient, 8, 9)?;
            estimate_linear(&cal, &frame, a.tamb)?
        }
    };
    let header = FrameHeader::new(FrameKind::Temperature, Dtype::F32, (h, w)).with_temps(Some(a.tamb), None);
    write_temperature(&est.map, header, &a.out)?;
    if let Some(mask_path) = &a.mask {
        let mask = est.mask.mapv(u16::from);
        write_frame(
            &FrameHeader::new(FrameKind::Graylevel, Dtype::U16, (h, w)),
            &Payload::U16(mask),
            mask_path,
        )?;
    }
    let masked = h * w - est.valid_count();
    if !quiet {
        println!("estimated {h}x{w} ({masked} masked) -> {}", a.out.display());
    }
    Ok(json!({ "out": a.out, "height": h, "width": w, "masked": masked }))
}

fn read_mask(path: &Path) -> Result<Array2<bool>> {
    let (_, payload) = read_frame(path)?;
    Ok(payload.to_f64().mapv(|v| v != 0.0))
}

fn evaluate_cmd(a: &EvaluateArgs, quiet: bool) -> CliResult<serde_json::Value> {
    let pairs: Vec<(String, PathBuf, PathBuf, Option<PathBuf>)> = if a.pred.is_dir() {
        if !a.truth.is_dir() {
            return Err(Failure::Usage("--pred is a directory but --truth is not".into()));
        }
        list_frames(&a.pred)?
            .into_iter()
            .map(|p| {
                let name = p.file_name().expect("listed file").to_owned();
                let mask = a.mask.as_ref().map(|m| m.join(&name));
                (name.to_string_lossy().into_owned(), p.clone(), a.truth.join(&name), mask)
            })
            .collect()
    } else {
        let name = a.pred.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        vec![(name, a.pred.clone(), a.truth.clone(), a.mask.clone())]
    };
    let mut loaded = Vec::with_capacity(pairs.len());
    for (name, pred, truth, mask) in pairs {
        let (_, p) = read_temperature(&pred)?;
        let (_, t) = read_temperature(&truth)?;
        let m = mask.as_deref().map(read_mask).transpose()?;
        loaded.push((name, p.into_values(), t.into_values(), m));
    }
    let mut cfg = MetricsConfig::default();
    if let Some(peak) = a.peak {
        cfg = cfg.with_dynamic_range(peak);
    }
    let eval_pairs: Vec<EvalPair<'_>> = loaded
        .iter()
        .map(|(name, p, t, m)| EvalPair {
            name: name.clone(),
            estimate: p,
            truth: t,
            mask: m.as_ref(),
        })
        .collect();
    let report = evaluate(&eval_pairs, &cfg)?;
    let value = to_value(&report);
    if let Some(path) = &a.report {
        let text = serde_json::to_string_pretty(&value).expect("report serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    }
    if !quiet {
        println!("{:<32} {:>10} {:>10} {:>8}", "frame", "MAE[°C]", "PSNR[dB]", "SSIM");
        for r in &report.rows {
            println!("{:<32} {:>10.4} {:>10.2} {:>8.4}", r.name, r.mae, r.psnr_db, r.ssim);
        }
        println!(
            "{:<32} {:>10.4} {:>10.2} {:>8.4}",
            "mean", report.mean_mae, report.mean_psnr_db, report.mean_ssim
        );
    }
    Ok(value)
}

fn selfcal(a: &SelfcalArgs, quiet: bool) -> CliResult<serde_json::Value> {
    let seed = if a.noise_var > 0.0 {
        require_seed(a.seed, "a noisy campaign")?
    } else {
        a.seed.unwrap_or(0)
    };
    let reference = reference_model(a.height, a.width)?;
    let spec = CampaignSpec {
        noise_var: a.noise_var,
        n_frames: a.frames,
        seed,
        ..CampaignSpec::default()
    };
    if let Some(dir) = &a.write_campaign {
        let n = write_campaign(&reference, &spec, dir)?;
        log::info!("wrote {n} campaign frames to {}", dir.display());
    }
    let (report, rebuilt) = selfcal_check(&reference, &spec, &a.fit.config())?;
    if let Some(path) = &a.out_model {
        save_model(&rebuilt, path)?;
    }
    if !quiet {
        println!("{:>8} {:>12} {:>12} {:>14}", "t_amb", "min R²", "mean R²", "roundtrip MAE");
        for amb in &report.ambients {
            println!(
                "{:>8.1} {:>12.6} {:>12.6} {:>14.2e}",
                amb.t_amb, amb.min_pixel_r2, amb.mean_pixel_r2, amb.roundtrip_mae
            );
        }
        println!(
            "min R² {:.6}, max relative error {:.3e}, characterization {:.2} s",
            report.min_r2, report.max_rel_err, report.characterize_seconds
        );
    }
    Ok(to_value(&report))
}
