//! The `rawsr` command line.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys are
//! the subcommand's long flag names (`"out-dir"`, `"seed"`, ...). Flags given
//! on the command line win over the file; unknown keys are rejected.
//! Existing outputs are only replaced with `--force`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rawsr_core::degrade::{disk_kernel, motion_kernel, MOTION_STEPS};
use rawsr_core::guided::{apply_global_transform, apply_transform_field, etgf, guided_filter_rgb, GlobalTransform, PointwiseMap};
use rawsr_core::isp::IspConfig;
use rawsr_core::nets::check::{check_named_net, NETS, NET_STEP};
use rawsr_core::nets::{NetConfig, RawSrModel};
use rawsr_core::nn::gradcheck::{check_named_layer, max_error, GradCheckOptions, LAYERS};
use rawsr_core::pipeline::{infer_patched, train, SynthConfig, TrainSchedule, DEFAULT_OVERLAP, DEFAULT_PATCH};
use rawsr_core::BayerPattern;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{exit_code, invalid, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};
use crate::{checkpoint, dataset, field, imageio, kernel, report};

/// Worst relative error a single layer may show.
pub const LAYER_TOLERANCE: f64 = 1e-4;
/// Worst relative error a whole network may show.
pub const NET_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "rawsr", version, about = "Raw-image super-resolution: data synthesis, training, inference and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a training set from clean linear sources.
    Synth(SynthArgs),
    /// Train a model on a synthesized dataset.
    Train(TrainArgs),
    /// Super-resolve a raw mosaic with a trained model.
    Infer(InferArgs),
    /// Run one of the guided-filter color transforms.
    Filter(FilterArgs),
    /// PSNR/SSIM over a list of image pairs.
    Eval(EvalArgs),
    /// Finite-difference gradient checks of layers and networks.
    Gradcheck(GradcheckArgs),
    /// Write a defocus or camera-shake blur kernel.
    Kernel(KernelArgs),
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Replace an existing dataset.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    /// Directory of 16-bit linear PNG or Bayer (PGM/PNG + sidecar) sources.
    #[arg(long)]
    pub src_dir: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Number of samples; sources are used round-robin.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON IspConfig for development (default ISP otherwise).
    #[arg(long)]
    pub isp_config: Option<PathBuf>,
    /// Non-blind protocol: this defocus radius for every sample, no motion blur.
    #[arg(long)]
    pub non_blind_radius: Option<f64>,
    /// Downsampling factor between clean image and raw input: 2 or 4.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Bayer pattern of the synthesized raw: RGGB, BGGR, GRBG or GBRG.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Draw per-sample white-balance gains around the ISP config.
    #[arg(long)]
    pub jitter_isp: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Replace an existing checkpoint or loss log.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    /// Dataset manifest written by `synth`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Training schedule: paper or desk.
    #[arg(long)]
    pub profile: Option<String>,
    /// Architecture: toy, full, toy-4x or full-4x (desk: toy, paper: full).
    #[arg(long)]
    pub model: Option<String>,
    /// Output checkpoint directory.
    #[arg(long)]
    pub out_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Loss CSV (default: loss.csv inside the checkpoint).
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// Start from the weights of this checkpoint; its profile must match.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override the profile's phase-1 iteration count.
    #[arg(long)]
    pub phase1_iters: Option<usize>,
    /// Override the profile's phase-2 iteration count.
    #[arg(long)]
    pub phase2_iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Training crop side in output pixels.
    #[arg(long)]
    pub patch: Option<usize>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct InferArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Replace existing outputs.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Raw mosaic (PGM/PNG with pattern sidecar).
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// 8-bit developed reference of the same size as the raw.
    #[arg(long = "ref")]
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    /// Output 8-bit PNG.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tile side in raw pixels.
    #[arg(long)]
    pub patch: Option<usize>,
    /// Tile overlap in raw pixels.
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Expected upscaling factor of the checkpoint: 2 or 4.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Also dump the whole-image transform field (header path, blob beside it).
    #[arg(long)]
    pub field_out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FilterArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Replace an existing output.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    /// gf, global, etgf or field.
    #[arg(long)]
    pub mode: Option<String>,
    /// Guide image (gf, etgf).
    #[arg(long)]
    pub guide: Option<PathBuf>,
    /// Image to filter or transform.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Output 16-bit PNG.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// JSON `{"a": [[..],[..],[..]], "b": [..]}` (global).
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Transform field header (field).
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// JSON pointwise map applied before filtering (etgf; identity otherwise).
    #[arg(long)]
    pub map: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Replace an existing report.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    /// JSON lines of `{"output": ..., "target": ...}`.
    #[arg(long)]
    pub pairs_manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GradcheckArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Layer to check, or `all`.
    #[arg(long, conflicts_with = "net")]
    pub layer: Option<String>,
    /// Network to check (restoration, color, model, model-4x), or `all`.
    #[arg(long)]
    pub net: Option<String>,
    /// First seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Coordinates probed per tensor (default 12 for layers, 2 for networks).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Scale analytic gradients by this factor; any value but 1 must fail.
    #[arg(long)]
    pub corrupt: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct KernelArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Replace an existing output.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    /// disk or motion.
    #[arg(long)]
    pub kind: Option<String>,
    /// Disk radius in pixels.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Motion kernel side (odd).
    #[arg(long)]
    pub size: Option<usize>,
    /// Random-walk steps of the motion trajectory.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| invalid!("config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| invalid!("config {}: {e}", path.display()))
}

macro_rules! merge {
    ($flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )*
    };
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| invalid!("--{flag} is required"))
}

fn check_output(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(invalid!("{} exists; pass --force to replace it", path.display()));
    }
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| invalid!("{what} {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| invalid!("{what} {}: {e}", path.display()))
}

fn parse_pattern(s: &str) -> Result<BayerPattern> {
    s.parse::<BayerPattern>().map_err(|_| invalid!("unknown Bayer pattern {s:?}"))
}

pub fn synth(mut a: SynthArgs) -> Result<()> {
    let f: SynthArgs = read_config(a.config.as_deref())?;
    merge!(a, f; src_dir, out_dir, count, seed, isp_config, non_blind_radius, factor, pattern, jobs);
    a.jitter_isp |= f.jitter_isp;
    let src = required(a.src_dir, "src-dir")?;
    let out = required(a.out_dir, "out-dir")?;
    let count = required(a.count, "count")?;
    let seed = required(a.seed, "seed")?;
    let isp = match &a.isp_config {
        Some(p) => read_json::<IspConfig>(p, "ISP config")?,
        None => IspConfig::default(),
    };
    let cfg = SynthConfig {
        isp,
        jitter_isp: a.jitter_isp,
        pattern: parse_pattern(a.pattern.as_deref().unwrap_or("RGGB"))?,
        factor: a.factor.unwrap_or(2),
        non_blind_radius: a.non_blind_radius,
    };
    cfg.validate()?;
    dataset::list_sources(&src)?;
    let manifest = out.join(dataset::MANIFEST);
    check_output(&manifest, a.force)?;
    if a.force && out.join(dataset::SAMPLES).exists() {
        fs::remove_dir_all(out.join(dataset::SAMPLES))?;
    }
    let records = dataset::synthesize_dataset(&src, &out, count, seed, &cfg, a.jobs.unwrap_or(1))?;
    eprintln!("wrote {} samples and {}", records.len(), manifest.display());
    Ok(())
}

pub fn train_cmd(mut a: TrainArgs) -> Result<()> {
    let f: TrainArgs = read_config(a.config.as_deref())?;
    merge!(a, f; manifest, profile, model, out_checkpoint, seed, loss_log, resume, phase1_iters, phase2_iters, batch, patch);
    let manifest = required(a.manifest, "manifest")?;
    let profile = required(a.profile, "profile")?;
    let out = required(a.out_checkpoint, "out-checkpoint")?;
    let seed = required(a.seed, "seed")?;
    let mut schedule = TrainSchedule::profile(&profile)?;
    if let Some(v) = a.phase1_iters {
        schedule.phase1_iters = v;
    }
    if let Some(v) = a.phase2_iters {
        schedule.phase2_iters = v;
    }
    if let Some(v) = a.batch {
        schedule.batch = v;
    }
    if let Some(v) = a.patch {
        schedule.patch = v;
    }
    schedule.validate()?;

    let data = dataset::load_dataset(&manifest)?;
    let factor = data[0].provenance.factor;
    let default_model = match (profile.as_str(), factor) {
        ("paper", 4) => "full-4x",
        ("paper", _) => "full",
        (_, 4) => "toy-4x",
        _ => "toy",
    };
    let model_name = a.model.unwrap_or_else(|| default_model.into());
    let net = NetConfig::profile(&model_name)?;
    if net.scale != factor {
        return Err(invalid!("model {model_name} upscales by {} but the dataset was synthesized at factor {factor}", net.scale));
    }

    let mut model = match &a.resume {
        Some(dir) => {
            let (m, model) = checkpoint::load(dir)?;
            if m.train_profile.as_deref() != Some(profile.as_str()) {
                return Err(invalid!(
                    "refusing to resume: {} was trained with profile {:?}, not {profile:?}",
                    dir.display(),
                    m.train_profile.as_deref().unwrap_or("none")
                ));
            }
            if m.net != net {
                return Err(invalid!("refusing to resume: {} holds model {}, not {model_name}", dir.display(), m.model));
            }
            model
        }
        None => RawSrModel::new(net, seed)?,
    };

    check_output(&out, a.force)?;
    let loss_log = a.loss_log.unwrap_or_else(|| out.join("loss.csv"));
    if !loss_log.starts_with(&out) {
        check_output(&loss_log, a.force)?;
    }
    let mut staging = out.clone().into_os_string();
    staging.push(".partial");
    let staging = PathBuf::from(staging);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
    let staged_log = if loss_log.starts_with(&out) { staging.join(loss_log.strip_prefix(&out)?) } else { loss_log.clone() };
    let mut csv = BufWriter::new(fs::File::create(&staged_log).with_context(|| format!("creating {}", staged_log.display()))?);
    writeln!(csv, "iter,phase,lr,loss")?;
    let mut io_err = None;
    let total = schedule.phase1_iters + schedule.phase2_iters;
    let mut done = 0;
    train(&mut model, &data, &schedule, seed, |r| {
        done += 1;
        if let Err(e) = writeln!(csv, "{},{},{},{}", r.iter, r.phase, r.lr, r.loss) {
            io_err.get_or_insert(e);
        }
        if r.iter % 100 == 0 || done == total {
            eprintln!("phase {} iter {} loss {:.6}", r.phase, r.iter, r.loss);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    csv.flush()?;
    drop(csv);
    checkpoint::save(&staging, &model, &model_name, Some(&profile), Some(&schedule), seed)?;
    if out.exists() {
        fs::remove_dir_all(&out)?;
    }
    fs::rename(&staging, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

pub fn infer(mut a: InferArgs) -> Result<()> {
    let f: InferArgs = read_config(a.config.as_deref())?;
    merge!(a, f; checkpoint, raw, reference, out, patch, overlap, factor, field_out);
    let ckpt = required(a.checkpoint, "checkpoint")?;
    let out = required(a.out, "out")?;
    check_output(&out, a.force)?;
    if let Some(p) = &a.field_out {
        check_output(p, a.force)?;
    }
    let raw = imageio::load_bayer(&required(a.raw, "raw")?)?;
    let reference = imageio::load_color(&required(a.reference, "ref")?)?;
    let (_, mut model) = checkpoint::load(&ckpt)?;
    let scale = model.config().scale;
    if let Some(factor) = a.factor {
        if factor != 2 && factor != 4 {
            return Err(invalid!("--factor must be 2 or 4, got {factor}"));
        }
        if factor != scale {
            return Err(invalid!("--factor {factor} does not match the checkpoint, which upscales by {scale}"));
        }
    }
    let patch = a.patch.unwrap_or(DEFAULT_PATCH);
    let overlap = a.overlap.unwrap_or(DEFAULT_OVERLAP);
    let img = infer_patched(&mut model, &raw, &reference, patch, overlap)?;
    imageio::save_color(&img, &out)?;
    if let Some(p) = &a.field_out {
        let whole = model.infer(&raw, &reference)?;
        field::write_field(&whole.field, p)?;
    }
    eprintln!("wrote {} ({}x{})", out.display(), img.width(), img.height());
    Ok(())
}

pub fn filter(mut a: FilterArgs) -> Result<()> {
    let f: FilterArgs = read_config(a.config.as_deref())?;
    merge!(a, f; mode, guide, src, out, radius, eps, transform, field, map);
    let mode = required(a.mode, "mode")?;
    let out = required(a.out, "out")?;
    check_output(&out, a.force)?;
    let src = imageio::load_rgb(&required(a.src, "src")?)?;
    let radius = a.radius.unwrap_or(2);
    let eps = a.eps.unwrap_or(1e-2);
    let result = match mode.as_str() {
        "gf" => guided_filter_rgb(&imageio::load_rgb(&required(a.guide, "guide")?)?, &src, radius, eps)?,
        "etgf" => {
            let guide = imageio::load_rgb(&required(a.guide, "guide")?)?;
            let map = match &a.map {
                Some(p) => read_json::<PointwiseMap>(p, "pointwise map")?,
                None => PointwiseMap::identity(),
            };
            etgf(&guide, &src, |x| map.apply(x), radius, eps)?
        }
        "global" => {
            let t = match &a.transform {
                Some(p) => read_json::<GlobalTransform>(p, "transform")?,
                None => GlobalTransform::identity(),
            };
            apply_global_transform(&src, &t)?
        }
        "field" => apply_transform_field(&src, &field::read_field(&required(a.field, "field")?)?)?,
        other => return Err(invalid!("unknown filter mode {other:?}; expected gf, global, etgf or field")),
    };
    imageio::save_linear(&result.map(|v| v.clamp(0.0, 1.0)), &out)?;
    Ok(())
}

pub fn eval(mut a: EvalArgs) -> Result<()> {
    let f: EvalArgs = read_config(a.config.as_deref())?;
    merge!(a, f; pairs_manifest, out_report);
    let pairs = required(a.pairs_manifest, "pairs-manifest")?;
    let out = required(a.out_report, "out-report")?;
    check_output(&out, a.force)?;
    let r = report::evaluate(&pairs)?;
    fs::write(&out, serde_json::to_string_pretty(&r)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!("psnr_mean {:.4} ssim_mean {:.6} over {} pairs", r.psnr_mean, r.ssim_mean, r.per_image.len());
    Ok(())
}

/// Returns whether every check passed, after printing one line per check.
pub fn gradcheck(mut a: GradcheckArgs) -> Result<bool> {
    let f: GradcheckArgs = read_config(a.config.as_deref())?;
    merge!(a, f; layer, net, seed, seeds, samples, corrupt);
    if a.layer.is_some() && a.net.is_some() {
        return Err(invalid!("--layer and --net are exclusive"));
    }
    let pick = |name: Option<&str>, all: &[&'static str], kind: &str| -> Result<Vec<&'static str>> {
        match name {
            None | Some("all") => Ok(all.to_vec()),
            Some(n) => all.iter().find(|&&x| x == n).map(|&x| vec![x]).ok_or_else(|| invalid!("unknown {kind} {n:?}; expected one of {all:?} or all")),
        }
    };
    let (layers, nets) = match (&a.layer, &a.net) {
        (Some(l), None) => (pick(Some(l), LAYERS, "layer")?, vec![]),
        (None, Some(n)) => (vec![], pick(Some(n), NETS, "network")?),
        _ => (LAYERS.to_vec(), NETS.to_vec()),
    };
    let first = a.seed.unwrap_or(0);
    let seeds = a.seeds.unwrap_or(1);
    if seeds == 0 {
        return Err(invalid!("--seeds must be positive"));
    }
    let corrupt = a.corrupt.unwrap_or(1.0);
    let mut ok = true;
    for seed in first..first + seeds {
        for name in &layers {
            let opts = GradCheckOptions { seed, corrupt_factor: corrupt, samples_per_tensor: a.samples.unwrap_or(12), ..Default::default() };
            let worst = max_error(&check_named_layer::<f64>(name, &opts)?);
            ok &= report_line("layer", name, seed, worst, LAYER_TOLERANCE);
        }
        for name in &nets {
            let opts = GradCheckOptions { seed, corrupt_factor: corrupt, samples_per_tensor: a.samples.unwrap_or(2), adaptive: true, step: NET_STEP };
            let worst = max_error(&check_named_net::<f64>(name, &opts)?);
            ok &= report_line("net", name, seed, worst, NET_TOLERANCE);
        }
    }
    Ok(ok)
}

fn report_line(kind: &str, name: &str, seed: u64, worst: f64, tol: f64) -> bool {
    let pass = worst < tol;
    println!("{} {kind} {name} seed {seed}: max rel err {worst:.3e} (tol {tol:.0e})", if pass { "PASS" } else { "FAIL" });
    pass
}

pub fn kernel_cmd(mut a: KernelArgs) -> Result<()> {
    let f: KernelArgs = read_config(a.config.as_deref())?;
    merge!(a, f; kind, radius, size, steps, seed, out);
    let k = match required(a.kind, "kind")?.as_str() {
        "disk" => disk_kernel(required(a.radius, "radius")?)?,
        "motion" => motion_kernel(required(a.size, "size")?, a.steps.unwrap_or(MOTION_STEPS), a.seed.unwrap_or(0))?,
        other => return Err(invalid!("unknown kernel kind {other:?}; expected disk or motion")),
    };
    match &a.out {
        Some(p) => {
            check_output(p, a.force)?;
            kernel::write_kernel(&k, p)?;
        }
        None => println!("{}", serde_json::to_string(&kernel::KernelFile::from(&k))?),
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Infer(a) => infer(a),
        Command::Filter(a) => filter(a),
        Command::Eval(a) => eval(a),
        Command::Kernel(a) => kernel_cmd(a),
        Command::Gradcheck(a) => match gradcheck(a) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: gradient check failed");
                return EXIT_RUNTIME;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let mut msg = String::new();
            for (i, cause) in e.chain().enumerate() {
                let _ = write!(msg, "{}{cause}", if i == 0 { "" } else { ": " });
            }
            eprintln!("error: {msg}");
            exit_code(&e)
        }
    }
}
