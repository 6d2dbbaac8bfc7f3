//! On-disk datasets: sample images under `samples/` and a JSON-lines
//! manifest with one record per sample.
//!
//! Per sample `i` the files are `samples/{i:05}_raw.pgm` (16-bit mosaic with
//! its pattern sidecar), `_ref.png` (8-bit developed reference), `_lin.png`
//! (16-bit clean linear image) and `_gt.png` (8-bit developed ground truth).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rawsr_core::pipeline::{synthesize_sample, Provenance, SampleQuad, Source, SynthConfig};
use rawsr_core::LinearImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::imageio::{self, Image};

pub const MANIFEST: &str = "manifest.jsonl";
pub const SAMPLES: &str = "samples";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    /// Source file name the sample was cut from.
    pub source: String,
    /// Paths relative to the manifest directory.
    pub raw: String,
    pub reference: String,
    pub linear: String,
    pub ground_truth: String,
    pub provenance: Provenance,
}

/// Source images of a directory in file-name order. Sidecars are skipped.
pub fn list_sources(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(invalid!("source directory {} does not exist", dir.display()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pgm")));
    files.sort();
    if files.is_empty() {
        return Err(invalid!("no PNG or PGM sources in {}", dir.display()));
    }
    Ok(files)
}

/// Clean linear image of a source file, cropped at the top-left to the
/// largest size a sample at `factor` accepts.
pub fn load_source(path: &Path, factor: usize) -> Result<LinearImage> {
    let lin = match imageio::load_image(path)? {
        Image::Linear(i) => Source::Linear(i),
        Image::Bayer(b) => Source::Raw(b),
        Image::Color(_) => return Err(invalid!("{}: 8-bit sources are display-referred; use 16-bit linear PNG or Bayer data", path.display())),
    }
    .linear()?;
    let m = 2 * factor;
    let (h, w) = (lin.height() / m * m, lin.width() / m * m);
    if h == 0 || w == 0 {
        return Err(invalid!("{}: source smaller than {m}x{m}", path.display()));
    }
    Ok(lin.crop(0, 0, w, h)?)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn write_sample(out_dir: &Path, quad: &SampleQuad, source: &str) -> Result<Record> {
    let id = format!("{:05}", quad.provenance.index);
    let rel = |suffix: &str| format!("{SAMPLES}/{id}_{suffix}");
    let rec = Record {
        id: id.clone(),
        source: source.into(),
        raw: rel("raw.pgm"),
        reference: rel("ref.png"),
        linear: rel("lin.png"),
        ground_truth: rel("gt.png"),
        provenance: quad.provenance,
    };
    imageio::save_bayer(&quad.x_raw, &out_dir.join(&rec.raw))?;
    imageio::save_color(&quad.x_ref, &out_dir.join(&rec.reference))?;
    imageio::save_linear(&quad.x_lin, &out_dir.join(&rec.linear))?;
    imageio::save_color(&quad.x_gt, &out_dir.join(&rec.ground_truth))?;
    Ok(rec)
}

/// Synthesizes `count` samples, cycling through the sources, on `jobs`
/// threads. The manifest is written last, through a temporary file, so a
/// failed run never leaves one behind. Output does not depend on `jobs`.
pub fn synthesize_dataset(src_dir: &Path, out_dir: &Path, count: usize, seed: u64, cfg: &SynthConfig, jobs: usize) -> Result<Vec<Record>> {
    cfg.validate()?;
    if count == 0 {
        return Err(invalid!("--count must be positive"));
    }
    let files = list_sources(src_dir)?;
    let sources = files.iter().map(|p| load_source(p, cfg.factor)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir.join(SAMPLES)).with_context(|| format!("creating {}", out_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let records = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let k = i % sources.len();
                let quad = synthesize_sample(&Source::Linear(sources[k].clone()), seed, i as u64, cfg)?;
                write_sample(out_dir, &quad, &file_name(&files[k]))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut text = String::new();
    for r in &records {
        text += &serde_json::to_string(r)?;
        text.push('\n');
    }
    let tmp = out_dir.join(format!("{MANIFEST}.partial"));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, out_dir.join(MANIFEST))?;
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path).map_err(|e| invalid!("{}: {e}", path.display()))?;
    let records = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| invalid!("{}:{}: {e}", path.display(), n + 1)))
        .collect::<Result<Vec<Record>>>()?;
    if records.is_empty() {
        return Err(invalid!("{}: empty manifest", path.display()));
    }
    Ok(records)
}

/// Loads every sample of a manifest back into memory.
pub fn load_dataset(manifest: &Path) -> Result<Vec<SampleQuad>> {
    let dir = manifest.parent().unwrap_or(Path::new(""));
    read_manifest(manifest)?
        .into_iter()
        .map(|r| {
            let quad = SampleQuad {
                x_raw: imageio::load_bayer(&dir.join(&r.raw))?,
                x_ref: imageio::load_color(&dir.join(&r.reference))?,
                x_lin: imageio::load_linear(&dir.join(&r.linear))?,
                x_gt: imageio::load_color(&dir.join(&r.ground_truth))?,
                provenance: r.provenance,
            };
            quad.validate().with_context(|| format!("sample {}", r.id))?;
            Ok(quad)
        })
        .collect()
}
