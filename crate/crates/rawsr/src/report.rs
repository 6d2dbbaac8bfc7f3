//! Evaluation pairs and the metrics report.
//!
//! A pairs manifest holds one `{"output": ..., "target": ...}` object per
//! line; relative paths resolve against the manifest directory.

use std::fs;
use std::path::Path;

use anyhow::Result;
use rawsr_core::pipeline::{psnr, ssim};
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::imageio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub output: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub output: String,
    pub target: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub per_image: Vec<ImageScore>,
}

pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    let text = fs::read_to_string(path).map_err(|e| invalid!("{}: {e}", path.display()))?;
    let pairs = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| invalid!("{}:{}: {e}", path.display(), n + 1)))
        .collect::<Result<Vec<Pair>>>()?;
    if pairs.is_empty() {
        return Err(invalid!("{}: no pairs", path.display()));
    }
    Ok(pairs)
}

/// Scores every pair; 8-bit images are compared on the `[0, 1]` scale.
pub fn evaluate(pairs_manifest: &Path) -> Result<Report> {
    let dir = pairs_manifest.parent().unwrap_or(Path::new(""));
    let mut per_image = Vec::new();
    for p in read_pairs(pairs_manifest)? {
        let a = imageio::load_rgb(&dir.join(&p.output))?;
        let b = imageio::load_rgb(&dir.join(&p.target))?;
        per_image.push(ImageScore { psnr: psnr(&a, &b)?, ssim: ssim(&a, &b)?, output: p.output, target: p.target });
    }
    let n = per_image.len() as f64;
    Ok(Report {
        psnr_mean: per_image.iter().map(|s| s.psnr).sum::<f64>() / n,
        ssim_mean: per_image.iter().map(|s| s.ssim).sum::<f64>() / n,
        per_image,
    })
}
