//! Checkpoints: a directory with `manifest.json` (names, shapes,
//! hyperparameters) and one flat little-endian f32 file per parameter
//! tensor under `params/`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rawsr_core::nets::{NetConfig, RawSrModel};
use rawsr_core::pipeline::TrainSchedule;
use serde::{Deserialize, Serialize};

use crate::error::invalid;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    /// Model profile name (`toy`, `full`, `toy-4x`, `full-4x`).
    pub model: String,
    pub net: NetConfig,
    /// Training profile the weights came from, if trained.
    pub train_profile: Option<String>,
    pub schedule: Option<TrainSchedule>,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
}

/// Writes `model` into the directory `dir`, which must not exist yet.
pub fn save(dir: &Path, model: &RawSrModel<f32>, model_name: &str, train_profile: Option<&str>, schedule: Option<&TrainSchedule>, seed: u64) -> Result<Manifest> {
    let params = dir.join("params");
    fs::create_dir_all(&params).with_context(|| format!("creating {}", params.display()))?;
    let mut tensors = Vec::new();
    for (name, shape, values) in model.export() {
        let file = format!("params/{name}.f32");
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(dir.join(&file), bytes).with_context(|| format!("writing {file}"))?;
        tensors.push(TensorEntry { name, shape, file });
    }
    let manifest = Manifest {
        format: FORMAT,
        model: model_name.into(),
        net: *model.config(),
        train_profile: train_profile.map(Into::into),
        schedule: schedule.copied(),
        seed,
        tensors,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| invalid!("{}: not a checkpoint ({e})", dir.display()))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| invalid!("{}: {e}", path.display()))?;
    if m.format != FORMAT {
        return Err(invalid!("{}: unsupported checkpoint format {}", path.display(), m.format));
    }
    Ok(m)
}

pub fn load(dir: &Path) -> Result<(Manifest, RawSrModel<f32>)> {
    let m = read_manifest(dir)?;
    let mut model = RawSrModel::new(m.net, m.seed)?;
    let mut tensors = Vec::with_capacity(m.tensors.len());
    for t in &m.tensors {
        let path = dir.join(&t.file);
        let bytes = fs::read(&path).map_err(|e| invalid!("{}: {e}", path.display()))?;
        let expected = 4 * t.shape.iter().product::<usize>();
        if bytes.len() != expected {
            return Err(invalid!("{}: {} bytes, expected {expected}", path.display(), bytes.len()));
        }
        let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        tensors.push((t.name.clone(), t.shape.clone(), values));
    }
    model.import(&tensors).with_context(|| format!("loading {}", dir.display()))?;
    Ok((m, model))
}
