//! TransformField dumps: a JSON header plus a flat little-endian f32 blob
//! holding every 3x3 matrix (row-major, pixel-major) followed by every bias.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rawsr_core::guided::TransformField;
use serde::{Deserialize, Serialize};

use crate::error::invalid;

pub const DTYPE: &str = "f32-le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub height: usize,
    pub width: usize,
    pub dtype: String,
    pub a_shape: [usize; 4],
    pub b_shape: [usize; 3],
    /// Byte offset of the biases inside the blob.
    pub b_offset: usize,
    /// Blob file name, relative to the header.
    pub data: String,
}

/// Blob written next to `header`: `field.json` pairs with `field.bin`.
pub fn blob_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

pub fn write_field(field: &TransformField, header: &Path) -> Result<()> {
    let (h, w) = (field.height(), field.width());
    let blob = blob_path(header);
    let mut bytes = Vec::with_capacity(4 * 12 * h * w);
    bytes.extend(field.matrices().iter().chain(field.biases()).flat_map(|v| v.to_le_bytes()));
    fs::write(&blob, bytes).with_context(|| format!("writing {}", blob.display()))?;
    let head = FieldHeader {
        height: h,
        width: w,
        dtype: DTYPE.into(),
        a_shape: [h, w, 3, 3],
        b_shape: [h, w, 3],
        b_offset: 4 * 9 * h * w,
        data: blob.file_name().expect("has a file name").to_string_lossy().into_owned(),
    };
    fs::write(header, serde_json::to_string_pretty(&head)? + "\n").with_context(|| format!("writing {}", header.display()))
}

pub fn read_field(header: &Path) -> Result<TransformField> {
    let text = fs::read_to_string(header).map_err(|e| invalid!("{}: {e}", header.display()))?;
    let head: FieldHeader = serde_json::from_str(&text).map_err(|e| invalid!("{}: {e}", header.display()))?;
    let (h, w) = (head.height, head.width);
    if head.dtype != DTYPE || head.a_shape != [h, w, 3, 3] || head.b_shape != [h, w, 3] || head.b_offset != 36 * h * w {
        return Err(invalid!("{}: inconsistent field header", header.display()));
    }
    let blob = header.parent().unwrap_or(Path::new("")).join(&head.data);
    let bytes = fs::read(&blob).map_err(|e| invalid!("{}: {e}", blob.display()))?;
    if bytes.len() != 48 * h * w {
        return Err(invalid!("{}: {} bytes, expected {}", blob.display(), bytes.len(), 48 * h * w));
    }
    let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let (a, b) = values.split_at(9 * h * w);
    Ok(TransformField::new(h, w, a.to_vec(), b.to_vec())?)
}
