//! Blur kernels as JSON `{"size": k, "weights": [...]}`, row-major.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rawsr_core::degrade::Kernel;
use serde::{Deserialize, Serialize};

use crate::error::invalid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub size: usize,
    pub weights: Vec<f32>,
}

impl From<&Kernel> for KernelFile {
    fn from(k: &Kernel) -> Self {
        Self { size: k.size(), weights: k.weights().to_vec() }
    }
}

impl KernelFile {
    pub fn to_kernel(&self) -> Result<Kernel> {
        Ok(Kernel::new(self.size, self.weights.clone())?)
    }
}

pub fn write_kernel(k: &Kernel, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&KernelFile::from(k))?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_kernel(path: &Path) -> Result<Kernel> {
    let text = fs::read_to_string(path).map_err(|e| invalid!("{}: {e}", path.display()))?;
    let file: KernelFile = serde_json::from_str(&text).map_err(|e| invalid!("{}: {e}", path.display()))?;
    file.to_kernel()
}
