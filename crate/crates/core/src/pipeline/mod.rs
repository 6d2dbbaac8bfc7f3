//! Dataset synthesis, training, patched inference and quality metrics.

mod metrics;
mod patch;
mod synth;
mod train;

pub use metrics::{gaussian_window, psnr, ssim, MetricImage, PSNR_CAP, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use patch::{infer_patched, infer_patched_linear, tile_starts, SrModel, DEFAULT_OVERLAP, DEFAULT_PATCH};
pub use synth::{degrade_to_raw, synthesize_sample, synthesize_with, Provenance, SampleQuad, Source, SynthConfig};
pub use train::{evaluate_l1, train, LossRecord, TrainSchedule};
