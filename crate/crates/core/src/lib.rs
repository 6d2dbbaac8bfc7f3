//! Real-scene raw-image super-resolution.
//!
//! This crate holds every numerical piece of the system and needs only
//! `alloc`: image containers, the simulated camera (blur, noise, Bayer
//! sampling, ISP development), the guided-filter color-correction family,
//! a small CNN engine with hand-written backward passes, the two-branch
//! network, and the training / patched-inference / metrics pipeline.
//!
//! File formats, configuration files and the command-line front end live in
//! the `rawsr` companion crate.

#![no_std]

extern crate alloc;

pub mod bayer;
pub mod degrade;
pub mod error;
pub mod guided;
pub mod image;
pub mod isp;
pub mod nets;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use image::{BayerImage, BayerPattern, ColorImage, LinearImage, Plane};
