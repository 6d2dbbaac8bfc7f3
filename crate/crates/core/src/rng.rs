//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 keystream keyed by a
//! 64-bit seed. Independent consumers are separated by the ChaCha stream id:
//!
//! ```text
//! stream = (sample_index << 8) | stage
//! ```
//!
//! so the draws for sample `i`, stage `s` never depend on how many other
//! samples were generated first or on which thread generated them.
//! Per-element draws (sensor noise) additionally seek the keystream to a
//! fixed word position per element, see [`ElementStream`].

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Consumers of randomness, each owning a disjoint keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stage {
    Defocus = 1,
    Motion = 2,
    NoiseParams = 3,
    Noise = 4,
    Isp = 5,
    Init = 6,
    Batch = 7,
    Crop = 8,
}

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn stage_rng(seed: u64, sample: u64, stage: Stage) -> Rng {
    stream(seed, (sample << 8) | stage as u64)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn uniform(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[lo, hi]`.
pub fn uniform_in(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal draw (Box-Muller, cosine branch) consuming two `u64`s.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    // 1 - u keeps the log argument in (0, 1].
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Random access to per-element normal deviates.
///
/// Element `i` owns ChaCha words `[4i, 4i + 4)` of its stream, so any
/// contiguous range of elements can be produced independently.
pub struct ElementStream {
    rng: Rng,
}

impl ElementStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { rng: stream(seed, stream_id) }
    }

    /// Fills `out` with the normal deviates of elements `start..start + out.len()`.
    pub fn normals(&mut self, start: usize, out: &mut [f64]) {
        self.rng.set_word_pos(4 * start as u128);
        for v in out.iter_mut() {
            *v = standard_normal(&mut self.rng);
        }
    }
}
