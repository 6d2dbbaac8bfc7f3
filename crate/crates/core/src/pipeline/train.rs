//! Two-phase training: the restoration branch alone against the clean
//! linear image, then the whole model against the developed ground truth.

use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::image::LinearImage;
use crate::nets::{image_tensor, raw_tensor, stack, RawSrModel, ALIGNMENT};
use crate::nn::{l1_loss, Adam, AdamConfig, ParamId, Tensor};
use crate::rng::{self, Rng, Stage};

use super::synth::SampleQuad;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrainSchedule {
    pub phase1_iters: usize,
    pub phase2_iters: usize,
    pub lr0: f64,
    /// Multiplier applied every `decay_every` phase-2 updates during the
    /// first half of phase 2.
    pub decay: f64,
    pub decay_every: usize,
    /// Phase-2 learning rate for the second half.
    pub lr_late: f64,
    pub batch: usize,
    /// Training crop side in output pixels.
    pub patch: usize,
}

impl TrainSchedule {
    pub const PROFILES: [&'static str; 2] = ["paper", "desk"];

    pub fn paper() -> Self {
        Self { phase1_iters: 40_000, phase2_iters: 80_000, lr0: 2e-4, decay: 0.96, decay_every: 2_000, lr_late: 1e-5, batch: 6, patch: 256 }
    }

    pub fn desk() -> Self {
        Self { phase1_iters: 2_000, phase2_iters: 4_000, lr0: 2e-4, decay: 0.96, decay_every: 100, lr_late: 1e-5, batch: 2, patch: 64 }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            _ => bail!(InvalidParameter, "unknown schedule {name:?}; expected one of {:?}", Self::PROFILES),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.patch == 0 || self.decay_every == 0 {
            bail!(InvalidParameter, "batch, patch and decay interval must be positive");
        }
        for (name, v) in [("lr0", self.lr0), ("decay", self.decay), ("lr_late", self.lr_late)] {
            if !(v.is_finite() && v >= 0.0) {
                bail!(InvalidParameter, "{name} must be finite and non-negative, got {v}");
            }
        }
        Ok(())
    }

    /// Learning rate of update `iter` (0-based) in `phase` (1 or 2).
    pub fn lr(&self, phase: u8, iter: usize) -> f64 {
        if phase == 1 {
            self.lr0
        } else if iter < self.phase2_iters / 2 {
            self.lr0 * libm::pow(self.decay, (iter / self.decay_every) as f64)
        } else {
            self.lr_late
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossRecord {
    /// 1-based update index within the phase.
    pub iter: usize,
    pub phase: u8,
    pub lr: f64,
    pub loss: f64,
}

struct Batch {
    packed: Tensor<f32>,
    reference: Tensor<f32>,
    lin: Tensor<f32>,
    gt: Tensor<f32>,
}

/// Random aligned crops of random samples.
struct Sampler<'a> {
    data: &'a [SampleQuad],
    scale: usize,
    raw_patch: (usize, usize),
    rng: Rng,
}

impl<'a> Sampler<'a> {
    fn new(data: &'a [SampleQuad], scale: usize, patch: usize, seed: u64) -> Result<Self> {
        if data.is_empty() {
            bail!(InvalidParameter, "training needs at least one sample");
        }
        if !patch.is_multiple_of(scale * ALIGNMENT) {
            bail!(InvalidParameter, "patch {patch} must be a multiple of {}", scale * ALIGNMENT);
        }
        let (mut h, mut w) = (usize::MAX, usize::MAX);
        for q in data {
            q.validate()?;
            if q.provenance.factor != scale {
                bail!(ShapeMismatch, "sample {} was synthesized for {}x, model is {scale}x", q.provenance.index, q.provenance.factor);
            }
            h = h.min(q.x_raw.height());
            w = w.min(q.x_raw.width());
        }
        let raw_patch = ((patch / scale).min(h / ALIGNMENT * ALIGNMENT), (patch / scale).min(w / ALIGNMENT * ALIGNMENT));
        if raw_patch.0 == 0 || raw_patch.1 == 0 {
            bail!(InvalidDimensions, "samples are smaller than the model alignment {ALIGNMENT}");
        }
        Ok(Self { data, scale, raw_patch, rng: rng::stage_rng(seed, 0, Stage::Batch) })
    }

    fn even_offset(&mut self, room: usize) -> usize {
        let slots = room / 2 + 1;
        2 * ((rng::uniform(&mut self.rng) * slots as f64) as usize).min(slots - 1)
    }

    fn next(&mut self, batch: usize) -> Result<Batch> {
        let (ph, pw) = self.raw_patch;
        let s = self.scale;
        let (mut packed, mut reference, mut lin, mut gt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for _ in 0..batch {
            let q = &self.data[((rng::uniform(&mut self.rng) * self.data.len() as f64) as usize).min(self.data.len() - 1)];
            let y0 = self.even_offset(q.x_raw.height() - ph);
            let x0 = self.even_offset(q.x_raw.width() - pw);
            packed.push(raw_tensor(&q.x_raw.crop(x0, y0, pw, ph)?)?);
            reference.push(image_tensor(&q.x_ref.crop(x0, y0, pw, ph)?.to_linear()));
            lin.push(image_tensor(&q.x_lin.crop(x0 * s, y0 * s, pw * s, ph * s)?));
            gt.push(image_tensor(&q.x_gt.crop(x0 * s, y0 * s, pw * s, ph * s)?.to_linear()));
        }
        Ok(Batch { packed: stack(&packed)?, reference: stack(&reference)?, lin: stack(&lin)?, gt: stack(&gt)? })
    }
}

fn checked(loss: f32, phase: u8, iter: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss as f64)
    } else {
        Err(Error::NonFiniteLoss { phase, iter })
    }
}

/// Runs both phases, calling `on_record` after every update, and returns
/// the full loss log. Batches are drawn from a stream keyed by `seed`.
pub fn train(
    model: &mut RawSrModel<f32>,
    data: &[SampleQuad],
    schedule: &TrainSchedule,
    seed: u64,
    mut on_record: impl FnMut(&LossRecord),
) -> Result<Vec<LossRecord>> {
    schedule.validate()?;
    let mut sampler = Sampler::new(data, model.config().scale, schedule.patch, seed)?;
    let mut log = Vec::with_capacity(schedule.phase1_iters + schedule.phase2_iters);
    let mut record = |log: &mut Vec<LossRecord>, r: LossRecord| {
        on_record(&r);
        log.push(r);
    };

    let restoration: Vec<ParamId> = model.restoration_ids();
    let mut adam = Adam::new(model.params(), restoration, AdamConfig::default());
    for iter in 0..schedule.phase1_iters {
        let b = sampler.next(schedule.batch)?;
        let pred = model.forward_restoration(&b.packed)?;
        let (loss, grad) = l1_loss(&pred, &b.lin)?;
        let loss = checked(loss, 1, iter + 1)?;
        model.params_mut().zero_grad();
        model.backward_restoration(&grad)?;
        let lr = schedule.lr(1, iter);
        adam.step(model.params_mut(), lr)?;
        record(&mut log, LossRecord { iter: iter + 1, phase: 1, lr, loss });
    }

    let all: Vec<ParamId> = model.params().ids().collect();
    let mut adam = Adam::new(model.params(), all, AdamConfig::default());
    for iter in 0..schedule.phase2_iters {
        let b = sampler.next(schedule.batch)?;
        let pred = model.forward(&b.packed, &b.reference)?;
        let (loss, grad) = l1_loss(&pred, &b.gt)?;
        let loss = checked(loss, 2, iter + 1)?;
        model.params_mut().zero_grad();
        model.backward(&grad)?;
        let lr = schedule.lr(2, iter);
        adam.step(model.params_mut(), lr)?;
        record(&mut log, LossRecord { iter: iter + 1, phase: 2, lr, loss });
    }
    Ok(log)
}

/// Mean L1 distance between model output and ground truth over whole samples.
pub fn evaluate_l1(model: &mut RawSrModel<f32>, data: &[SampleQuad]) -> Result<f64> {
    let mut total = 0.0;
    for q in data {
        let out = model.infer(&q.x_raw, &q.x_ref)?.output;
        total += mean_abs_diff(&out, &q.x_gt.to_linear())?;
    }
    Ok(total / data.len().max(1) as f64)
}

fn mean_abs_diff(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        bail!(ShapeMismatch, "cannot compare {}x{} with {}x{}", a.width(), a.height(), b.width(), b.height());
    }
    Ok(a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum::<f64>() / a.data().len() as f64)
}
