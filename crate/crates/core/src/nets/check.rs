//! Gradient checks of the branches and of the composed model at toy widths.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::nn::gradcheck::{check, random_tensor, GradCheckOptions, GradReport, Objective};
use crate::nn::{ParamId, ParamStore, Tensor};
use crate::rng::{self, Stage};
use crate::scalar::Scalar;

use super::{apply_field, apply_field_backward, ColorNet, NetConfig, RestorationNet, COLOR, RESTORATION};

/// Networks known to [`check_named_net`].
pub const NETS: &[&str] = &["restoration", "color", "model", "model-4x"];

/// Starting step for adaptive checks of whole networks. Attention weights
/// deep in the restoration branch have gradients near 1e-6, which narrower
/// steps bury in rounding noise.
pub const NET_STEP: f64 = 1e-4;

struct RestorationLoss<T> {
    net: RestorationNet<T>,
    r: [Tensor<T>; 3],
}

impl<T: Scalar> Objective<T> for RestorationLoss<T> {
    fn value(&mut self, ps: &ParamStore<T>, inputs: &[Tensor<T>]) -> Result<T> {
        let out = self.net.forward(ps, &inputs[0])?;
        Ok(out.lin.dot(&self.r[0])? + out.f_s1.dot(&self.r[1])? + out.f_s2.dot(&self.r[2])?)
    }

    fn gradients(&mut self, ps: &mut ParamStore<T>, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>)> {
        let v = self.value(ps, inputs)?;
        let dx = self.net.backward(ps, &self.r[0], Some(&self.r[1]), Some(&self.r[2]))?;
        Ok((v, alloc::vec![dx]))
    }
}

struct ColorLoss<T> {
    net: ColorNet<T>,
    r: Tensor<T>,
}

impl<T: Scalar> Objective<T> for ColorLoss<T> {
    fn value(&mut self, ps: &ParamStore<T>, inputs: &[Tensor<T>]) -> Result<T> {
        self.net.forward(ps, &inputs[0], Some((&inputs[1], &inputs[2])))?.dot(&self.r)
    }

    fn gradients(&mut self, ps: &mut ParamStore<T>, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>)> {
        let v = self.value(ps, inputs)?;
        let g = self.net.backward(ps, &self.r)?;
        let (Some(f1), Some(f2)) = (g.f_s1, g.f_s2) else {
            bail!(InvalidParameter, "color branch returned no feature gradients");
        };
        Ok((v, alloc::vec![g.reference, f1, f2]))
    }
}

struct ModelLoss<T> {
    restoration: RestorationNet<T>,
    color: ColorNet<T>,
    r: Tensor<T>,
    cache: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> Objective<T> for ModelLoss<T> {
    fn value(&mut self, ps: &ParamStore<T>, inputs: &[Tensor<T>]) -> Result<T> {
        let restored = self.restoration.forward(ps, &inputs[0])?;
        let head = self.color.forward(ps, &inputs[1], Some((&restored.f_s1, &restored.f_s2)))?;
        let v = apply_field(&restored.lin, &head)?.dot(&self.r)?;
        self.cache = Some((restored.lin, head));
        Ok(v)
    }

    fn gradients(&mut self, ps: &mut ParamStore<T>, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>)> {
        let v = self.value(ps, inputs)?;
        let (lin, head) = self.cache.take().expect("set by value");
        let (d_lin, d_head) = apply_field_backward(&lin, &head, &self.r)?;
        let g = self.color.backward(ps, &d_head)?;
        let d_packed = self.restoration.backward(ps, &d_lin, g.f_s1.as_ref(), g.f_s2.as_ref())?;
        Ok((v, alloc::vec![d_packed, g.reference]))
    }
}

/// Checks a toy-width network on an 8x8 packed raw / 16x16 reference input.
/// Weights, inputs and projections all derive from `opts.seed`.
///
/// `restoration` and `color` check one branch with its fusion features as
/// free inputs; `model` and `model-4x` check the composed model.
pub fn check_named_net<T: Scalar>(name: &str, opts: &GradCheckOptions) -> Result<Vec<GradReport>> {
    let cfg = match name {
        "model-4x" => NetConfig::toy().with_scale(4),
        n if NETS.contains(&n) => NetConfig::toy(),
        _ => bail!(InvalidParameter, "unknown network {name:?}; expected one of {NETS:?}"),
    };
    let mut init = rng::stage_rng(opts.seed, 0, Stage::Init);
    let mut data = rng::stream(opts.seed, 0x6e65_7473);
    let mut ps = ParamStore::<T>::new();
    let c = cfg.width;
    let packed = random_tensor::<T>(&[1, 4, 8, 8], &mut data);
    let reference = random_tensor::<T>(&[1, 3, 16, 16], &mut data).map(|v| T::of(0.5) + T::of(0.5) * v);
    let all = |ps: &ParamStore<T>| -> Vec<ParamId> { ps.ids().collect() };
    match name {
        "restoration" => {
            let net = RestorationNet::new(&mut ps, RESTORATION, &cfg, &mut init)?;
            let side = 2 * 8 * cfg.scale;
            let r = [
                random_tensor(&[1, 3, side, side], &mut data),
                random_tensor(&[1, 2 * c, 4, 4], &mut data),
                random_tensor(&[1, c, 8, 8], &mut data),
            ];
            let ids = all(&ps);
            check(&mut RestorationLoss { net, r }, &mut ps, &mut [packed], &ids, opts)
        }
        "color" => {
            let net = ColorNet::new(&mut ps, COLOR, &cfg, &mut init)?;
            let f1 = random_tensor(&[1, 2 * c, 4, 4], &mut data);
            let f2 = random_tensor(&[1, c, 8, 8], &mut data);
            let side = 16 * cfg.scale;
            let r = random_tensor(&[1, super::HEAD_CHANNELS, side, side], &mut data);
            let ids = all(&ps);
            check(&mut ColorLoss { net, r }, &mut ps, &mut [reference, f1, f2], &ids, opts)
        }
        _ => {
            let restoration = RestorationNet::new(&mut ps, RESTORATION, &cfg, &mut init)?;
            let color = ColorNet::new(&mut ps, COLOR, &cfg, &mut init)?;
            let side = 16 * cfg.scale;
            let r = random_tensor(&[1, 3, side, side], &mut data);
            let ids = all(&ps);
            check(&mut ModelLoss { restoration, color, r, cache: None }, &mut ps, &mut [packed, reference], &ids, opts)
        }
    }
}
