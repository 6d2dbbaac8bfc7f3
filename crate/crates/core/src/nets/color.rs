//! Color-correction branch: reference image (plus optional restoration
//! features) to a per-pixel transform head at the output resolution.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::nn::{concat_channels, split_channels, AvgPool2, Conv2d, ConvTranspose2d, Layer, LeakyRelu, ParamStore, Tensor, LEAKY_SLOPE};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::field::HEAD_CHANNELS;
use super::NetConfig;

/// Gradients leaving [`ColorNet::backward`].
#[derive(Debug, Clone)]
pub struct ColorGrads<T> {
    pub reference: Tensor<T>,
    pub f_s1: Option<Tensor<T>>,
    pub f_s2: Option<Tensor<T>>,
}

pub struct ColorNet<T> {
    widths: [usize; 3],
    enc: [Conv2d<T>; 3],
    enc_act: [LeakyRelu<T>; 3],
    pool: [AvgPool2; 3],
    up: Vec<ConvTranspose2d<T>>,
    up_act: Vec<LeakyRelu<T>>,
    dec: Vec<Conv2d<T>>,
    dec_act: Vec<LeakyRelu<T>>,
    fuse: [Conv2d<T>; 2],
    head: Conv2d<T>,
    fused: bool,
}

impl<T: Scalar> ColorNet<T> {
    /// The fusion projections expect the restoration widths of `cfg`.
    pub fn new(ps: &mut ParamStore<T>, name: &str, cfg: &NetConfig, rng: &mut Rng) -> Result<Self> {
        let [e1, e2, e3] = cfg.color_widths;
        let c = cfg.width;
        let act = || LeakyRelu::new(LEAKY_SLOPE);
        let enc = [
            Conv2d::same3(ps, &format!("{name}.enc1"), 3, e1, rng),
            Conv2d::same3(ps, &format!("{name}.enc2"), e1, e2, rng),
            Conv2d::same3(ps, &format!("{name}.enc3"), e2, e3, rng),
        ];
        let extra = match cfg.scale {
            2 => 1,
            4 => 2,
            s => bail!(InvalidParameter, "unsupported scale {s}; expected 2 or 4"),
        };
        // (input, skip, output) widths of every decoder stage.
        let mut stages = alloc::vec![(e3, e3, e2), (e2, e2, e1), (e1, e1, e1)];
        stages.extend(core::iter::repeat_n((e1, 0, e1), extra));
        let mut up = Vec::new();
        let mut dec = Vec::new();
        for (i, &(cin, skip, cout)) in stages.iter().enumerate() {
            up.push(ConvTranspose2d::up2(ps, &format!("{name}.up{}", i + 1), cin, cin, rng));
            dec.push(Conv2d::same3(ps, &format!("{name}.dec{}", i + 1), cin + skip, cout, rng));
        }
        let fuse = [
            Conv2d::pointwise(ps, &format!("{name}.fuse1"), 2 * c, 2 * e3, rng),
            Conv2d::pointwise(ps, &format!("{name}.fuse2"), c, 2 * e2, rng),
        ];
        let head = Conv2d::same3(ps, &format!("{name}.head"), e1, HEAD_CHANNELS, rng);
        Ok(Self {
            widths: cfg.color_widths,
            enc,
            enc_act: [act(), act(), act()],
            pool: [AvgPool2::new(), AvgPool2::new(), AvgPool2::new()],
            up_act: stages.iter().map(|_| act()).collect(),
            dec_act: stages.iter().map(|_| act()).collect(),
            up,
            dec,
            fuse,
            head,
            fused: false,
        })
    }

    /// Output resolution relative to the reference.
    pub fn factor(&self) -> usize {
        1 << (self.up.len() - 3)
    }

    /// `features` are the restoration features `(F_s1, F_s2)` at a quarter
    /// and half of the reference resolution; `None` runs without fusion.
    pub fn forward(&mut self, ps: &ParamStore<T>, reference: &Tensor<T>, features: Option<(&Tensor<T>, &Tensor<T>)>) -> Result<Tensor<T>> {
        let (n, c, h, w) = reference.dims4()?;
        if c != 3 || h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
            bail!(InvalidDimensions, "reference must be (N, 3, H, W) with H, W divisible by 8, got {:?}", reference.shape());
        }
        let mut fused = [None, None];
        if let Some((f1, f2)) = features {
            for (k, (f, div)) in [(f1, 4), (f2, 2)].into_iter().enumerate() {
                let (fn_, _, fh, fw) = f.dims4()?;
                if (fn_, fh * div, fw * div) != (n, h, w) {
                    bail!(ShapeMismatch, "fusion features {:?} do not sit at 1/{div} of reference {:?}", f.shape(), reference.shape());
                }
                fused[k] = Some(self.fuse[k].forward(ps, f)?);
            }
        }
        self.fused = features.is_some();

        let mut skips = Vec::with_capacity(3);
        let mut x = reference.clone();
        for i in 0..3 {
            let e = self.enc_act[i].forward(ps, &self.enc[i].forward(ps, &x)?)?;
            x = Layer::<T>::forward(&mut self.pool[i], ps, &e)?;
            skips.push(e);
        }
        for i in 0..self.up.len() {
            let u = self.up_act[i].forward(ps, &self.up[i].forward(ps, &x)?)?;
            let g = if i < 3 {
                let mut g = concat_channels(&[&u, &skips[2 - i]])?;
                if i < 2 {
                    if let Some(f) = &fused[i] {
                        g.add_assign(f)?;
                    }
                }
                g
            } else {
                u
            };
            x = self.dec_act[i].forward(ps, &self.dec[i].forward(ps, &g)?)?;
        }
        self.head.forward(ps, &x)
    }

    pub fn backward(&mut self, ps: &mut ParamStore<T>, d_head: &Tensor<T>) -> Result<ColorGrads<T>> {
        let mut d = self.head.backward(ps, d_head)?;
        let mut d_skips: [Option<Tensor<T>>; 3] = [None, None, None];
        let mut d_features = [None, None];
        for i in (0..self.up.len()).rev() {
            let dg = self.dec_act[i].backward(ps, &d)?;
            let dg = self.dec[i].backward(ps, &dg)?;
            let du = if i < 3 {
                if i < 2 && self.fused {
                    d_features[i] = Some(self.fuse[i].backward(ps, &dg)?);
                }
                let width = self.widths[2 - i];
                let mut parts = split_channels(&dg, &[width, width])?;
                d_skips[2 - i] = parts.pop();
                parts.pop().expect("two parts")
            } else {
                dg
            };
            let du = self.up_act[i].backward(ps, &du)?;
            d = self.up[i].backward(ps, &du)?;
        }
        for i in (0..3).rev() {
            let mut de = Layer::<T>::backward(&mut self.pool[i], ps, &d)?;
            de.add_assign(d_skips[i].as_ref().expect("every encoder level has a skip"))?;
            let de = self.enc_act[i].backward(ps, &de)?;
            d = self.enc[i].backward(ps, &de)?;
        }
        let [f_s1, f_s2] = d_features;
        Ok(ColorGrads { reference: d, f_s1, f_s2 })
    }
}
