//! Raw restoration branch: packed Bayer planes to a linear RGB image at
//! the output resolution.

use alloc::format;

use crate::error::{bail, Result};
use crate::nn::{concat_channels, split_channels, Conv2d, ConvTranspose2d, DcaBlock, Layer, LeakyRelu, ParamStore, PixelShuffle, Tensor, LEAKY_SLOPE};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::NetConfig;

/// Output of [`RestorationNet::forward`].
#[derive(Debug, Clone)]
pub struct Restored<T> {
    /// Linear RGB estimate, `(N, 3, factor*h, factor*w)`.
    pub lin: Tensor<T>,
    /// Merged features at half the packed resolution.
    pub f_s1: Tensor<T>,
    /// Merged features at the packed resolution.
    pub f_s2: Tensor<T>,
}

pub struct RestorationNet<T> {
    width: usize,
    factor: usize,
    low: Conv2d<T>,
    blocks: [DcaBlock<T>; 4],
    down: [Conv2d<T>; 2],
    down_act: [LeakyRelu<T>; 2],
    up: [ConvTranspose2d<T>; 2],
    up_act: [LeakyRelu<T>; 2],
    merge: [Conv2d<T>; 2],
    merge_act: [LeakyRelu<T>; 2],
    recon: Conv2d<T>,
    shuffle: PixelShuffle,
}

impl<T: Scalar> RestorationNet<T> {
    /// Parameters are registered under `name`.
    pub fn new(ps: &mut ParamStore<T>, name: &str, cfg: &NetConfig, rng: &mut Rng) -> Result<Self> {
        let c = cfg.width;
        let factor = 2 * cfg.scale;
        let act = || LeakyRelu::new(LEAKY_SLOPE);
        let dca = |ps: &mut ParamStore<T>, i: usize, ch: usize, rng: &mut Rng| {
            DcaBlock::new(ps, &format!("{name}.dca{i}"), ch, cfg.growth, cfg.dense_layers, cfg.reduction, LEAKY_SLOPE, rng)
        };
        let low = Conv2d::same3(ps, &format!("{name}.low"), 4, c, rng);
        let b1 = dca(ps, 1, c, rng)?;
        let d1 = Conv2d::new(ps, &format!("{name}.down1"), c, 2 * c, 3, 2, 1, rng);
        let b2 = dca(ps, 2, 2 * c, rng)?;
        let d2 = Conv2d::new(ps, &format!("{name}.down2"), 2 * c, 4 * c, 3, 2, 1, rng);
        let b3 = dca(ps, 3, 4 * c, rng)?;
        let u1 = ConvTranspose2d::up2(ps, &format!("{name}.up1"), 4 * c, 2 * c, rng);
        let m1 = Conv2d::same3(ps, &format!("{name}.merge1"), 4 * c, 2 * c, rng);
        let b4 = dca(ps, 4, 2 * c, rng)?;
        let u2 = ConvTranspose2d::up2(ps, &format!("{name}.up2"), 2 * c, c, rng);
        let m2 = Conv2d::same3(ps, &format!("{name}.merge2"), 2 * c, c, rng);
        let recon = Conv2d::same3(ps, &format!("{name}.recon"), c, 3 * factor * factor, rng);
        Ok(Self {
            width: c,
            factor,
            low,
            blocks: [b1, b2, b3, b4],
            down: [d1, d2],
            down_act: [act(), act()],
            up: [u1, u2],
            up_act: [act(), act()],
            merge: [m1, m2],
            merge_act: [act(), act()],
            recon,
            shuffle: PixelShuffle { factor },
        })
    }

    /// Upscaling from packed to output resolution.
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Restored<T>> {
        let (_, c, h, w) = x.dims4()?;
        if c != 4 || h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
            bail!(InvalidDimensions, "restoration input must be (N, 4, H, W) with H, W divisible by 4, got {:?}", x.shape());
        }
        let f_low = self.low.forward(ps, x)?;
        let b1 = self.blocks[0].forward(ps, &f_low)?;
        let d1 = self.down_act[0].forward(ps, &self.down[0].forward(ps, &b1)?)?;
        let b2 = self.blocks[1].forward(ps, &d1)?;
        let d2 = self.down_act[1].forward(ps, &self.down[1].forward(ps, &b2)?)?;
        let b3 = self.blocks[2].forward(ps, &d2)?;
        let u1 = self.up_act[0].forward(ps, &self.up[0].forward(ps, &b3)?)?;
        let f_s1 = self.merge_act[0].forward(ps, &self.merge[0].forward(ps, &concat_channels(&[&u1, &b2])?)?)?;
        let b4 = self.blocks[3].forward(ps, &f_s1)?;
        let u2 = self.up_act[1].forward(ps, &self.up[1].forward(ps, &b4)?)?;
        let f_s2 = self.merge_act[1].forward(ps, &self.merge[1].forward(ps, &concat_channels(&[&u2, &b1])?)?)?;
        let lin = self.shuffle.forward(ps, &self.recon.forward(ps, &f_s2)?)?;
        Ok(Restored { lin, f_s1, f_s2 })
    }

    /// Backward pass of the last forward. Feature gradients coming from the
    /// color branch are optional. Returns the input gradient.
    pub fn backward(
        &mut self,
        ps: &mut ParamStore<T>,
        d_lin: &Tensor<T>,
        d_f_s1: Option<&Tensor<T>>,
        d_f_s2: Option<&Tensor<T>>,
    ) -> Result<Tensor<T>> {
        let c = self.width;
        let d = Layer::<T>::backward(&mut self.shuffle, ps, d_lin)?;
        let mut d_fs2 = self.recon.backward(ps, &d)?;
        if let Some(g) = d_f_s2 {
            d_fs2.add_assign(g)?;
        }
        let d = self.merge_act[1].backward(ps, &d_fs2)?;
        let d = self.merge[1].backward(ps, &d)?;
        let mut parts = split_channels(&d, &[c, c])?;
        let d_b1_skip = parts.pop().expect("two parts");
        let d_u2 = parts.pop().expect("two parts");
        let d = self.up_act[1].backward(ps, &d_u2)?;
        let d = self.up[1].backward(ps, &d)?;
        let mut d_fs1 = self.blocks[3].backward(ps, &d)?;
        if let Some(g) = d_f_s1 {
            d_fs1.add_assign(g)?;
        }
        let d = self.merge_act[0].backward(ps, &d_fs1)?;
        let d = self.merge[0].backward(ps, &d)?;
        let mut parts = split_channels(&d, &[2 * c, 2 * c])?;
        let d_b2_skip = parts.pop().expect("two parts");
        let d_u1 = parts.pop().expect("two parts");
        let d = self.up_act[0].backward(ps, &d_u1)?;
        let d = self.up[0].backward(ps, &d)?;
        let d = self.blocks[2].backward(ps, &d)?;
        let d = self.down_act[1].backward(ps, &d)?;
        let mut d_b2 = self.down[1].backward(ps, &d)?;
        d_b2.add_assign(&d_b2_skip)?;
        let d = self.blocks[1].backward(ps, &d_b2)?;
        let d = self.down_act[0].backward(ps, &d)?;
        let mut d_b1 = self.down[0].backward(ps, &d)?;
        d_b1.add_assign(&d_b1_skip)?;
        let d = self.blocks[0].backward(ps, &d_b1)?;
        self.low.backward(ps, &d)
    }
}
