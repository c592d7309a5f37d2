use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generator::{push_conv, take_conv};
use super::layers::{instance_norm, sigmoid, Activation, Conv2d};
use super::weights::Parameterized;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const LEAK: f64 = 0.2;

/// Four 4×4 convolutions (strides 2, 2, 1, 1, padding 1) ending in one
/// sigmoid score channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub widths: [usize; 3],
    pub seed: u64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { widths: [16, 32, 64], seed: 1 }
    }
}

impl DiscriminatorConfig {
    pub const KERNEL: usize = 4;
    pub const STRIDES: [usize; 4] = [2, 2, 1, 1];

    /// Input pixels seen by one output score: `r ← (r − 1)·s + k`, last layer first.
    pub fn receptive_field(&self) -> usize {
        Self::STRIDES.iter().rev().fold(1, |r, &s| (r - 1) * s + Self::KERNEL)
    }

    /// Input-pixel step between adjacent scores.
    pub fn total_stride(&self) -> usize {
        Self::STRIDES.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub convs: Vec<Conv2d>,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let chans = [3, config.widths[0], config.widths[1], config.widths[2], 1];
        let convs = (0..4)
            .map(|l| Conv2d::random(DiscriminatorConfig::KERNEL, chans[l], chans[l + 1], DiscriminatorConfig::STRIDES[l], 1, &mut rng))
            .collect();
        Discriminator { config, convs }
    }
}

/// Map of per-patch realness scores in `(0, 1)`.
pub fn patch_discriminator_forward(image: &Tensor, d: &Discriminator) -> Result<Tensor> {
    let (h, w, _) = image.dims3()?;
    let rf = d.config.receptive_field();
    if h < rf || w < rf {
        return Err(Error::Dimension(format!("{h}×{w} image is smaller than the {rf}-pixel receptive field")));
    }
    let act = Activation::LeakyRelu(LEAK);
    let mut z = act.apply(&d.convs[0].forward(image)?);
    for conv in &d.convs[1..3] {
        z = act.apply(&instance_norm(&conv.forward(&z)?)?);
    }
    Ok(sigmoid(&d.convs[3].forward(&z)?))
}

impl Parameterized for Discriminator {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (k, c) in self.convs.iter().enumerate() {
            push_conv(&mut out, &format!("disc.conv{k}"), c);
        }
        out
    }

    fn replace(&mut self, values: Vec<Tensor>) -> Result<()> {
        let mut it = values.into_iter();
        self.convs.iter_mut().try_for_each(|c| take_conv(&mut it, c))
    }
}
