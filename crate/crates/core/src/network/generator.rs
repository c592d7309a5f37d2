use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{Block, BlockCache, BlockConfig, BlockKind};
use super::layers::{instance_norm, instance_norm_vjp, tanh, tanh_vjp, Activation, Conv2d, INIT_RANGE};
use super::weights::Parameterized;
use super::GeneratorConfig;
use crate::attention::{cross_attention, sow_attention, AttentionParams};
use crate::error::{Error, Result};
use crate::geometry::LandmarkSet;
use crate::losses::{mean_abs, mean_abs_vjp};
use crate::tensor::{Differentiable, Tensor};

/// Pyramidal attribute encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub stem: Conv2d,
    pub to_high: Vec<Block>,
    pub high_res: Block,
    pub to_low: Vec<Block>,
    pub low_res: Block,
}

/// Makeup-apply decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub low_res: Block,
    pub low_up: Vec<Block>,
    pub fuse: Conv2d,
    pub high_up: Vec<Block>,
    pub head: Conv2d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub encoder: Encoder,
    pub attn_low: AttentionParams,
    pub attn_high: AttentionParams,
    pub decoder: Decoder,
}

fn block(kind: BlockKind, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Result<Block> {
    Ok(Block::random(BlockConfig::new(kind, cin, cout)?, rng))
}

impl Generator {
    /// Seeded uniform weights in `[−0.08, 0.08]`, zero biases, drawn in
    /// encoder → attention → decoder order.
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (hs, ls) = (config.high_stage(), config.low_stage());
        let w = |s| config.width_at(s);

        let stem = Conv2d::random(3, 3, w(0), 1, 1, &mut rng);
        let to_high = (0..hs).map(|s| block(BlockKind::Down, w(s), w(s + 1), &mut rng)).collect::<Result<_>>()?;
        let high_res = block(BlockKind::Res, w(hs), w(hs), &mut rng)?;
        let to_low = (hs..ls).map(|s| block(BlockKind::Down, w(s), w(s + 1), &mut rng)).collect::<Result<_>>()?;
        let low_res = block(BlockKind::Res, w(ls), w(ls), &mut rng)?;
        let encoder = Encoder { stem, to_high, high_res, to_low, low_res };

        let attn_low = AttentionParams::random(w(ls), config.embed_dim(), INIT_RANGE, &mut rng);
        let attn_high = AttentionParams::random(w(hs), config.embed_dim(), INIT_RANGE, &mut rng);

        let dec_low_res = block(BlockKind::Res, w(ls), w(ls), &mut rng)?;
        let low_up = (hs..ls).rev().map(|s| block(BlockKind::Up, w(s + 1), w(s), &mut rng)).collect::<Result<_>>()?;
        let fuse = Conv2d::random(3, 2 * w(hs), w(hs), 1, 1, &mut rng);
        let high_up = (0..hs).rev().map(|s| block(BlockKind::Up, w(s + 1), w(s), &mut rng)).collect::<Result<_>>()?;
        let head = Conv2d::random(3, w(0), 3, 1, 1, &mut rng);
        let decoder = Decoder { low_res: dec_low_res, low_up, fuse, high_up, head };

        Ok(Generator { config, encoder, attn_low, attn_high, decoder })
    }
}

fn check_image(image: &Tensor, cfg: &GeneratorConfig) -> Result<()> {
    let (h, w, c) = image.dims3()?;
    if h != cfg.resolution || w != cfg.resolution || c != 3 {
        return Err(Error::Config(format!(
            "generator expects {0}×{0}×3 images, got {h}×{w}×{c}",
            cfg.resolution
        )));
    }
    Ok(())
}

/// High- and low-resolution attribute maps `(X_H, X_L)` of an image in `[−1, 1]`.
pub fn faenc_forward(image: &Tensor, g: &Generator) -> Result<(Tensor, Tensor)> {
    check_image(image, &g.config)?;
    let e = &g.encoder;
    let mut z = Activation::Relu.apply(&instance_norm(&e.stem.forward(image)?)?);
    for b in &e.to_high {
        z = b.forward(&z)?;
    }
    let x_high = e.high_res.forward(&z)?;
    let mut z = x_high.clone();
    for b in &e.to_low {
        z = b.forward(&z)?;
    }
    let x_low = e.low_res.forward(&z)?;
    Ok((x_high, x_low))
}

/// Makeup feature maps `(Γ_H, Γ_L)`: Sow-Attention on the high-res maps,
/// full cross-attention on the low-res ones. Landmarks are in image pixels.
#[allow(clippy::too_many_arguments)]
pub fn mtm_forward(
    x_high: &Tensor,
    x_low: &Tensor,
    y_high: &Tensor,
    y_low: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    g: &Generator,
) -> Result<(Tensor, Tensor)> {
    let cfg = &g.config;
    if x_lm.len() != cfg.landmarks || y_lm.len() != cfg.landmarks {
        return Err(Error::Landmarks(format!(
            "generator expects {} landmarks, got {} and {}",
            cfg.landmarks,
            x_lm.len(),
            y_lm.len()
        )));
    }
    let (hh, ll) = (cfg.high_extent(), cfg.low_extent());
    let gamma_high =
        sow_attention(x_high, y_high, &x_lm.rescaled(hh, hh)?, &y_lm.rescaled(hh, hh)?, cfg.window, &g.attn_high)?;
    let gamma_low = cross_attention(x_low, y_low, &x_lm.rescaled(ll, ll)?, &y_lm.rescaled(ll, ll)?, &g.attn_low)?;
    Ok((gamma_high, gamma_low))
}

/// Intermediates of one decoder pass.
#[derive(Debug, Clone)]
pub struct DecoderTrace {
    low_res: BlockCache,
    low_up: Vec<BlockCache>,
    low_channels: usize,
    fuse_in_shape: Vec<usize>,
    fuse_pre: Tensor,
    fuse_post: Tensor,
    high_up: Vec<BlockCache>,
    head_in_shape: Vec<usize>,
    output: Tensor,
}

fn decode(x_high: &Tensor, x_low: &Tensor, gamma_high: &Tensor, gamma_low: &Tensor, g: &Generator) -> Result<DecoderTrace> {
    let d = &g.decoder;
    let applied_low = gamma_low.mul(x_low)?;
    let (mut z, low_res) = d.low_res.forward_cached(&applied_low)?;
    let mut low_up = Vec::new();
    for b in &d.low_up {
        let (next, cache) = b.forward_cached(&z)?;
        low_up.push(cache);
        z = next;
    }
    let low_channels = z.shape()[2];
    let cat = z.concat_last(&gamma_high.mul(x_high)?)?;
    let fuse_pre = d.fuse.forward(&cat)?;
    let fuse_post = instance_norm(&fuse_pre)?;
    let mut z = Activation::Relu.apply(&fuse_post);
    let mut high_up = Vec::new();
    for b in &d.high_up {
        let (next, cache) = b.forward_cached(&z)?;
        high_up.push(cache);
        z = next;
    }
    let head_in_shape = z.shape().to_vec();
    let output = tanh(&d.head.forward(&z)?);
    Ok(DecoderTrace {
        low_res,
        low_up,
        low_channels,
        fuse_in_shape: cat.shape().to_vec(),
        fuse_pre,
        fuse_post,
        high_up,
        head_in_shape,
        output,
    })
}

/// Applies `Γ_H ⊙ X_H` and `Γ_L ⊙ X_L` and decodes to an image in `[−1, 1]`.
pub fn madec_forward(x_high: &Tensor, x_low: &Tensor, gamma_high: &Tensor, gamma_low: &Tensor, g: &Generator) -> Result<Tensor> {
    Ok(decode(x_high, x_low, gamma_high, gamma_low, g)?.output)
}

/// Gradients `(∂/∂Γ_H, ∂/∂Γ_L)` of `⟨madec_forward(..), cotangent⟩`.
pub fn madec_vjp(
    x_high: &Tensor,
    x_low: &Tensor,
    gamma_high: &Tensor,
    gamma_low: &Tensor,
    g: &Generator,
    cotangent: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let t = decode(x_high, x_low, gamma_high, gamma_low, g)?;
    if cotangent.shape() != t.output.shape() {
        return Err(Error::Dimension(format!("cotangent {:?} does not match the decoder output", cotangent.shape())));
    }
    let d = &g.decoder;
    let mut grad = d.head.vjp_input(&t.head_in_shape, &tanh_vjp(&t.output, cotangent)?)?;
    for (b, cache) in d.high_up.iter().zip(&t.high_up).rev() {
        grad = b.vjp(cache, &grad)?;
    }
    let grad = Activation::Relu.vjp(&t.fuse_post, &grad)?;
    let grad = instance_norm_vjp(&t.fuse_pre, &t.fuse_post, &grad)?;
    let grad_cat = d.fuse.vjp_input(&t.fuse_in_shape, &grad)?;
    let (mut grad_low, grad_applied_high) = grad_cat.split_last(t.low_channels)?;
    for (b, cache) in d.low_up.iter().zip(&t.low_up).rev() {
        grad_low = b.vjp(cache, &grad_low)?;
    }
    let grad_applied_low = d.low_res.vjp(&t.low_res, &grad_low)?;
    Ok((grad_applied_high.mul(x_high)?, grad_applied_low.mul(x_low)?))
}

/// `x̂ = G(x, y)`: encoder, transfer module and decoder in sequence.
pub fn generator_forward(x: &Tensor, y: &Tensor, x_lm: &LandmarkSet, y_lm: &LandmarkSet, g: &Generator) -> Result<Tensor> {
    let (xh, xl) = faenc_forward(x, g)?;
    let (yh, yl) = faenc_forward(y, g)?;
    let (gh, gl) = mtm_forward(&xh, &xl, &yh, &yl, x_lm, y_lm, g)?;
    madec_forward(&xh, &xl, &gh, &gl, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderArg {
    GammaHigh,
    GammaLow,
}

/// The decoder as a function of one makeup map, the other inputs fixed.
#[derive(Debug, Clone)]
pub struct MadecKernel {
    pub generator: Generator,
    pub x_high: Tensor,
    pub x_low: Tensor,
    pub gamma_high: Tensor,
    pub gamma_low: Tensor,
    pub wrt: DecoderArg,
}

impl MadecKernel {
    fn maps(&self, input: &Tensor) -> (Tensor, Tensor) {
        match self.wrt {
            DecoderArg::GammaHigh => (input.clone(), self.gamma_low.clone()),
            DecoderArg::GammaLow => (self.gamma_high.clone(), input.clone()),
        }
    }

    pub fn input(&self) -> &Tensor {
        match self.wrt {
            DecoderArg::GammaHigh => &self.gamma_high,
            DecoderArg::GammaLow => &self.gamma_low,
        }
    }
}

impl Differentiable for MadecKernel {
    fn name(&self) -> &str {
        "madec"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (gh, gl) = self.maps(input);
        madec_forward(&self.x_high, &self.x_low, &gh, &gl, &self.generator)
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let (gh, gl) = self.maps(input);
        let (dh, dl) = madec_vjp(&self.x_high, &self.x_low, &gh, &gl, &self.generator, cotangent)?;
        Ok(match self.wrt {
            DecoderArg::GammaHigh => dh,
            DecoderArg::GammaLow => dl,
        })
    }
}

/// Mean absolute distance between the decoded image and a fixed target,
/// as a function of one makeup map. Output is a 1-element tensor.
#[derive(Debug, Clone)]
pub struct MadecLossKernel {
    pub decoder: MadecKernel,
    pub target: Tensor,
}

impl Differentiable for MadecLossKernel {
    fn name(&self) -> &str {
        "madec_makeup_loss"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out = self.decoder.forward(input)?;
        Tensor::new([1], vec![mean_abs(&out, &self.target)?])
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let out = self.decoder.forward(input)?;
        let g = mean_abs_vjp(&out, &self.target)?.scale(cotangent.data()[0]);
        self.decoder.vjp(input, &g)
    }
}

impl Parameterized for Generator {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        let e = &self.encoder;
        push_conv(&mut out, "enc.stem", &e.stem);
        push_blocks(&mut out, "enc.to_high", &e.to_high);
        push_block(&mut out, "enc.high_res", &e.high_res);
        push_blocks(&mut out, "enc.to_low", &e.to_low);
        push_block(&mut out, "enc.low_res", &e.low_res);
        for (name, p) in [("mtm.low", &self.attn_low), ("mtm.high", &self.attn_high)] {
            out.push((format!("{name}.q"), p.q()));
            out.push((format!("{name}.k"), p.k()));
            out.push((format!("{name}.v"), p.v()));
        }
        let d = &self.decoder;
        push_block(&mut out, "dec.low_res", &d.low_res);
        push_blocks(&mut out, "dec.low_up", &d.low_up);
        push_conv(&mut out, "dec.fuse", &d.fuse);
        push_blocks(&mut out, "dec.high_up", &d.high_up);
        push_conv(&mut out, "dec.head", &d.head);
        out
    }

    fn replace(&mut self, values: Vec<Tensor>) -> Result<()> {
        let mut it = values.into_iter();
        let e = &mut self.encoder;
        take_conv(&mut it, &mut e.stem)?;
        take_blocks(&mut it, &mut e.to_high)?;
        take_block(&mut it, &mut e.high_res)?;
        take_blocks(&mut it, &mut e.to_low)?;
        take_block(&mut it, &mut e.low_res)?;
        for p in [&mut self.attn_low, &mut self.attn_high] {
            let q = next(&mut it)?;
            let k = next(&mut it)?;
            let v = next(&mut it)?;
            *p = AttentionParams::new(q, k, v)?;
        }
        let d = &mut self.decoder;
        take_block(&mut it, &mut d.low_res)?;
        take_blocks(&mut it, &mut d.low_up)?;
        take_conv(&mut it, &mut d.fuse)?;
        take_blocks(&mut it, &mut d.high_up)?;
        take_conv(&mut it, &mut d.head)?;
        Ok(())
    }
}

pub(super) fn push_conv<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, c: &'a Conv2d) {
    out.push((format!("{name}.weight"), &c.weight));
    out.push((format!("{name}.bias"), &c.bias));
}

fn push_block<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, b: &'a Block) {
    for (k, c) in b.convs.iter().enumerate() {
        push_conv(out, &format!("{name}.conv{k}"), c);
    }
}

fn push_blocks<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, bs: &'a [Block]) {
    for (k, b) in bs.iter().enumerate() {
        push_block(out, &format!("{name}.{k}"), b);
    }
}

fn next(it: &mut impl Iterator<Item = Tensor>) -> Result<Tensor> {
    it.next().ok_or_else(|| Error::Dimension("weight list is shorter than the network".into()))
}

pub(super) fn take_conv(it: &mut impl Iterator<Item = Tensor>, c: &mut Conv2d) -> Result<()> {
    c.weight = next(it)?;
    c.bias = next(it)?;
    Ok(())
}

fn take_block(it: &mut impl Iterator<Item = Tensor>, b: &mut Block) -> Result<()> {
    b.convs.iter_mut().try_for_each(|c| take_conv(it, c))
}

fn take_blocks(it: &mut impl Iterator<Item = Tensor>, bs: &mut [Block]) -> Result<()> {
    bs.iter_mut().try_for_each(|b| take_block(it, b))
}
