use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{instance_norm, instance_norm_vjp, upsample2, upsample2_vjp, Activation, Conv2d};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// Two 3×3 convolutions with a skip connection; shape preserving.
    Res,
    /// 4×4 stride-2 convolution; halves the extents.
    Down,
    /// Nearest ×2 upsampling then a 3×3 convolution; doubles the extents.
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub kind: BlockKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub norm: bool,
}

impl BlockConfig {
    pub fn new(kind: BlockKind, in_channels: usize, out_channels: usize) -> Result<Self> {
        if kind == BlockKind::Res && in_channels != out_channels {
            return Err(Error::Config(format!("res block cannot change channels ({in_channels} → {out_channels})")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Config("blocks need at least one channel".into()));
        }
        Ok(BlockConfig { kind, in_channels, out_channels, norm: true })
    }

    /// Output `(height, width, channels)` for the given input extents.
    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize, usize) {
        match self.kind {
            BlockKind::Res => (h, w, self.out_channels),
            BlockKind::Down => (h / 2, w / 2, self.out_channels),
            BlockKind::Up => (2 * h, 2 * w, self.out_channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub config: BlockConfig,
    pub convs: Vec<Conv2d>,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    input_shape: Vec<usize>,
    conv_in: Vec<Tensor>,
    pre_norm: Vec<Tensor>,
    post_norm: Vec<Tensor>,
}

fn norm(on: bool, x: &Tensor) -> Result<Tensor> {
    if on {
        instance_norm(x)
    } else {
        Ok(x.clone())
    }
}

impl Block {
    pub fn random(config: BlockConfig, rng: &mut impl Rng) -> Self {
        let (cin, cout) = (config.in_channels, config.out_channels);
        let convs = match config.kind {
            BlockKind::Res => vec![Conv2d::random(3, cin, cout, 1, 1, rng), Conv2d::random(3, cout, cout, 1, 1, rng)],
            BlockKind::Down => vec![Conv2d::random(4, cin, cout, 2, 1, rng)],
            BlockKind::Up => vec![Conv2d::random(3, cin, cout, 1, 1, rng)],
        };
        Block { config, convs }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, BlockCache)> {
        let (h, w, c) = x.dims3()?;
        if c != self.config.in_channels {
            return Err(Error::Dimension(format!(
                "{:?} block expects {} channels, got {c}",
                self.config.kind, self.config.in_channels
            )));
        }
        if self.config.kind == BlockKind::Down && (h % 2 != 0 || w % 2 != 0) {
            return Err(Error::Dimension(format!("down block needs even extents, got {h}×{w}")));
        }
        let mut cache =
            BlockCache { input_shape: x.shape().to_vec(), conv_in: vec![], pre_norm: vec![], post_norm: vec![] };
        let relu = Activation::Relu;
        let on = self.config.norm;
        let out = match self.config.kind {
            BlockKind::Res => {
                let h1 = self.convs[0].forward(x)?;
                let n1 = norm(on, &h1)?;
                let a1 = relu.apply(&n1);
                let h2 = self.convs[1].forward(&a1)?;
                let n2 = norm(on, &h2)?;
                let y = x.add(&n2)?;
                cache.conv_in = vec![x.clone(), a1];
                cache.pre_norm = vec![h1, h2];
                cache.post_norm = vec![n1, n2];
                y
            }
            BlockKind::Down | BlockKind::Up => {
                let u = if self.config.kind == BlockKind::Up { upsample2(x)? } else { x.clone() };
                let h1 = self.convs[0].forward(&u)?;
                let n1 = norm(on, &h1)?;
                let y = relu.apply(&n1);
                cache.conv_in = vec![u];
                cache.pre_norm = vec![h1];
                cache.post_norm = vec![n1];
                y
            }
        };
        Ok((out, cache))
    }

    /// Input gradient from the cached forward pass.
    pub fn vjp(&self, cache: &BlockCache, dy: &Tensor) -> Result<Tensor> {
        let relu = Activation::Relu;
        let on = self.config.norm;
        let norm_vjp = |k: usize, g: &Tensor| -> Result<Tensor> {
            if on {
                instance_norm_vjp(&cache.pre_norm[k], &cache.post_norm[k], g)
            } else {
                Ok(g.clone())
            }
        };
        match self.config.kind {
            BlockKind::Res => {
                let g_h2 = norm_vjp(1, dy)?;
                let g_a1 = self.convs[1].vjp_input(cache.conv_in[1].shape(), &g_h2)?;
                let g_n1 = relu.vjp(&cache.post_norm[0], &g_a1)?;
                let g_h1 = norm_vjp(0, &g_n1)?;
                let g_x = self.convs[0].vjp_input(&cache.input_shape, &g_h1)?;
                g_x.add(dy)
            }
            BlockKind::Down | BlockKind::Up => {
                let g_n1 = relu.vjp(&cache.post_norm[0], dy)?;
                let g_h1 = norm_vjp(0, &g_n1)?;
                let g_u = self.convs[0].vjp_input(cache.conv_in[0].shape(), &g_h1)?;
                if self.config.kind == BlockKind::Up {
                    upsample2_vjp(&g_u)
                } else {
                    Ok(g_u)
                }
            }
        }
    }
}
