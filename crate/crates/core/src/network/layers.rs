//! Convolution, instance normalization, activations and resampling on
//! `H×W×C` tensors, each with the input-gradient needed by the decoder.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Instance normalization guard.
pub const IN_EPS: f64 = 1e-5;

/// Half-width of the uniform weight initialization.
pub const INIT_RANGE: f64 = 0.08;

/// Square 2-D convolution with `k×k×C_in×C_out` weights and zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn random(k: usize, c_in: usize, c_out: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        Conv2d {
            weight: Tensor::from_fn([k, k, c_in, c_out], |_| rng.gen_range(-INIT_RANGE..=INIT_RANGE)),
            bias: Tensor::zeros([c_out]),
            stride,
            pad,
        }
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[3]
    }

    pub fn output_extent(&self, n: usize) -> Option<usize> {
        let k = self.kernel();
        (n + 2 * self.pad).checked_sub(k).map(|v| v / self.stride + 1)
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
        let (h, w, c) = x.dims3()?;
        if c != self.in_channels() {
            return Err(Error::Dimension(format!("conv expects {} channels, got {c}", self.in_channels())));
        }
        match (self.output_extent(h), self.output_extent(w)) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((h, w, c, oh, ow)),
            _ => Err(Error::Dimension(format!("{h}×{w} input is smaller than the {0}×{0} kernel", self.kernel()))),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w, cin, oh, ow) = self.check(x)?;
        let (k, cout) = (self.kernel(), self.out_channels());
        let (xd, wd) = (x.data(), self.weight.data());
        let mut out = Vec::with_capacity(oh * ow * cout);
        for oi in 0..oh {
            for oj in 0..ow {
                let mut acc = self.bias.data().to_vec();
                for a in 0..k {
                    let Some(i) = (oi * self.stride + a).checked_sub(self.pad).filter(|&i| i < h) else { continue };
                    for b in 0..k {
                        let Some(j) = (oj * self.stride + b).checked_sub(self.pad).filter(|&j| j < w) else { continue };
                        let xs = &xd[(i * w + j) * cin..][..cin];
                        let wk = &wd[(a * k + b) * cin * cout..][..cin * cout];
                        for (ci, &xv) in xs.iter().enumerate() {
                            for (o, &wv) in acc.iter_mut().zip(&wk[ci * cout..(ci + 1) * cout]) {
                                *o += xv * wv;
                            }
                        }
                    }
                }
                out.extend_from_slice(&acc);
            }
        }
        Tensor::new([oh, ow, cout], out)
    }

    /// Gradient with respect to the input.
    pub fn vjp_input(&self, x_shape: &[usize], dy: &Tensor) -> Result<Tensor> {
        let probe = Tensor::zeros(x_shape.to_vec());
        let (h, w, cin, oh, ow) = self.check(&probe)?;
        let (k, cout) = (self.kernel(), self.out_channels());
        if dy.shape() != [oh, ow, cout] {
            return Err(Error::Dimension(format!("conv cotangent {:?} does not match output", dy.shape())));
        }
        let (dyd, wd) = (dy.data(), self.weight.data());
        let mut dx = vec![0.0; h * w * cin];
        for oi in 0..oh {
            for oj in 0..ow {
                let g = &dyd[(oi * ow + oj) * cout..][..cout];
                for a in 0..k {
                    let Some(i) = (oi * self.stride + a).checked_sub(self.pad).filter(|&i| i < h) else { continue };
                    for b in 0..k {
                        let Some(j) = (oj * self.stride + b).checked_sub(self.pad).filter(|&j| j < w) else { continue };
                        let wk = &wd[(a * k + b) * cin * cout..][..cin * cout];
                        let dxs = &mut dx[(i * w + j) * cin..][..cin];
                        for (ci, d) in dxs.iter_mut().enumerate() {
                            *d += g.iter().zip(&wk[ci * cout..(ci + 1) * cout]).map(|(gv, wv)| gv * wv).sum::<f64>();
                        }
                    }
                }
            }
        }
        Tensor::new(x_shape.to_vec(), dx)
    }
}

/// Per-channel normalization over the spatial extent, no affine part.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    let n = (h * w) as f64;
    let xd = x.data();
    let mut out = vec![0.0; xd.len()];
    for ch in 0..c {
        let mean = (0..h * w).map(|p| xd[p * c + ch]).sum::<f64>() / n;
        let var = (0..h * w).map(|p| (xd[p * c + ch] - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + IN_EPS).sqrt();
        for p in 0..h * w {
            out[p * c + ch] = (xd[p * c + ch] - mean) * inv;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Input gradient of [`instance_norm`], given its input `x` and output `y`.
pub fn instance_norm_vjp(x: &Tensor, y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    let n = (h * w) as f64;
    let (xd, yd, gd) = (x.data(), y.data(), dy.data());
    let mut dx = vec![0.0; xd.len()];
    for ch in 0..c {
        let mean = (0..h * w).map(|p| xd[p * c + ch]).sum::<f64>() / n;
        let var = (0..h * w).map(|p| (xd[p * c + ch] - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + IN_EPS).sqrt();
        let g_mean = (0..h * w).map(|p| gd[p * c + ch]).sum::<f64>() / n;
        let gy_mean = (0..h * w).map(|p| gd[p * c + ch] * yd[p * c + ch]).sum::<f64>() / n;
        for p in 0..h * w {
            let i = p * c + ch;
            dx[i] = inv * (gd[i] - g_mean - yd[i] * gy_mean);
        }
    }
    Tensor::new(x.shape().to_vec(), dx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Relu => x.map(|v| v.max(0.0)),
            Activation::LeakyRelu(s) => x.map(|v| if v > 0.0 { v } else { s * v }),
        }
    }

    /// Input gradient given the pre-activation `x`.
    pub fn vjp(self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let slope = match self {
            Activation::Relu => 0.0,
            Activation::LeakyRelu(s) => s,
        };
        x.zip_map(dy, |v, g| if v > 0.0 { g } else { slope * g })
    }
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

/// Input gradient of `tanh` given its output `y`.
pub fn tanh_vjp(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    y.zip_map(dy, |t, g| (1.0 - t * t) * g)
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Nearest-neighbour ×2 upsampling.
pub fn upsample2(x: &Tensor) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    let xd = x.data();
    let mut out = Vec::with_capacity(4 * h * w * c);
    for i in 0..2 * h {
        for j in 0..2 * w {
            out.extend_from_slice(&xd[((i / 2) * w + j / 2) * c..][..c]);
        }
    }
    Tensor::new([2 * h, 2 * w, c], out)
}

pub fn upsample2_vjp(dy: &Tensor) -> Result<Tensor> {
    let (h2, w2, c) = dy.dims3()?;
    let (h, w) = (h2 / 2, w2 / 2);
    let gd = dy.data();
    let mut dx = vec![0.0; h * w * c];
    for i in 0..h2 {
        for j in 0..w2 {
            for k in 0..c {
                dx[((i / 2) * w + j / 2) * c + k] += gd[(i * w2 + j) * c + k];
            }
        }
    }
    Tensor::new([h, w, c], dx)
}
