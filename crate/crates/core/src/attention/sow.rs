//! Shifted overlapped window attention.
//!
//! 1. The reference map is warped onto the source landmarks with a TPS.
//! 2. Four partitionings into `S×S` windows, shifted by `(0,0)`, `(S/2,0)`,
//!    `(0,S/2)` and `(S/2,S/2)`, each run attention inside every window.
//!    Shifted partitionings see the map padded by `S/2` with edge
//!    replication, so every pixel sits in exactly one window per scheme.
//! 3. The four per-scheme outputs are blended with bilinear weights
//!    `(S − 2|Δx|)(S − 2|Δy|) / S²` around each window center, which sum to
//!    one at every pixel.

use super::kernel::{attend, attend_vjp, check_maps, project, project_vjp, AttentionGrads, MacCounter, Projections, ProjectionGrads};
use super::{check_landmarks, AttentionArg, AttentionInputs, AttentionParams};
use crate::error::{Error, Result};
use crate::geometry::{alignment_grid, bilinear_sample, bilinear_sample_vjp, embedding_map, LandmarkSet, Point};
use crate::tensor::{Differentiable, Tensor};

/// Partitioning of an `H×W` map into `S×S` windows, in four shifted schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowScheme {
    size: usize,
    height: usize,
    width: usize,
}

/// One window: top-left corner in map coordinates (negative when it starts
/// in the padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x0: isize,
    pub y0: isize,
    pub size: usize,
}

impl Window {
    pub fn center(&self) -> Point {
        let half = (self.size as f64 - 1.0) / 2.0;
        Point::new(self.x0 as f64 + half, self.y0 as f64 + half)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i as isize, j as isize);
        let s = self.size as isize;
        i >= self.y0 && i < self.y0 + s && j >= self.x0 && j < self.x0 + s
    }

    /// In-image pixels of the window (queries) and all `S²` key positions
    /// with padding resolved by clamping to the border.
    fn indices(&self, height: usize, width: usize) -> (Vec<usize>, Vec<usize>) {
        let s = self.size as isize;
        let mut queries = Vec::with_capacity(self.size * self.size);
        let mut keys = Vec::with_capacity(self.size * self.size);
        for r in 0..s {
            let gy = self.y0 + r;
            let cy = gy.clamp(0, height as isize - 1) as usize;
            for c in 0..s {
                let gx = self.x0 + c;
                let cx = gx.clamp(0, width as isize - 1) as usize;
                keys.push(cy * width + cx);
                if gy >= 0 && gx >= 0 && (gy as usize) < height && (gx as usize) < width {
                    queries.push(gy as usize * width + gx as usize);
                }
            }
        }
        (queries, keys)
    }
}

impl WindowScheme {
    pub fn new(size: usize, height: usize, width: usize) -> Result<Self> {
        if size == 0 || size % 2 != 0 {
            return Err(Error::Config(format!("window size {size} must be positive and even")));
        }
        if height % size != 0 || width % size != 0 {
            return Err(Error::Config(format!(
                "window size {size} does not divide the {height}×{width} map"
            )));
        }
        Ok(WindowScheme { size, height, width })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Scheme shifts `(dx, dy)` in processing order.
    pub fn offsets(&self) -> [(usize, usize); 4] {
        let h = self.size / 2;
        [(0, 0), (h, 0), (0, h), (h, h)]
    }

    /// Windows of the scheme shifted by `(dx, dy)`, row-major.
    pub fn windows(&self, (dx, dy): (usize, usize)) -> Vec<Window> {
        let s = self.size;
        let nx = (self.width + 2 * dx) / s;
        let ny = (self.height + 2 * dy) / s;
        let mut out = Vec::with_capacity(nx * ny);
        for wy in 0..ny {
            for wx in 0..nx {
                out.push(Window {
                    x0: (wx * s) as isize - dx as isize,
                    y0: (wy * s) as isize - dy as isize,
                    size: s,
                });
            }
        }
        out
    }

    /// The window of the given scheme that contains pixel `(i, j)`.
    pub fn window_of(&self, (dx, dy): (usize, usize), i: usize, j: usize) -> Window {
        let s = self.size;
        Window {
            x0: (((j + dx) / s) * s) as isize - dx as isize,
            y0: (((i + dy) / s) * s) as isize - dy as isize,
            size: s,
        }
    }

    /// Aggregation weight of each pixel in the scheme shifted by `offset`.
    fn weights(&self, offset: (usize, usize)) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.height * self.width);
        for i in 0..self.height {
            for j in 0..self.width {
                let win = self.window_of(offset, i, j);
                let p = Point::new(j as f64, i as f64);
                out.push(sow_weight(p, win.center(), self.size).expect("pixel lies in its own window"));
            }
        }
        out
    }
}

/// Bilinear aggregation weight of a pixel in the window centered at
/// `center`: `(S − 2|Δx|)(S − 2|Δy|) / S²`.
pub fn sow_weight(pixel: Point, center: Point, size: usize) -> Result<f64> {
    let s = size as f64;
    let dx = (pixel.x - center.x).abs();
    let dy = (pixel.y - center.y).abs();
    if !(dx <= s / 2.0 && dy <= s / 2.0) {
        return Err(Error::Contract(format!(
            "pixel ({}, {}) lies outside the {size}×{size} window centered at ({}, {})",
            pixel.x, pixel.y, center.x, center.y
        )));
    }
    Ok((s - 2.0 * dx) * (s - 2.0 * dy) / (s * s))
}

struct Prepared {
    scheme: WindowScheme,
    grid: Tensor,
    x_emb: Tensor,
    y_emb: Tensor,
    y_aligned: Tensor,
    pixels: usize,
}

fn prepare(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    window: usize,
    params: &AttentionParams,
) -> Result<Prepared> {
    let (h, w, _) = check_maps(x, y, params)?;
    let scheme = WindowScheme::new(window, h, w)?;
    check_landmarks(x_lm, h, w, params)?;
    check_landmarks(y_lm, h, w, params)?;

    let grid = alignment_grid(y_lm, x_lm, h, w)?;
    let y_aligned = bilinear_sample(y, &grid)?;
    // After alignment the reference landmarks sit on the source landmarks,
    // so both maps share one positional embedding.
    let emb = embedding_map(h, w, x_lm.points())?;
    Ok(Prepared {
        scheme,
        grid,
        x_emb: x.concat_last(&emb)?,
        y_emb: y_aligned.concat_last(&emb)?,
        y_aligned,
        pixels: h * w,
    })
}

fn run_scheme(
    proj: &Projections,
    scheme: &WindowScheme,
    offset: (usize, usize),
    reverse: bool,
    counter: Option<&MacCounter>,
) -> Vec<f64> {
    let c = proj.channels;
    let (h, w) = (scheme.height, scheme.width);
    let mut out = vec![0.0; h * w * c];
    let mut windows = scheme.windows(offset);
    if reverse {
        windows.reverse();
    }
    let mut buf = Vec::new();
    for win in windows {
        let (queries, keys) = win.indices(h, w);
        buf.resize(queries.len() * c, 0.0);
        attend(proj, &queries, &keys, &mut buf, counter);
        for (qi, &q) in queries.iter().enumerate() {
            out[q * c..(q + 1) * c].copy_from_slice(&buf[qi * c..(qi + 1) * c]);
        }
    }
    out
}

pub(crate) fn sow_forward(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    window: usize,
    params: &AttentionParams,
    counter: Option<&MacCounter>,
    reverse_windows: bool,
) -> Result<Tensor> {
    let prep = prepare(x, y, x_lm, y_lm, window, params)?;
    let proj = project(prep.x_emb.data(), prep.y_emb.data(), prep.y_aligned.data(), prep.pixels, params, counter);
    let c = params.channels();
    let mut out = vec![0.0; prep.pixels * c];
    for offset in prep.scheme.offsets() {
        let gamma = run_scheme(&proj, &prep.scheme, offset, reverse_windows, counter);
        let weights = prep.scheme.weights(offset);
        for (p, &wt) in weights.iter().enumerate() {
            for k in 0..c {
                out[p * c + k] += wt * gamma[p * c + k];
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Sow-Attention makeup feature map for source `x` and reference `y`
/// (`H×W×C`, landmarks in map coordinates) with window size `window`.
pub fn sow_attention(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    window: usize,
    params: &AttentionParams,
) -> Result<Tensor> {
    sow_forward(x, y, x_lm, y_lm, window, params, None, false)
}

/// [`sow_attention`] that also records its multiply-accumulates.
pub fn sow_attention_counted(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    window: usize,
    params: &AttentionParams,
    counter: &MacCounter,
) -> Result<Tensor> {
    sow_forward(x, y, x_lm, y_lm, window, params, Some(counter), false)
}

/// Attention in a single unshifted partitioning of non-overlapping windows,
/// without blending. Same coarse alignment as [`sow_attention`]; with
/// `window` equal to the map size it is one full-map window.
pub fn plain_window_attention(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    window: usize,
    params: &AttentionParams,
    counter: Option<&MacCounter>,
) -> Result<Tensor> {
    let prep = prepare(x, y, x_lm, y_lm, window, params)?;
    let proj = project(prep.x_emb.data(), prep.y_emb.data(), prep.y_aligned.data(), prep.pixels, params, counter);
    let out = run_scheme(&proj, &prep.scheme, (0, 0), false, counter);
    Tensor::new(x.shape().to_vec(), out)
}

/// Gradients of `⟨sow_attention(..), cotangent⟩`. The reference gradient
/// flows back through the TPS resampling.
pub fn sow_attention_vjp(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    window: usize,
    params: &AttentionParams,
    cotangent: &Tensor,
) -> Result<AttentionGrads> {
    if cotangent.shape() != x.shape() {
        return Err(Error::Dimension(format!(
            "cotangent {:?} does not match output {:?}",
            cotangent.shape(),
            x.shape()
        )));
    }
    let prep = prepare(x, y, x_lm, y_lm, window, params)?;
    let c = params.channels();
    let (h, w) = (prep.scheme.height, prep.scheme.width);
    let proj = project(prep.x_emb.data(), prep.y_emb.data(), prep.y_aligned.data(), prep.pixels, params, None);
    let mut grads = ProjectionGrads::zeros(prep.pixels, c);
    let g = cotangent.data();
    let mut buf = Vec::new();
    for offset in prep.scheme.offsets() {
        let weights = prep.scheme.weights(offset);
        for win in prep.scheme.windows(offset) {
            let (queries, keys) = win.indices(h, w);
            buf.clear();
            for &q in &queries {
                buf.extend(g[q * c..(q + 1) * c].iter().map(|v| v * weights[q]));
            }
            attend_vjp(&proj, &queries, &keys, &buf, &mut grads);
        }
    }
    let (dx, dy_aligned, dq, dk, dv) =
        project_vjp(prep.x_emb.data(), prep.y_emb.data(), prep.y_aligned.data(), prep.pixels, params, &grads);
    let dy_aligned = Tensor::new(y.shape().to_vec(), dy_aligned)?;
    let dy = bilinear_sample_vjp(y.shape(), &prep.grid, &dy_aligned)?;
    Ok(AttentionGrads {
        x: Tensor::new(x.shape().to_vec(), dx)?,
        y: dy,
        q: Tensor::new(params.q().shape().to_vec(), dq)?,
        k: Tensor::new(params.k().shape().to_vec(), dk)?,
        v: Tensor::new(params.v().shape().to_vec(), dv)?,
    })
}

/// [`sow_attention`] as a function of one of its arguments.
#[derive(Debug, Clone)]
pub struct SowAttentionKernel {
    pub inputs: AttentionInputs,
    pub window: usize,
    pub wrt: AttentionArg,
}

impl Differentiable for SowAttentionKernel {
    fn name(&self) -> &str {
        "sow_attention"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let a = self.inputs.with(self.wrt, input)?;
        sow_attention(&a.x, &a.y, &a.x_lm, &a.y_lm, self.window, &a.params)
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let a = self.inputs.with(self.wrt, input)?;
        let g = sow_attention_vjp(&a.x, &a.y, &a.x_lm, &a.y_lm, self.window, &a.params, cotangent)?;
        Ok(self.wrt.pick(g))
    }
}
