//! Shared QKV machinery. Full attention and every Sow window run through the
//! same gather-based kernel over index lists into precomputed projections.

use std::sync::atomic::{AtomicU64, Ordering};

use super::AttentionParams;
use crate::error::{Error, Result};
use crate::tensor::{matmul_into, softmax_in_place, softmax_row_vjp};

/// Runtime multiply-accumulate counters, incremented by the kernels as they
/// execute.
#[derive(Debug, Default)]
pub struct MacCounter {
    score: AtomicU64,
    value: AtomicU64,
    projection: AtomicU64,
}

impl MacCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn score_macs(&self) -> u64 {
        self.score.load(Ordering::Relaxed)
    }

    pub fn value_macs(&self) -> u64 {
        self.value.load(Ordering::Relaxed)
    }

    pub fn projection_macs(&self) -> u64 {
        self.projection.load(Ordering::Relaxed)
    }

    pub(crate) fn add_score(&self, n: u64) {
        self.score.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_value(&self, n: u64) {
        self.value.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_projection(&self, n: u64) {
        self.projection.fetch_add(n, Ordering::Relaxed);
    }
}

/// Per-pixel projections `X̃Q`, `ỸK`, `YV`, each `P×C` row-major.
pub(crate) struct Projections {
    pub qx: Vec<f64>,
    pub ky: Vec<f64>,
    pub vy: Vec<f64>,
    pub channels: usize,
}

/// `x_emb`, `y_emb`: `P×(C+E)` embedded maps; `y`: `P×C` raw reference.
pub(crate) fn project(
    x_emb: &[f64],
    y_emb: &[f64],
    y: &[f64],
    pixels: usize,
    params: &AttentionParams,
    counter: Option<&MacCounter>,
) -> Projections {
    let c = params.channels();
    let d = params.input_dim();
    let mut qx = vec![0.0; pixels * c];
    let mut ky = vec![0.0; pixels * c];
    let mut vy = vec![0.0; pixels * c];
    matmul_into(x_emb, params.q().data(), &mut qx, pixels, d, c);
    matmul_into(y_emb, params.k().data(), &mut ky, pixels, d, c);
    matmul_into(y, params.v().data(), &mut vy, pixels, c, c);
    if let Some(counter) = counter {
        counter.add_projection((pixels * (2 * d * c + c * c)) as u64);
    }
    Projections { qx, ky, vy, channels: c }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Attention of each query pixel over the key pixels of one window.
/// Writes one `C`-vector per query into `out` (`queries.len() × C`).
pub(crate) fn attend(
    proj: &Projections,
    queries: &[usize],
    keys: &[usize],
    out: &mut [f64],
    counter: Option<&MacCounter>,
) {
    let c = proj.channels;
    let scale = (c as f64).sqrt().recip();
    let mut probs = vec![0.0; keys.len()];
    for (qi, &q) in queries.iter().enumerate() {
        let qrow = &proj.qx[q * c..(q + 1) * c];
        for (p, &k) in probs.iter_mut().zip(keys) {
            *p = dot(qrow, &proj.ky[k * c..(k + 1) * c]) * scale;
        }
        softmax_in_place(&mut probs);
        let o = &mut out[qi * c..(qi + 1) * c];
        o.fill(0.0);
        for (&p, &k) in probs.iter().zip(keys) {
            for (ov, &v) in o.iter_mut().zip(&proj.vy[k * c..(k + 1) * c]) {
                *ov += p * v;
            }
        }
        if let Some(counter) = counter {
            counter.add_score((keys.len() * c) as u64);
            counter.add_value((keys.len() * c) as u64);
        }
    }
}

/// Gradients of the projections, accumulated across windows.
pub(crate) struct ProjectionGrads {
    pub dqx: Vec<f64>,
    pub dky: Vec<f64>,
    pub dvy: Vec<f64>,
}

impl ProjectionGrads {
    pub fn zeros(pixels: usize, channels: usize) -> Self {
        ProjectionGrads {
            dqx: vec![0.0; pixels * channels],
            dky: vec![0.0; pixels * channels],
            dvy: vec![0.0; pixels * channels],
        }
    }
}

/// Backward of [`attend`] for one window. `grad_out` holds the cotangent of
/// each query's output row (`queries.len() × C`).
pub(crate) fn attend_vjp(
    proj: &Projections,
    queries: &[usize],
    keys: &[usize],
    grad_out: &[f64],
    grads: &mut ProjectionGrads,
) {
    let c = proj.channels;
    let scale = (c as f64).sqrt().recip();
    let mut probs = vec![0.0; keys.len()];
    let mut dprobs = vec![0.0; keys.len()];
    for (qi, &q) in queries.iter().enumerate() {
        let g = &grad_out[qi * c..(qi + 1) * c];
        let qrow = &proj.qx[q * c..(q + 1) * c];
        for (p, &k) in probs.iter_mut().zip(keys) {
            *p = dot(qrow, &proj.ky[k * c..(k + 1) * c]) * scale;
        }
        softmax_in_place(&mut probs);
        for ((dp, &p), &k) in dprobs.iter_mut().zip(&probs).zip(keys) {
            *dp = dot(g, &proj.vy[k * c..(k + 1) * c]);
            for (dv, &gv) in grads.dvy[k * c..(k + 1) * c].iter_mut().zip(g) {
                *dv += p * gv;
            }
        }
        softmax_row_vjp(&probs, &mut dprobs);
        for (&ds, &k) in dprobs.iter().zip(keys) {
            let ds = ds * scale;
            if ds == 0.0 {
                continue;
            }
            for j in 0..c {
                grads.dqx[q * c + j] += ds * proj.ky[k * c + j];
                grads.dky[k * c + j] += ds * qrow[j];
            }
        }
    }
}

/// Gradients of the attention inputs and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub x: crate::tensor::Tensor,
    pub y: crate::tensor::Tensor,
    pub q: crate::tensor::Tensor,
    pub k: crate::tensor::Tensor,
    pub v: crate::tensor::Tensor,
}

/// Pulls projection gradients back onto `X`, `Y` (raw, pre-embedding) and
/// `Q`, `K`, `V`. Returns flat buffers `(dx, dy, dq, dk, dv)`.
pub(crate) fn project_vjp(
    x_emb: &[f64],
    y_emb: &[f64],
    y: &[f64],
    pixels: usize,
    params: &AttentionParams,
    grads: &ProjectionGrads,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let c = params.channels();
    let d = params.input_dim();
    let q = params.q().data();
    let k = params.k().data();
    let v = params.v().data();

    let mut dq = vec![0.0; d * c];
    let mut dk = vec![0.0; d * c];
    let mut dv = vec![0.0; c * c];
    let mut dx = vec![0.0; pixels * c];
    let mut dy = vec![0.0; pixels * c];
    for p in 0..pixels {
        let xe = &x_emb[p * d..(p + 1) * d];
        let ye = &y_emb[p * d..(p + 1) * d];
        let yr = &y[p * c..(p + 1) * c];
        let gq = &grads.dqx[p * c..(p + 1) * c];
        let gk = &grads.dky[p * c..(p + 1) * c];
        let gv = &grads.dvy[p * c..(p + 1) * c];
        for a in 0..d {
            for b in 0..c {
                dq[a * c + b] += xe[a] * gq[b];
                dk[a * c + b] += ye[a] * gk[b];
            }
        }
        for a in 0..c {
            for b in 0..c {
                dv[a * c + b] += yr[a] * gv[b];
            }
            // Only the first C embedded channels are features; the rest is the
            // fixed landmark embedding.
            let qa = &q[a * c..(a + 1) * c];
            let ka = &k[a * c..(a + 1) * c];
            let va = &v[a * c..(a + 1) * c];
            dx[p * c + a] = dot(gq, qa);
            dy[p * c + a] = dot(gk, ka) + dot(gv, va);
        }
    }
    (dx, dy, dq, dk, dv)
}

pub(crate) fn check_maps(
    x: &crate::tensor::Tensor,
    y: &crate::tensor::Tensor,
    params: &AttentionParams,
) -> Result<(usize, usize, usize)> {
    let (h, w, c) = x.dims3()?;
    if y.shape() != x.shape() {
        return Err(Error::Dimension(format!(
            "source map {:?} and reference map {:?} differ",
            x.shape(),
            y.shape()
        )));
    }
    if c != params.channels() {
        return Err(Error::Dimension(format!(
            "maps have {c} channels but parameters expect {}",
            params.channels()
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::Dimension("empty feature map".into()));
    }
    Ok((h, w, c))
}
