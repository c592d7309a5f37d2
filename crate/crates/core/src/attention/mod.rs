//! Landmark-embedded QKV cross-attention and its shifted overlapped window
//! variant.
//!
//! Feature maps are `H×W×C` tensors; landmark sets must already be expressed
//! in feature-map coordinates (see [`LandmarkSet::rescaled`]).

mod cost;
mod kernel;
mod sow;

pub use cost::{attention_cost, window_attention_cost, AttentionCost, SOW_SCHEMES};
pub use kernel::{AttentionGrads, MacCounter};
pub use sow::{
    plain_window_attention, sow_attention, sow_attention_counted, sow_attention_vjp, sow_weight,
    SowAttentionKernel, Window, WindowScheme,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{embedding_map, LandmarkSet};
use crate::tensor::{Differentiable, Tensor};
use kernel::{attend, attend_vjp, check_maps, project, project_vjp, ProjectionGrads};

/// Learned attention weights shared by every window.
///
/// `Q` and `K` map the landmark-embedded features (`C + 2N` wide) to `C`
/// channels; `V` acts on the raw reference features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    q: Tensor,
    k: Tensor,
    v: Tensor,
}

impl AttentionParams {
    pub fn new(q: Tensor, k: Tensor, v: Tensor) -> Result<Self> {
        let (qd, qc) = q.dims2()?;
        let (kd, kc) = k.dims2()?;
        let (vr, vc) = v.dims2()?;
        if qd != kd || qc != kc {
            return Err(Error::Dimension(format!(
                "Q is {qd}×{qc} but K is {kd}×{kc}"
            )));
        }
        if vr != vc || vc != qc {
            return Err(Error::Dimension(format!("V must be {qc}×{qc}, got {vr}×{vc}")));
        }
        if qd < qc {
            return Err(Error::Dimension(format!(
                "Q input width {qd} is smaller than its {qc} channels"
            )));
        }
        Ok(AttentionParams { q, k, v })
    }

    /// Uniform random weights in `[-scale, scale]`.
    pub fn random(channels: usize, embed_dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let d = channels + embed_dim;
        let mut draw = |shape: [usize; 2]| Tensor::from_fn(shape, |_| rng.gen_range(-scale..=scale));
        let q = draw([d, channels]);
        let k = draw([d, channels]);
        let v = draw([channels, channels]);
        AttentionParams { q, k, v }
    }

    pub fn q(&self) -> &Tensor {
        &self.q
    }

    pub fn k(&self) -> &Tensor {
        &self.k
    }

    pub fn v(&self) -> &Tensor {
        &self.v
    }

    pub fn channels(&self) -> usize {
        self.v.shape()[0]
    }

    /// Width of the embedded features, `C + 2N`.
    pub fn input_dim(&self) -> usize {
        self.q.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.input_dim() - self.channels()
    }

    pub fn with_q(&self, q: Tensor) -> Result<Self> {
        Self::new(q, self.k.clone(), self.v.clone())
    }

    pub fn with_k(&self, k: Tensor) -> Result<Self> {
        Self::new(self.q.clone(), k, self.v.clone())
    }

    pub fn with_v(&self, v: Tensor) -> Result<Self> {
        Self::new(self.q.clone(), self.k.clone(), v)
    }
}

pub(crate) fn check_landmarks(lm: &LandmarkSet, h: usize, w: usize, params: &AttentionParams) -> Result<()> {
    if lm.width() != w || lm.height() != h {
        return Err(Error::Landmarks(format!(
            "landmarks are for a {}×{} image, the feature map is {w}×{h}",
            lm.width(),
            lm.height()
        )));
    }
    if 2 * lm.len() != params.embed_dim() {
        return Err(Error::Dimension(format!(
            "{} landmarks embed to {} channels but parameters expect {}",
            lm.len(),
            2 * lm.len(),
            params.embed_dim()
        )));
    }
    Ok(())
}

struct Prepared {
    x_emb: Tensor,
    y_emb: Tensor,
    y_raw: Tensor,
    pixels: usize,
}

fn prepare_full(x: &Tensor, y: &Tensor, x_lm: &LandmarkSet, y_lm: &LandmarkSet, params: &AttentionParams) -> Result<Prepared> {
    let (h, w, _) = check_maps(x, y, params)?;
    check_landmarks(x_lm, h, w, params)?;
    check_landmarks(y_lm, h, w, params)?;
    Ok(Prepared {
        x_emb: x.concat_last(&embedding_map(h, w, x_lm.points())?)?,
        y_emb: y.concat_last(&embedding_map(h, w, y_lm.points())?)?,
        y_raw: y.clone(),
        pixels: h * w,
    })
}

/// Pixel-wise cross-attention over the whole map:
/// `Γ = softmax((X̃Q)(ỸK)ᵀ / √C) · (YV)`.
pub fn cross_attention(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    params: &AttentionParams,
) -> Result<Tensor> {
    cross_attention_impl(x, y, x_lm, y_lm, params, None)
}

/// [`cross_attention`] that also records its multiply-accumulates.
pub fn cross_attention_counted(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    params: &AttentionParams,
    counter: &MacCounter,
) -> Result<Tensor> {
    cross_attention_impl(x, y, x_lm, y_lm, params, Some(counter))
}

fn cross_attention_impl(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    params: &AttentionParams,
    counter: Option<&MacCounter>,
) -> Result<Tensor> {
    let prep = prepare_full(x, y, x_lm, y_lm, params)?;
    let proj = project(prep.x_emb.data(), prep.y_emb.data(), prep.y_raw.data(), prep.pixels, params, counter);
    let all: Vec<usize> = (0..prep.pixels).collect();
    let mut out = vec![0.0; prep.pixels * params.channels()];
    attend(&proj, &all, &all, &mut out, counter);
    Tensor::new(x.shape().to_vec(), out)
}

/// The attentive matrix `A` itself (`HW×HW`), for inspection and tests.
pub fn attention_matrix(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    params: &AttentionParams,
) -> Result<Tensor> {
    let prep = prepare_full(x, y, x_lm, y_lm, params)?;
    let d = params.input_dim();
    let p = prep.pixels;
    let qx = crate::tensor::matmul(&prep.x_emb.clone().reshape([p, d])?, params.q())?;
    let ky = crate::tensor::matmul(&prep.y_emb.clone().reshape([p, d])?, params.k())?;
    let scores = crate::tensor::matmul(&qx, &ky.transpose()?)?.scale((params.channels() as f64).sqrt().recip());
    crate::tensor::softmax_rows(&scores)
}

/// Gradients of `⟨cross_attention(..), cotangent⟩`.
pub fn cross_attention_vjp(
    x: &Tensor,
    y: &Tensor,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
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
    let prep = prepare_full(x, y, x_lm, y_lm, params)?;
    let c = params.channels();
    let proj = project(prep.x_emb.data(), prep.y_emb.data(), prep.y_raw.data(), prep.pixels, params, None);
    let all: Vec<usize> = (0..prep.pixels).collect();
    let mut grads = ProjectionGrads::zeros(prep.pixels, c);
    attend_vjp(&proj, &all, &all, cotangent.data(), &mut grads);
    let (dx, dy, dq, dk, dv) =
        project_vjp(prep.x_emb.data(), prep.y_emb.data(), prep.y_raw.data(), prep.pixels, params, &grads);
    Ok(AttentionGrads {
        x: Tensor::new(x.shape().to_vec(), dx)?,
        y: Tensor::new(y.shape().to_vec(), dy)?,
        q: Tensor::new(params.q().shape().to_vec(), dq)?,
        k: Tensor::new(params.k().shape().to_vec(), dk)?,
        v: Tensor::new(params.v().shape().to_vec(), dv)?,
    })
}

/// Which argument of an attention call a [`Differentiable`] wrapper varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionArg {
    X,
    Y,
    Q,
    K,
    V,
}

impl AttentionArg {
    pub const ALL: [AttentionArg; 5] = [Self::X, Self::Y, Self::Q, Self::K, Self::V];

    pub(crate) fn pick(self, g: AttentionGrads) -> Tensor {
        match self {
            Self::X => g.x,
            Self::Y => g.y,
            Self::Q => g.q,
            Self::K => g.k,
            Self::V => g.v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::X => "x",
            Self::Y => "y",
            Self::Q => "q",
            Self::K => "k",
            Self::V => "v",
        }
    }
}

/// Frozen arguments of an attention call, with one of them exposed as the
/// differentiable input.
#[derive(Debug, Clone)]
pub struct AttentionInputs {
    pub x: Tensor,
    pub y: Tensor,
    pub x_lm: LandmarkSet,
    pub y_lm: LandmarkSet,
    pub params: AttentionParams,
}

impl AttentionInputs {
    pub fn get(&self, arg: AttentionArg) -> &Tensor {
        match arg {
            AttentionArg::X => &self.x,
            AttentionArg::Y => &self.y,
            AttentionArg::Q => self.params.q(),
            AttentionArg::K => self.params.k(),
            AttentionArg::V => self.params.v(),
        }
    }

    pub fn with(&self, arg: AttentionArg, value: &Tensor) -> Result<AttentionInputs> {
        let mut out = self.clone();
        match arg {
            AttentionArg::X => out.x = value.clone(),
            AttentionArg::Y => out.y = value.clone(),
            AttentionArg::Q => out.params = self.params.with_q(value.clone())?,
            AttentionArg::K => out.params = self.params.with_k(value.clone())?,
            AttentionArg::V => out.params = self.params.with_v(value.clone())?,
        }
        Ok(out)
    }
}

/// [`cross_attention`] as a function of one of its arguments.
#[derive(Debug, Clone)]
pub struct CrossAttentionKernel {
    pub inputs: AttentionInputs,
    pub wrt: AttentionArg,
}

impl Differentiable for CrossAttentionKernel {
    fn name(&self) -> &str {
        "cross_attention"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let a = self.inputs.with(self.wrt, input)?;
        cross_attention(&a.x, &a.y, &a.x_lm, &a.y_lm, &a.params)
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let a = self.inputs.with(self.wrt, input)?;
        Ok(self.wrt.pick(cross_attention_vjp(&a.x, &a.y, &a.x_lm, &a.y_lm, &a.params, cotangent)?))
    }
}
