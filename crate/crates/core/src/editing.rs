//! Algebra on makeup feature maps: application, partial transfer, shade
//! interpolation and multi-reference local editing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::tensor::Tensor;

pub const EDIT_SPEC_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    High,
    Low,
}

/// Per-pixel multiplicative makeup features (`H×W×C`) at one decoder scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MakeupFeatureMap {
    data: Tensor,
    resolution: Resolution,
}

impl MakeupFeatureMap {
    pub fn new(data: Tensor, resolution: Resolution) -> Result<Self> {
        data.dims3()?;
        Ok(MakeupFeatureMap { data, resolution })
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_data(self) -> Tensor {
        self.data
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dims3().expect("checked at construction")
    }
}

fn same_kind(a: &MakeupFeatureMap, b: &MakeupFeatureMap) -> Result<()> {
    if a.resolution != b.resolution {
        return Err(Error::Dimension(format!("cannot mix {:?} and {:?} resolution maps", a.resolution, b.resolution)));
    }
    if a.data.shape() != b.data.shape() {
        return Err(Error::Dimension(format!("map shapes {:?} and {:?} differ", a.data.shape(), b.data.shape())));
    }
    Ok(())
}

/// `X̂ = Γ ⊙ X`.
pub fn apply_makeup(gamma: &MakeupFeatureMap, x_feat: &Tensor) -> Result<Tensor> {
    gamma.data.mul(x_feat)
}

/// Per-pixel coefficient `c` blended as `c·Γ_a + (1 − c)·Γ_b`.
fn blend(a: &MakeupFeatureMap, b: &MakeupFeatureMap, coeff: impl Fn(usize) -> f64) -> MakeupFeatureMap {
    let (_, _, c) = a.dims();
    let data = a
        .data
        .data()
        .iter()
        .zip(b.data.data())
        .enumerate()
        .map(|(k, (&ga, &gb))| {
            let m = coeff(k / c);
            m * ga + (1.0 - m) * gb
        })
        .collect();
    MakeupFeatureMap { data: Tensor::new(a.data.shape().to_vec(), data).expect("same shape"), resolution: a.resolution }
}

fn check_mask(mask: &Mask, map: &MakeupFeatureMap) -> Result<()> {
    let (h, w, _) = map.dims();
    if mask.width() != w || mask.height() != h {
        return Err(Error::Dimension(format!(
            "mask is {}×{} but the feature map is {w}×{h}; downsample it first",
            mask.width(),
            mask.height()
        )));
    }
    Ok(())
}

/// `Γ = M ⊙ Γ^y + (1 − M) ⊙ Γ^x` with the mask broadcast over channels.
/// The mask must already be at the map's resolution.
pub fn partial_transfer(gamma_ref: &MakeupFeatureMap, gamma_id: &MakeupFeatureMap, mask: &Mask) -> Result<MakeupFeatureMap> {
    same_kind(gamma_ref, gamma_id)?;
    check_mask(mask, gamma_ref)?;
    let m = mask.data();
    Ok(blend(gamma_ref, gamma_id, |p| if m[p] { 1.0 } else { 0.0 }))
}

/// `Γ = α Γ^{y₁} + (1 − α) Γ^{y₂}`.
pub fn interpolate(gamma_1: &MakeupFeatureMap, gamma_2: &MakeupFeatureMap, alpha: f64) -> Result<MakeupFeatureMap> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!("shade {alpha} outside [0, 1]")));
    }
    same_kind(gamma_1, gamma_2)?;
    Ok(blend(gamma_1, gamma_2, |_| alpha))
}

/// Area-average pooling onto `height×width`, keeping cells whose covered
/// fraction is strictly above one half.
pub fn downsample_mask(mask: &Mask, height: usize, width: usize) -> Result<Mask> {
    if height == 0 || width == 0 || mask.height() % height != 0 || mask.width() % width != 0 {
        return Err(Error::Config(format!(
            "cannot pool a {}×{} mask onto {width}×{height}",
            mask.width(),
            mask.height()
        )));
    }
    let (fy, fx) = (mask.height() / height, mask.width() / width);
    Ok(Mask::from_fn(width, height, |i, j| {
        let mut n = 0;
        for a in 0..fy {
            for b in 0..fx {
                n += mask.get(i * fy + a, j * fx + b) as usize;
            }
        }
        2 * n > fy * fx
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditEntry {
    pub mask: Mask,
    pub shade: f64,
    pub reference: String,
}

/// Masks, shades and reference ids for a multi-reference local edit.
/// Validated so `Σ αᵢ Mᵢ(p) ≤ 1` at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EditSpec {
    entries: Vec<EditEntry>,
    width: usize,
    height: usize,
}

fn coefficient_check(masks: &[(&Mask, f64)], width: usize, height: usize) -> Result<()> {
    for i in 0..height {
        for j in 0..width {
            let total: f64 = masks.iter().map(|(m, a)| if m.get(i, j) { *a } else { 0.0 }).sum();
            if total > 1.0 {
                return Err(Error::Contract(format!(
                    "shade coefficients sum to {total} > 1 at pixel (x={j}, y={i})"
                )));
            }
        }
    }
    Ok(())
}

impl EditSpec {
    pub fn new(entries: Vec<EditEntry>, width: usize, height: usize) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.shade) {
                return Err(Error::Contract(format!("entry {k}: shade {} outside [0, 1]", e.shade)));
            }
            if e.mask.width() != width || e.mask.height() != height {
                return Err(Error::Dimension(format!(
                    "entry {k}: mask is {}×{} but the spec is {width}×{height}",
                    e.mask.width(),
                    e.mask.height()
                )));
            }
        }
        let pairs: Vec<_> = entries.iter().map(|e| (&e.mask, e.shade)).collect();
        coefficient_check(&pairs, width, height)?;
        Ok(EditSpec { entries, width, height })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        EditSpec { entries: Vec::new(), width, height }
    }

    pub fn entries(&self) -> &[EditEntry] {
        &self.entries
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Reference ids in entry order, without duplicates.
    pub fn references(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.reference.as_str()) {
                out.push(&e.reference);
            }
        }
        out
    }

    /// Reads the JSON form; mask paths are relative to the spec file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: EditSpecFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if file.schema_version != EDIT_SPEC_SCHEMA_VERSION {
            return Err(Error::format(path, format!("unsupported schema_version {}", file.schema_version)));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let entries = file
            .entries
            .into_iter()
            .map(|e| {
                Ok(EditEntry { mask: Mask::load(base.join(&e.mask))?, shade: e.shade, reference: e.reference })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, file.width, file.height)
    }
}

/// On-disk form of an [`EditSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSpecFile {
    pub schema_version: u32,
    pub width: usize,
    pub height: usize,
    pub entries: Vec<EditSpecFileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSpecFileEntry {
    pub mask: PathBuf,
    pub shade: f64,
    pub reference: String,
}

/// `Γ = Σᵢ αᵢ Mᵢ ⊙ Γ^{yᵢ} + (1 − Σᵢ αᵢ Mᵢ) ⊙ Γ^x`.
///
/// `gammas[i]` belongs to `spec.entries()[i]`. Masks are pooled onto the
/// map resolution when they are larger than it.
pub fn local_edit(spec: &EditSpec, gammas: &[MakeupFeatureMap], identity: &MakeupFeatureMap) -> Result<MakeupFeatureMap> {
    if gammas.len() != spec.entries.len() {
        return Err(Error::Dimension(format!(
            "{} edit entries but {} reference maps",
            spec.entries.len(),
            gammas.len()
        )));
    }
    for g in gammas {
        same_kind(g, identity)?;
    }
    let (h, w, c) = identity.dims();
    let masks = spec
        .entries
        .iter()
        .map(|e| if e.mask.width() == w && e.mask.height() == h { Ok(e.mask.clone()) } else { downsample_mask(&e.mask, h, w) })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = masks.iter().zip(&spec.entries).map(|(m, e)| (m, e.shade)).collect();
    coefficient_check(&pairs, w, h)?;

    let gx = identity.data.data();
    let mut out = Vec::with_capacity(gx.len());
    for p in 0..h * w {
        let coeffs: Vec<f64> = pairs.iter().map(|(m, a)| if m.data()[p] { *a } else { 0.0 }).collect();
        let total: f64 = coeffs.iter().sum();
        for k in 0..c {
            let i = p * c + k;
            let mut acc = (1.0 - total) * gx[i];
            for (g, &a) in gammas.iter().zip(&coeffs) {
                if a != 0.0 {
                    acc = a * g.data.data()[i] + acc;
                }
            }
            out.push(acc);
        }
    }
    Ok(MakeupFeatureMap { data: Tensor::new([h, w, c], out)?, resolution: identity.resolution })
}
