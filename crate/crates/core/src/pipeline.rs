//! End-to-end transfer with Γ-space editing through the toy generator.

use image::RgbImage;

use crate::editing::{local_edit, EditSpec, MakeupFeatureMap, Resolution};
use crate::error::{Error, Result};
use crate::geometry::LandmarkSet;
use crate::imaging::{rgb_to_signed, signed_to_rgb};
use crate::network::{faenc_forward, madec_forward, mtm_forward, Generator};
use crate::tensor::Tensor;

/// A face image with its landmarks, in image pixels.
#[derive(Debug, Clone)]
pub struct Face {
    pub image: RgbImage,
    pub landmarks: LandmarkSet,
}

struct Encoded {
    high: Tensor,
    low: Tensor,
}

fn encode(face: &Face, g: &Generator) -> Result<Encoded> {
    let (w, h) = face.image.dimensions();
    if face.landmarks.width() != w as usize || face.landmarks.height() != h as usize {
        return Err(Error::Dimension("landmark extents differ from the image".into()));
    }
    let (high, low) = faenc_forward(&rgb_to_signed(&face.image), g)?;
    Ok(Encoded { high, low })
}

/// Makeup maps `(Γ_H, Γ_L)` transferring `reference` onto `source`.
fn gammas(src: &Encoded, src_face: &Face, reference: &Encoded, ref_face: &Face, g: &Generator) -> Result<(MakeupFeatureMap, MakeupFeatureMap)> {
    let (gh, gl) =
        mtm_forward(&src.high, &src.low, &reference.high, &reference.low, &src_face.landmarks, &ref_face.landmarks, g)?;
    Ok((MakeupFeatureMap::new(gh, Resolution::High)?, MakeupFeatureMap::new(gl, Resolution::Low)?))
}

/// Plain transfer `G(source, reference)`.
pub fn transfer(source: &Face, reference: &Face, g: &Generator) -> Result<RgbImage> {
    let src = encode(source, g)?;
    let reference_enc = encode(reference, g)?;
    let (gh, gl) = gammas(&src, source, &reference_enc, reference, g)?;
    signed_to_rgb(&madec_forward(&src.high, &src.low, gh.data(), gl.data(), g)?)
}

/// Transfer with per-region references and shades. `references` maps the
/// ids used in `spec` to faces; the source's own makeup (`Γ^x`, from
/// attending the source to itself) fills whatever the spec leaves over.
pub fn edit_transfer(source: &Face, references: &[(String, Face)], spec: &EditSpec, g: &Generator) -> Result<RgbImage> {
    let (w, h) = source.image.dimensions();
    if spec.width() != w as usize || spec.height() != h as usize {
        return Err(Error::Dimension(format!(
            "edit masks are {}×{} but the source is {w}×{h}",
            spec.width(),
            spec.height()
        )));
    }
    let src = encode(source, g)?;
    let (id_high, id_low) = gammas(&src, source, &src, source, g)?;

    let mut per_ref: Vec<(&str, (MakeupFeatureMap, MakeupFeatureMap))> = Vec::new();
    for id in spec.references() {
        let face = references
            .iter()
            .find(|(name, _)| name == id)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::Config(format!("edit spec names reference `{id}` but none was given")))?;
        let enc = encode(face, g)?;
        per_ref.push((id, gammas(&src, source, &enc, face, g)?));
    }
    let lookup = |id: &str| &per_ref.iter().find(|(name, _)| *name == id).expect("collected above").1;
    let highs: Vec<MakeupFeatureMap> = spec.entries().iter().map(|e| lookup(&e.reference).0.clone()).collect();
    let lows: Vec<MakeupFeatureMap> = spec.entries().iter().map(|e| lookup(&e.reference).1.clone()).collect();

    let gamma_high = local_edit(spec, &highs, &id_high)?;
    let gamma_low = local_edit(spec, &lows, &id_low)?;
    signed_to_rgb(&madec_forward(&src.high, &src.low, gamma_high.data(), gamma_low.data(), g)?)
}
