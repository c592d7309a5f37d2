use super::landmarks::Point;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Offsets from `pixel` to every landmark, `[x−x(L₁), y−y(L₁), …]`,
/// normalized to unit 2-norm.
pub fn landmark_embed(pixel: Point, landmarks: &[Point]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * landmarks.len());
    landmark_embed_into(pixel, landmarks, &mut out)?;
    Ok(out)
}

fn landmark_embed_into(pixel: Point, landmarks: &[Point], out: &mut Vec<f64>) -> Result<()> {
    let start = out.len();
    let mut sq = 0.0;
    for l in landmarks {
        let dx = pixel.x - l.x;
        let dy = pixel.y - l.y;
        sq += dx * dx + dy * dy;
        out.push(dx);
        out.push(dy);
    }
    let norm = sq.sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateEmbedding(format!(
            "pixel ({}, {}) coincides with every landmark",
            pixel.x, pixel.y
        )));
    }
    for v in &mut out[start..] {
        *v /= norm;
    }
    Ok(())
}

/// Per-pixel landmark embedding of an `H×W` grid, shaped `H×W×2N`.
pub fn embedding_map(height: usize, width: usize, landmarks: &[Point]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(height * width * 2 * landmarks.len());
    for i in 0..height {
        for j in 0..width {
            landmark_embed_into(Point::new(j as f64, i as f64), landmarks, &mut data)?;
        }
    }
    Tensor::new([height, width, 2 * landmarks.len()], data)
}

/// Concatenates an `H×W×C` feature map with its landmark embedding, giving
/// `H×W×(C+2N)`. Landmarks must already be in feature-map coordinates.
pub fn embed_map(features: &Tensor, landmarks: &[Point]) -> Result<Tensor> {
    let (h, w, _) = features.dims3()?;
    features.concat_last(&embedding_map(h, w, landmarks)?)
}
