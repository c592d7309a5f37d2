//! Landmarks, thin-plate-spline warps, grid sampling and landmark
//! positional embedding.

mod embed;
mod landmarks;
mod sampling;
mod tps;

pub use embed::{embed_map, embedding_map, landmark_embed};
pub use landmarks::{FaceLayout, LandmarkSet, Point, MIN_LANDMARKS};
pub use sampling::{bilinear_sample, bilinear_sample_vjp, identity_grid, make_grid, BilinearSample};
pub use tps::{tps_kernel, tps_solve, TpsTransform, MAX_CONDITION};

use crate::error::Result;
use crate::tensor::Tensor;

/// Sampling grid that warps an image annotated with `from` so that its
/// landmarks land on `to`.
///
/// Backward sampling needs the map from output pixels to input locations,
/// so the spline is solved from `to` onto `from`.
pub fn alignment_grid(from: &LandmarkSet, to: &LandmarkSet, height: usize, width: usize) -> Result<Tensor> {
    let t = tps_solve(to, from)?;
    Ok(make_grid(&t, height, width))
}

/// Warps an `H×W×C` map annotated with `from` onto the landmark layout `to`.
pub fn warp_to(image: &Tensor, from: &LandmarkSet, to: &LandmarkSet) -> Result<Tensor> {
    let (h, w, _) = image.dims3()?;
    bilinear_sample(image, &alignment_grid(from, to, h, w)?)
}
