//! Toy-resolution generator (attribute encoder, makeup transfer module,
//! makeup-apply decoder) and patch discriminator with seeded weights.

mod blocks;
mod discriminator;
mod generator;
pub mod layers;
mod weights;

pub use blocks::{Block, BlockCache, BlockConfig, BlockKind};
pub use discriminator::{patch_discriminator_forward, Discriminator, DiscriminatorConfig};
pub use generator::{
    faenc_forward, generator_forward, madec_forward, madec_vjp, mtm_forward, Decoder, DecoderArg, Encoder,
    Generator, MadecKernel, MadecLossKernel,
};
pub use layers::{Conv2d, IN_EPS, INIT_RANGE};
pub use weights::{load_weights, save_weights, Parameterized, WeightEntry, WeightIndex, WEIGHTS_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the generator. Feature-map resolutions are the input
/// resolution divided by the high and low factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub resolution: usize,
    /// Channel width per encoder stage; stages past the end reuse the last.
    pub widths: Vec<usize>,
    pub high_factor: usize,
    pub low_factor: usize,
    pub window: usize,
    pub landmarks: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            resolution: 64,
            widths: vec![16, 32, 64],
            high_factor: 4,
            low_factor: 16,
            window: 4,
            landmarks: 17,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Full-size layout (256×256 input, widths 64/128/256, S = 8). Provided
    /// for completeness; far too slow for the test suite.
    pub fn full_scale() -> Self {
        GeneratorConfig {
            resolution: 256,
            widths: vec![64, 128, 256],
            high_factor: 4,
            low_factor: 16,
            window: 8,
            landmarks: 68,
            seed: 0,
        }
    }

    /// 16×16 input with 8×8 and 4×4 feature maps, small enough for
    /// finite-difference checks.
    pub fn tiny() -> Self {
        GeneratorConfig {
            resolution: 16,
            widths: vec![4, 6],
            high_factor: 2,
            low_factor: 4,
            window: 4,
            landmarks: 17,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad("widths must be non-empty and positive".into());
        }
        if !self.high_factor.is_power_of_two() || !self.low_factor.is_power_of_two() {
            return bad("downscale factors must be powers of two".into());
        }
        if self.high_factor < 2 || self.low_factor <= self.high_factor {
            return bad(format!(
                "need 2 ≤ high factor < low factor, got {} and {}",
                self.high_factor, self.low_factor
            ));
        }
        if self.resolution % self.low_factor != 0 {
            return bad(format!("resolution {} is not divisible by {}", self.resolution, self.low_factor));
        }
        if self.low_extent() < 4 {
            return bad(format!("low-res maps would be {}×{0}; need at least 4×4", self.low_extent()));
        }
        if self.window == 0 || self.window % 2 != 0 || self.high_extent() % self.window != 0 {
            return bad(format!(
                "window {} must be even and divide the high-res extent {}",
                self.window,
                self.high_extent()
            ));
        }
        if self.landmarks < crate::geometry::MIN_LANDMARKS {
            return bad(format!("need at least {} landmarks", crate::geometry::MIN_LANDMARKS));
        }
        Ok(())
    }

    pub fn high_extent(&self) -> usize {
        self.resolution / self.high_factor
    }

    pub fn low_extent(&self) -> usize {
        self.resolution / self.low_factor
    }

    pub(crate) fn high_stage(&self) -> usize {
        self.high_factor.trailing_zeros() as usize
    }

    pub(crate) fn low_stage(&self) -> usize {
        self.low_factor.trailing_zeros() as usize
    }

    /// Channel count at encoder stage `s` (resolution / 2^s).
    pub fn width_at(&self, stage: usize) -> usize {
        self.widths[stage.min(self.widths.len() - 1)]
    }

    pub fn high_channels(&self) -> usize {
        self.width_at(self.high_stage())
    }

    pub fn low_channels(&self) -> usize {
        self.width_at(self.low_stage())
    }

    pub fn embed_dim(&self) -> usize {
        2 * self.landmarks
    }
}
