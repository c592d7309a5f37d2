use serde::Serialize;

use crate::error::{Error, Result};

/// Number of shifted partitioning schemes in Sow-Attention.
pub const SOW_SCHEMES: u64 = 4;

/// Exact multiply-accumulate counts of one attention call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AttentionCost {
    /// `(X̃Q)(ỸK)ᵀ` entries times `C`.
    pub score_macs: u64,
    /// `A (YV)` entries times `C`.
    pub value_macs: u64,
    /// The three per-pixel projections `X̃Q`, `ỸK`, `YV`.
    pub projection_macs: u64,
}

impl AttentionCost {
    pub fn total(&self) -> u64 {
        self.score_macs + self.value_macs + self.projection_macs
    }
}

fn projection_macs(pixels: u64, channels: u64, embed: u64) -> u64 {
    pixels * (2 * (channels + embed) * channels + channels * channels)
}

/// Cost of full attention (`window = None`) or of Sow-Attention with window
/// size `S` (`window = Some(S)`) on an `H×W×C` map with `embed` positional
/// channels.
pub fn attention_cost(
    height: usize,
    width: usize,
    channels: usize,
    embed: usize,
    window: Option<usize>,
) -> Result<AttentionCost> {
    match window {
        None => {
            let p = (height * width) as u64;
            let c = channels as u64;
            Ok(AttentionCost {
                score_macs: p * p * c,
                value_macs: p * p * c,
                projection_macs: projection_macs(p, c, embed as u64),
            })
        }
        Some(s) => window_attention_cost(height, width, channels, embed, s, SOW_SCHEMES),
    }
}

/// Cost of attention restricted to `schemes` partitionings into `S×S`
/// windows. Each in-image pixel is a query in exactly one window per scheme
/// and sees `S²` keys there.
pub fn window_attention_cost(
    height: usize,
    width: usize,
    channels: usize,
    embed: usize,
    window: usize,
    schemes: u64,
) -> Result<AttentionCost> {
    if window == 0 || height % window != 0 || width % window != 0 {
        return Err(Error::Config(format!(
            "window {window} does not divide a {height}×{width} map"
        )));
    }
    let p = (height * width) as u64;
    let c = channels as u64;
    let s2 = (window * window) as u64;
    Ok(AttentionCost {
        score_macs: schemes * p * s2 * c,
        value_macs: schemes * p * s2 * c,
        projection_macs: projection_macs(p, c, embed as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_sixteen_at_eighth_window() {
        for h in [32usize, 64, 128] {
            let full = attention_cost(h, h, 64, 34, None).unwrap();
            let sow = attention_cost(h, h, 64, 34, Some(h / 8)).unwrap();
            assert_eq!(full.score_macs % sow.score_macs, 0);
            assert_eq!(full.score_macs / sow.score_macs, 16);
            assert_eq!(full.value_macs / sow.value_macs, 16);
            assert_eq!(full.projection_macs, sow.projection_macs);
        }
    }

    #[test]
    fn single_full_window_equals_full() {
        let full = attention_cost(8, 8, 16, 10, None).unwrap();
        let one = window_attention_cost(8, 8, 16, 10, 8, 1).unwrap();
        assert_eq!(full, one);
    }

    #[test]
    fn rejects_non_dividing_window() {
        assert!(attention_cost(10, 10, 4, 0, Some(4)).is_err());
    }
}
