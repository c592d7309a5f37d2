//! Instrumented comparison of full attention against windowed attention.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{
    attention_cost, cross_attention_counted, plain_window_attention, sow_attention_counted, AttentionCost,
    AttentionParams, MacCounter,
};
use crate::error::{Error, Result};
use crate::geometry::{LandmarkSet, Point};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MacCounts {
    pub score_macs: u64,
    pub value_macs: u64,
    pub projection_macs: u64,
}

impl MacCounts {
    fn from_counter(c: &MacCounter) -> Self {
        MacCounts { score_macs: c.score_macs(), value_macs: c.value_macs(), projection_macs: c.projection_macs() }
    }

    fn matches(&self, cost: &AttentionCost) -> bool {
        self.score_macs == cost.score_macs
            && self.value_macs == cost.value_macs
            && self.projection_macs == cost.projection_macs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub full_ms: f64,
    pub windowed_ms: f64,
}

/// Everything except `timing` is bit-stable for fixed arguments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub landmarks: usize,
    /// `"sow"` or `"single-window"`.
    pub mode: String,
    pub window: usize,
    pub full: MacCounts,
    pub windowed: MacCounts,
    /// `full.score_macs / windowed.score_macs`.
    pub score_ratio: f64,
    /// The ratio as an exact reduced fraction.
    pub score_ratio_exact: (u64, u64),
    /// Counters agree with the closed-form cost model.
    pub counters_match_formula: bool,
    /// `max |windowed − full|`, reported in single-window mode only.
    pub max_abs_diff: Option<f64>,
    pub timing: Timing,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bench_landmarks(n: usize, h: usize, w: usize, rng: &mut impl Rng) -> LandmarkSet {
    let pts = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64 * std::f64::consts::TAU;
            let r = 0.25 + 0.1 * (k % 3) as f64;
            Point::new(
                (w as f64 - 1.0) / 2.0 + r * w as f64 * t.cos() + rng.gen_range(-0.5..0.5),
                (h as f64 - 1.0) / 2.0 + r * h as f64 * t.sin() + rng.gen_range(-0.5..0.5),
            )
        })
        .collect();
    LandmarkSet::new(pts, w, h).expect("ring fits")
}

/// Runs full cross-attention and a windowed variant on random maps.
///
/// With `single_window` the windowed side is one unshifted window covering
/// the whole map (`window` is ignored); otherwise it is Sow-Attention with
/// the given window.
pub fn attention_bench(
    height: usize,
    width: usize,
    channels: usize,
    window: usize,
    single_window: bool,
    landmarks: usize,
    seed: u64,
) -> Result<BenchReport> {
    if height != width && single_window {
        return Err(Error::Config("a single full-map window needs a square map".into()));
    }
    let window = if single_window { height } else { window };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_fn([height, width, channels], |_| rng.gen_range(-1.0..1.0));
    let y = Tensor::from_fn([height, width, channels], |_| rng.gen_range(-1.0..1.0));
    let x_lm = bench_landmarks(landmarks, height, width, &mut rng);
    // In single-window mode both maps share landmarks, so the coarse
    // alignment is the identity and the two outputs are comparable.
    let y_lm = if single_window { x_lm.clone() } else { bench_landmarks(landmarks, height, width, &mut rng) };
    let params = AttentionParams::random(channels, 2 * landmarks, 0.5 / (channels as f64).sqrt(), &mut rng);

    let windowed_counter = MacCounter::new();
    let start = Instant::now();
    let windowed = if single_window {
        plain_window_attention(&x, &y, &x_lm, &y_lm, window, &params, Some(&windowed_counter))?
    } else {
        sow_attention_counted(&x, &y, &x_lm, &y_lm, window, &params, &windowed_counter)?
    };
    let windowed_ms = start.elapsed().as_secs_f64() * 1e3;

    let full_counter = MacCounter::new();
    let start = Instant::now();
    let full = cross_attention_counted(&x, &y, &x_lm, &y_lm, &params, &full_counter)?;
    let full_ms = start.elapsed().as_secs_f64() * 1e3;

    let full_counts = MacCounts::from_counter(&full_counter);
    let windowed_counts = MacCounts::from_counter(&windowed_counter);
    let embed = 2 * landmarks;
    let full_formula = attention_cost(height, width, channels, embed, None)?;
    let windowed_formula = if single_window {
        full_formula
    } else {
        attention_cost(height, width, channels, embed, Some(window))?
    };
    let g = gcd(full_counts.score_macs, windowed_counts.score_macs).max(1);
    Ok(BenchReport {
        height,
        width,
        channels,
        landmarks,
        mode: if single_window { "single-window" } else { "sow" }.into(),
        window,
        full: full_counts,
        windowed: windowed_counts,
        score_ratio: full_counts.score_macs as f64 / windowed_counts.score_macs as f64,
        score_ratio_exact: (full_counts.score_macs / g, windowed_counts.score_macs / g),
        counters_match_formula: full_counts.matches(&full_formula) && windowed_counts.matches(&windowed_formula),
        max_abs_diff: if single_window { Some(windowed.max_abs_diff(&full)?) } else { None },
        timing: Timing { full_ms, windowed_ms },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_sixteen_small() {
        let r = attention_bench(16, 16, 4, 2, false, 5, 0).unwrap();
        assert_eq!(r.score_ratio_exact, (16, 1));
        assert!(r.counters_match_formula);
    }

    #[test]
    fn single_window_equals_full() {
        let r = attention_bench(8, 8, 3, 0, true, 5, 1).unwrap();
        assert_eq!(r.full, r.windowed);
        assert!(r.max_abs_diff.unwrap() < 1e-12);
    }
}
