use image::RgbImage;

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Per-channel 256-bin histograms of the masked pixels.
fn histograms(img: &RgbImage, mask: &Mask) -> [[u64; 256]; 3] {
    let mut h = [[0u64; 256]; 3];
    for (p, &inside) in img.pixels().zip(mask.data()) {
        if inside {
            for c in 0..3 {
                h[c][p.0[c] as usize] += 1;
            }
        }
    }
    h
}

fn cumulative(h: &[u64; 256]) -> [u64; 256] {
    let mut out = [0u64; 256];
    let mut acc = 0;
    for (o, &v) in out.iter_mut().zip(h) {
        acc += v;
        *o = acc;
    }
    out
}

/// Monotone lookup table from source to reference levels minimizing the
/// largest CDF gap left after matching.
///
/// Source levels sent to the same reference level form a group; the output
/// CDF only steps where a group lands. For a threshold `t`, feasibility is a
/// reachability sweep over "the current group sits at level r", and `t` is
/// found by bisection. Gaps are cross-multiplied integer counts, so the
/// result is exact.
fn matching_lut(src: &[u64; 256], reference: &[u64; 256]) -> [u8; 256] {
    let cs = cumulative(src);
    let cr = cumulative(reference);
    let (ns, nr) = (cs[255] as u128, cr[255] as u128);
    let levels: Vec<usize> = (0..256).filter(|&v| src[v] > 0).collect();
    if levels.is_empty() || nr == 0 {
        return std::array::from_fn(|v| v as u8);
    }
    // Output CDF just below level v, and reference CDF at r (r = -1 is 0).
    let before = |v: usize| if v == 0 { 0 } else { cs[v - 1] as u128 * nr };
    let fr = |r: isize| if r < 0 { 0 } else { cr[r as usize] as u128 * ns };
    let total = ns * nr;

    // reach[k][r]: source levels[..=k] can be placed with levels[k] at r.
    let sweep = |t: u128| -> Option<Vec<[bool; 256]>> {
        let ok = |a: u128, b: u128| a.abs_diff(b) <= t;
        let mut reach = Vec::with_capacity(levels.len());
        let first = before(levels[0]);
        reach.push(std::array::from_fn(|r| ok(first, fr(r as isize - 1))));
        for &v in &levels[1..] {
            let prev: &[bool; 256] = reach.last().expect("seeded");
            let a = before(v);
            let mut next = [false; 256];
            let mut can_leave = false;
            for r in 0..256 {
                next[r] = prev[r] || (can_leave && ok(a, fr(r as isize - 1)));
                can_leave |= prev[r] && ok(a, fr(r as isize));
            }
            reach.push(next);
        }
        reach.last().expect("seeded").iter().zip(0..).any(|(&on, r)| on && ok(total, fr(r))).then_some(reach)
    };
    let (mut lo, mut hi) = (0u128, total);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if sweep(mid).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let t = lo;
    let reach = sweep(t).expect("the full range is always feasible");

    // Walk back, staying on a level whenever the earlier prefix allows it.
    let ok = |a: u128, b: u128| a.abs_diff(b) <= t;
    let last = reach.len() - 1;
    let mut r = (0..256).find(|&r| reach[last][r] && ok(total, fr(r as isize))).expect("feasible");
    let mut picks = vec![0usize; levels.len()];
    picks[last] = r;
    for k in (1..levels.len()).rev() {
        if !reach[k - 1][r] {
            let a = before(levels[k]);
            r = (0..r).rev().find(|&q| reach[k - 1][q] && ok(a, fr(q as isize))).expect("reachable");
        }
        picks[k - 1] = r;
    }
    let mut lut = [0u8; 256];
    let mut k = 0;
    for v in 0..256 {
        if k + 1 < levels.len() && levels[k + 1] <= v {
            k += 1;
        }
        lut[v] = picks[k] as u8;
    }
    lut
}

fn check(img: &RgbImage, mask: &Mask, what: &str) -> Result<()> {
    let (w, h) = img.dimensions();
    if mask.width() != w as usize || mask.height() != h as usize {
        return Err(Error::Dimension(format!(
            "{what} mask is {}×{} but the image is {w}×{h}",
            mask.width(),
            mask.height()
        )));
    }
    if mask.is_empty() {
        return Err(Error::EmptyRegion(format!("{what} mask selects no pixels")));
    }
    Ok(())
}

/// Remaps the colors of `source` inside `mask_src` so each channel follows
/// the distribution of `reference` inside `mask_ref`. Pixels outside
/// `mask_src` are returned unchanged.
pub fn histogram_match(source: &RgbImage, reference: &RgbImage, mask_src: &Mask, mask_ref: &Mask) -> Result<RgbImage> {
    check(source, mask_src, "source")?;
    check(reference, mask_ref, "reference")?;
    let hs = histograms(source, mask_src);
    let hr = histograms(reference, mask_ref);
    let luts = [matching_lut(&hs[0], &hr[0]), matching_lut(&hs[1], &hr[1]), matching_lut(&hs[2], &hr[2])];
    let mut out = source.clone();
    for (p, &inside) in out.pixels_mut().zip(mask_src.data()) {
        if inside {
            for c in 0..3 {
                p.0[c] = luts[c][p.0[c] as usize];
            }
        }
    }
    Ok(out)
}

/// Largest per-channel Kolmogorov–Smirnov distance between the masked
/// color distributions of two images.
pub fn ks_distance(a: &RgbImage, mask_a: &Mask, b: &RgbImage, mask_b: &Mask) -> Result<f64> {
    check(a, mask_a, "first")?;
    check(b, mask_b, "second")?;
    let ha = histograms(a, mask_a);
    let hb = histograms(b, mask_b);
    let mut worst: f64 = 0.0;
    for c in 0..3 {
        let ca = cumulative(&ha[c]);
        let cb = cumulative(&hb[c]);
        let (na, nb) = (ca[255] as f64, cb[255] as f64);
        for v in 0..256 {
            worst = worst.max((ca[v] as f64 / na - cb[v] as f64 / nb).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: u32, h: u32, lo: u8, hi: u8, rng: &mut impl Rng) -> RgbImage {
        RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)]))
    }

    #[test]
    fn constant_to_constant() {
        let src = RgbImage::from_pixel(6, 6, Rgb([50, 50, 50]));
        let reference = RgbImage::from_pixel(6, 6, Rgb([200, 200, 200]));
        let m = Mask::from_fn(6, 6, |i, _| i < 3);
        let out = histogram_match(&src, &reference, &m, &Mask::full(6, 6)).unwrap();
        for (k, p) in out.pixels().enumerate() {
            let want = if k / 6 < 3 { 200 } else { 50 };
            assert_eq!(p.0, [want; 3]);
        }
    }

    #[test]
    fn same_distribution_is_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = noise(16, 16, 20, 220, &mut rng);
        // A pixel permutation has exactly the same histogram.
        let reference = RgbImage::from_fn(16, 16, |x, y| *src.get_pixel(15 - x, 15 - y));
        let full = Mask::full(16, 16);
        let out = histogram_match(&src, &reference, &full, &full).unwrap();
        for (a, b) in out.pixels().zip(src.pixels()) {
            for c in 0..3 {
                assert!((a.0[c] as i32 - b.0[c] as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn ks_bound_on_random_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let src = noise(24, 24, 0, 120, &mut rng);
            let reference = noise(24, 24, 90, 255, &mut rng);
            let ms = Mask::from_fn(24, 24, |i, j| (i * 7 + j * 3) % 5 != 0);
            let mr = Mask::from_fn(24, 24, |i, j| i + j > 10);
            let out = histogram_match(&src, &reference, &ms, &mr).unwrap();
            let ks = ks_distance(&out, &ms, &reference, &mr).unwrap();
            let n = ms.count().min(mr.count()) as f64;
            assert!(ks <= 2.0 / 256.0 + 1.0 / n.sqrt(), "{ks}");
            for ((a, b), &inside) in out.pixels().zip(src.pixels()).zip(ms.data()) {
                if !inside {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn idempotent_within_one_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = noise(20, 20, 0, 255, &mut rng);
        let reference = noise(20, 20, 60, 140, &mut rng);
        let m = Mask::full(20, 20);
        let once = histogram_match(&src, &reference, &m, &m).unwrap();
        let twice = histogram_match(&once, &reference, &m, &m).unwrap();
        for (a, b) in once.pixels().zip(twice.pixels()) {
            for c in 0..3 {
                assert!((a.0[c] as i32 - b.0[c] as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn empty_mask_is_error() {
        let img = RgbImage::new(4, 4);
        let err = histogram_match(&img, &img, &Mask::empty(4, 4), &Mask::full(4, 4)).unwrap_err();
        assert!(matches!(err, Error::EmptyRegion(_)));
    }

    fn lut_ks(src: &[u64; 256], reference: &[u64; 256], lut: &[usize]) -> f64 {
        let mut out = [0u64; 256];
        for (v, &n) in src.iter().enumerate() {
            out[lut[v]] += n;
        }
        let (co, cr) = (cumulative(&out), cumulative(reference));
        (0..256).map(|v| (co[v] as f64 / co[255] as f64 - cr[v] as f64 / cr[255] as f64).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn lut_is_optimal_on_small_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (mut src, mut reference) = ([0u64; 256], [0u64; 256]);
            for v in 0..4 {
                src[v] = rng.gen_range(0..6);
            }
            for r in 0..6 {
                reference[r] = rng.gen_range(0..6);
            }
            src[rng.gen_range(0..4)] += 1;
            reference[rng.gen_range(0..6)] += 1;
            let got = matching_lut(&src, &reference).map(|r| r as usize);
            let mut best = f64::INFINITY;
            // Every monotone map of levels 0..4 into 0..7.
            for a in 0..7 {
                for b in a..7 {
                    for c in b..7 {
                        for d in c..7 {
                            let mut lut = [d; 256];
                            lut[..4].copy_from_slice(&[a, b, c, d]);
                            best = best.min(lut_ks(&src, &reference, &lut));
                        }
                    }
                }
            }
            assert!((lut_ks(&src, &reference, &got) - best).abs() < 1e-12, "{src:?} {reference:?}");
            assert!(got.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
