//! Pseudo ground truth: per-region color matching, detail warping and
//! annealed blending.

mod histogram;
mod regions;
mod schedule;

pub use histogram::{histogram_match, ks_distance};
pub use regions::{synthesize_eyeshadow, Region, RegionMasks, EYESHADOW_RING_FRACTION};
pub use schedule::{schedule_eval, BlendSchedule, PiecewiseLinear, RegionAlphas, SCHEDULE_SCHEMA_VERSION};

use image::RgbImage;

use crate::error::{Error, Result};
use crate::geometry::{alignment_grid, bilinear_sample, FaceLayout, LandmarkSet};
use crate::imaging::{quantize, rgb_to_tensor};
use crate::tensor::Tensor;

fn check_landmarks(img: &RgbImage, lm: &LandmarkSet, what: &str) -> Result<()> {
    let (w, h) = img.dimensions();
    if lm.width() != w as usize || lm.height() != h as usize {
        return Err(Error::Dimension(format!(
            "{what} landmarks are for a {}×{} image but the image is {w}×{h}",
            lm.width(),
            lm.height()
        )));
    }
    Ok(())
}

/// Warps `reference_img` so the region's reference landmarks land on the
/// source landmarks. Returns the full frame as an `H×W×3` tensor of 0–255
/// values.
pub fn warp_region(
    source_img: &RgbImage,
    reference_img: &RgbImage,
    src_lm: &LandmarkSet,
    ref_lm: &LandmarkSet,
    region: Region,
) -> Result<Tensor> {
    check_landmarks(source_img, src_lm, "source")?;
    check_landmarks(reference_img, ref_lm, "reference")?;
    if src_lm.len() != ref_lm.len() {
        return Err(Error::Landmarks(format!(
            "source has {} landmarks, reference has {}",
            src_lm.len(),
            ref_lm.len()
        )));
    }
    let layout = FaceLayout::for_count(src_lm.len())?;
    let idx = region.landmark_indices(&layout, src_lm.len());
    let (w, h) = source_img.dimensions();
    let grid = alignment_grid(&ref_lm.subset(&idx)?, &src_lm.subset(&idx)?, h as usize, w as usize)?;
    bilinear_sample(&rgb_to_tensor(reference_img), &grid)
}

/// Intermediate images of one PGT synthesis, kept for inspection and tests.
#[derive(Debug, Clone)]
pub struct PgtParts {
    pub output: RgbImage,
    pub matched: Vec<(Region, RgbImage)>,
    pub warped: Vec<(Region, Tensor)>,
}

/// Synthesizes the pseudo ground truth for transferring `y`'s makeup onto `x`.
///
/// Inside each region of `masks_x` the output is
/// `α·warp_region(y) + (1 − α)·histogram_match(x → y)`, rounded to 8 bits.
/// Pixels outside every region are copied from `x`. Regions whose source
/// mask is empty are skipped.
#[allow(clippy::too_many_arguments)]
pub fn make_pgt(
    x: &RgbImage,
    y: &RgbImage,
    masks_x: &RegionMasks,
    masks_y: &RegionMasks,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    alphas: RegionAlphas,
) -> Result<RgbImage> {
    Ok(make_pgt_parts(x, y, masks_x, masks_y, x_lm, y_lm, alphas)?.output)
}

#[allow(clippy::too_many_arguments)]
pub fn make_pgt_parts(
    x: &RgbImage,
    y: &RgbImage,
    masks_x: &RegionMasks,
    masks_y: &RegionMasks,
    x_lm: &LandmarkSet,
    y_lm: &LandmarkSet,
    alphas: RegionAlphas,
) -> Result<PgtParts> {
    alphas.validate()?;
    for (img, m, what) in [(x, masks_x, "source"), (y, masks_y, "reference")] {
        let (w, h) = img.dimensions();
        if m.width() != w as usize || m.height() != h as usize {
            return Err(Error::Dimension(format!(
                "{what} masks are {}×{} but the image is {w}×{h}",
                m.width(),
                m.height()
            )));
        }
    }
    let mut out = x.clone();
    let mut parts = PgtParts { output: RgbImage::new(0, 0), matched: Vec::new(), warped: Vec::new() };
    for region in Region::ALL {
        let mx = masks_x.get(region);
        if mx.is_empty() {
            continue;
        }
        let my = masks_y.get(region);
        if my.is_empty() {
            return Err(Error::EmptyRegion(format!("reference {region} mask is empty but the source one is not")));
        }
        let hm = histogram_match(x, y, mx, my)?;
        let warped = warp_region(x, y, x_lm, y_lm, region)?;
        let a = alphas.get(region);
        let (hm_raw, wd) = (hm.as_raw(), warped.data());
        let dst: &mut [u8] = &mut out;
        for (k, &inside) in mx.data().iter().enumerate() {
            if inside {
                for c in 0..3 {
                    let i = 3 * k + c;
                    dst[i] = quantize(a * wd[i] + (1.0 - a) * hm_raw[i] as f64);
                }
            }
        }
        parts.matched.push((region, hm));
        parts.warped.push((region, warped));
    }
    parts.output = out;
    Ok(parts)
}

/// The `α = 0` composite: histogram-matched colors inside each region,
/// source pixels elsewhere.
pub fn histogram_composite(x: &RgbImage, y: &RgbImage, masks_x: &RegionMasks, masks_y: &RegionMasks) -> Result<RgbImage> {
    let mut out = x.clone();
    for region in Region::ALL {
        let mx = masks_x.get(region);
        if mx.is_empty() {
            continue;
        }
        let hm = histogram_match(x, y, mx, masks_y.get(region))?;
        for (k, &inside) in mx.data().iter().enumerate() {
            if inside {
                let (col, row) = ((k % mx.width()) as u32, (k / mx.width()) as u32);
                out.put_pixel(col, row, *hm.get_pixel(col, row));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::mask::Mask;
    use image::Rgb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn face(dx: f64) -> LandmarkSet {
        let pts = [
            (8.0, 16.0), (10.0, 40.0), (32.0, 56.0), (54.0, 40.0), (56.0, 16.0),
            (14.0, 22.0), (20.0, 19.0), (26.0, 22.0), (20.0, 25.0),
            (38.0, 22.0), (44.0, 19.0), (50.0, 22.0), (44.0, 25.0),
            (24.0, 44.0), (32.0, 41.0), (40.0, 44.0), (32.0, 48.0),
        ];
        LandmarkSet::new(pts.iter().map(|&(x, y)| Point::new(x + dx, y)).collect(), 64, 64).unwrap()
    }

    fn masks() -> RegionMasks {
        let lip = Mask::from_fn(64, 64, |i, j| (41..49).contains(&i) && (24..41).contains(&j));
        let eyes = Mask::from_fn(64, 64, |i, j| (16..20).contains(&i) && ((12..28).contains(&j) || (36..52).contains(&j)));
        let skin = Mask::from_fn(64, 64, |i, j| (10..58).contains(&i) && (8..56).contains(&j)).minus(&lip).minus(&eyes);
        RegionMasks::new(skin, lip, eyes).unwrap()
    }

    fn noise(rng: &mut impl Rng) -> RgbImage {
        RgbImage::from_fn(64, 64, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]))
    }

    fn checkerboard(cell: u32) -> RgbImage {
        RgbImage::from_fn(64, 64, |x, y| if (x / cell + y / cell) % 2 == 0 { Rgb([230, 40, 40]) } else { Rgb([20, 20, 200]) })
    }

    #[test]
    fn identical_landmarks_warp_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = (noise(&mut rng), noise(&mut rng));
        for r in Region::ALL {
            let w = warp_region(&x, &y, &face(0.0), &face(0.0), r).unwrap();
            assert_eq!(w, rgb_to_tensor(&y));
        }
    }

    #[test]
    fn translated_landmarks_translate_the_reference() {
        let y = checkerboard(4);
        let x = RgbImage::new(64, 64);
        // Reference face sits 3 pixels right of the source face.
        let w = warp_region(&x, &y, &face(0.0), &face(3.0), Region::Skin).unwrap();
        for i in 0..64 {
            for j in 0..61 {
                for c in 0..3 {
                    let want = y.get_pixel(j as u32 + 3, i as u32).0[c] as f64;
                    assert!((w.at3(i, j, c) - want).abs() < 1e-6, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn alpha_zero_is_histogram_composite() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, y) = (noise(&mut rng), noise(&mut rng));
        let m = masks();
        let pgt = make_pgt(&x, &y, &m, &m, &face(0.0), &face(2.0), RegionAlphas::uniform(0.0)).unwrap();
        assert_eq!(pgt, histogram_composite(&x, &y, &m, &m).unwrap());
    }

    #[test]
    fn alpha_one_identical_landmarks_copies_reference_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x, y) = (noise(&mut rng), noise(&mut rng));
        let m = masks();
        let pgt = make_pgt(&x, &y, &m, &m, &face(0.0), &face(0.0), RegionAlphas::uniform(1.0)).unwrap();
        let covered = m.covered();
        for (k, ((p, &xs), &ys)) in pgt.pixels().zip(x.pixels()).zip(y.pixels()).enumerate() {
            let want = if covered.data()[k] { ys } else { xs };
            assert_eq!(*p, want);
        }
    }

    #[test]
    fn half_blend_of_constants() {
        let x = RgbImage::from_pixel(16, 16, Rgb([100; 3]));
        let y = RgbImage::from_pixel(16, 16, Rgb([200; 3]));
        let pts17: Vec<Point> = (0..17).map(|k| Point::new(1.0 + (k % 5) as f64 * 3.0, 1.0 + (k / 5) as f64 * 4.0)).collect();
        let lm = LandmarkSet::new(pts17, 16, 16).unwrap();
        let m = RegionMasks::new(Mask::full(16, 16), Mask::empty(16, 16), Mask::empty(16, 16)).unwrap();
        let pgt = make_pgt(&x, &y, &m, &m, &lm, &lm, RegionAlphas::uniform(0.5)).unwrap();
        // The matched colors already equal the reference, so the blend of
        // the two reference-derived terms stays at 200.
        assert!(pgt.pixels().all(|p| p.0 == [200; 3]));
    }

    #[test]
    fn convex_hull_and_untouched_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = masks();
        let covered = m.covered();
        for _ in 0..3 {
            let (x, y) = (noise(&mut rng), noise(&mut rng));
            let a = RegionAlphas { skin: rng.gen(), lip: rng.gen(), eyeshadow: rng.gen() };
            let parts = make_pgt_parts(&x, &y, &m, &m, &face(0.0), &face(1.5), a).unwrap();
            for (k, (p, xs)) in parts.output.pixels().zip(x.pixels()).enumerate() {
                if !covered.data()[k] {
                    assert_eq!(p, xs);
                }
            }
            for ((region, hm), (_, warped)) in parts.matched.iter().zip(&parts.warped) {
                let mx = m.get(*region);
                for (k, &inside) in mx.data().iter().enumerate() {
                    if !inside {
                        continue;
                    }
                    for c in 0..3 {
                        let i = 3 * k + c;
                        let cands = [hm.as_raw()[i] as f64, warped.data()[i], x.as_raw()[i] as f64];
                        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let v = parts.output.as_raw()[i] as f64;
                        assert!(v >= lo - 0.5 && v <= hi + 0.5);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_reference_region_is_error() {
        let x = RgbImage::new(64, 64);
        let mx = masks();
        let my = RegionMasks::new(mx.get(Region::Skin).clone(), Mask::empty(64, 64), mx.get(Region::Eyeshadow).clone()).unwrap();
        let err = make_pgt(&x, &x, &mx, &my, &face(0.0), &face(0.0), RegionAlphas::uniform(0.3)).unwrap_err();
        assert!(matches!(err, Error::EmptyRegion(_)));
    }
}
