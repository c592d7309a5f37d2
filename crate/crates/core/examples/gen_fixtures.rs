//! Regenerates the synthetic fixture bundle under `tests/fixtures`.
//!
//! ```text
//! cargo run -p makeup-core --example gen_fixtures [OUT_DIR]
//! ```
//!
//! Faces are drawn procedurally from a 17-point template, so the bundle holds
//! no photographs. Goldens are written by the library entry points the CLI
//! calls, except the warp golden, which is a plain clamped pixel shift.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use makeup_core::editing::{EditSpec, EditSpecFile, EditSpecFileEntry, EDIT_SPEC_SCHEMA_VERSION};
use makeup_core::geometry::{LandmarkSet, Point};
use makeup_core::mask::Mask;
use makeup_core::network::{Generator, GeneratorConfig};
use makeup_core::pgt::{histogram_composite, make_pgt, Region, RegionAlphas, RegionMasks};
use makeup_core::pipeline::{edit_transfer, Face};
use makeup_core::Result;

const SIZE: usize = 64;

const TEMPLATE: [(f64, f64); 17] = [
    (8.0, 16.0), (10.0, 40.0), (32.0, 56.0), (54.0, 40.0), (56.0, 16.0),
    (14.0, 22.0), (20.0, 19.0), (26.0, 22.0), (20.0, 25.0),
    (38.0, 22.0), (44.0, 19.0), (50.0, 22.0), (44.0, 25.0),
    (24.0, 44.0), (32.0, 41.0), (40.0, 44.0), (32.0, 48.0),
];

/// Placement and coloring of one drawn face.
struct FaceStyle {
    dx: f64,
    dy: f64,
    scale: f64,
    skin: [f64; 3],
    lip: [f64; 3],
    /// Painted over the eye-shadow ring when present.
    shadow: Option<[f64; 3]>,
    /// Stripe period for the lip/shadow detail texture.
    stripes: f64,
    seed: u64,
}

impl FaceStyle {
    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (32.0 + (x - 32.0) * self.scale + self.dx, 32.0 + (y - 32.0) * self.scale + self.dy)
    }

    fn landmarks(&self) -> LandmarkSet {
        let pts = TEMPLATE.iter().map(|&p| {
            let (x, y) = self.map(p);
            Point::new(x, y)
        });
        LandmarkSet::new(pts.collect(), SIZE, SIZE).expect("template fits")
    }

    fn in_ellipse(&self, row: usize, col: usize, center: (f64, f64), rx: f64, ry: f64) -> bool {
        let (cx, cy) = self.map(center);
        let (u, v) = ((col as f64 - cx) / (rx * self.scale), (row as f64 - cy) / (ry * self.scale));
        u * u + v * v <= 1.0
    }

    fn face(&self, r: usize, c: usize) -> bool {
        self.in_ellipse(r, c, (32.0, 32.0), 24.5, 25.0)
    }

    fn eye(&self, r: usize, c: usize) -> bool {
        self.in_ellipse(r, c, (20.0, 22.0), 6.5, 3.5) || self.in_ellipse(r, c, (44.0, 22.0), 6.5, 3.5)
    }

    fn lip(&self, r: usize, c: usize) -> bool {
        self.in_ellipse(r, c, (32.0, 44.5), 8.5, 4.0)
    }

    fn masks(&self) -> RegionMasks {
        let lip = Mask::from_fn(SIZE, SIZE, |r, c| self.face(r, c) && self.lip(r, c));
        let skin = Mask::from_fn(SIZE, SIZE, |r, c| self.face(r, c) && !self.lip(r, c) && !self.eye(r, c));
        RegionMasks::with_synthesized_eyeshadow(skin, lip, &self.landmarks()).expect("disjoint by construction")
    }

    fn image(&self, masks: &RegionMasks) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lip, shadow) = (masks.get(Region::Lip), masks.get(Region::Eyeshadow));
        let mut img = RgbImage::new(SIZE as u32, SIZE as u32);
        for r in 0..SIZE {
            for c in 0..SIZE {
                let grain: f64 = rng.gen_range(-6.0..6.0);
                let stripe = if ((c as f64 + 0.5 * r as f64) / self.stripes).floor() as i64 % 2 == 0 { 12.0 } else { -12.0 };
                let shade = 1.0 - 0.25 * ((r as f64 - 32.0).powi(2) + (c as f64 - 32.0).powi(2)).sqrt() / 45.0;
                let base = if lip.get(r, c) {
                    self.lip.map(|v| v + stripe)
                } else if self.eye(r, c) && self.face(r, c) {
                    [40.0, 30.0, 28.0]
                } else if self.face(r, c) {
                    let skin = self.skin.map(|v| v * shade);
                    match (self.shadow, shadow.get(r, c)) {
                        (Some(s), true) => [0, 1, 2].map(|k| 0.3 * skin[k] + 0.7 * s[k] + stripe),
                        _ => skin,
                    }
                } else {
                    [60.0 + 1.5 * r as f64, 90.0, 120.0 - c as f64]
                };
                img.put_pixel(c as u32, r as u32, Rgb(base.map(|v| (v + grain).round().clamp(0.0, 255.0) as u8)));
            }
        }
        img
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| makeup_core::Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| makeup_core::Error::io(path, e))
}

struct Written {
    src: Face,
    reference: Face,
    masks_src: RegionMasks,
    masks_ref: RegionMasks,
}

fn write_pair(dir: &Path, src: &FaceStyle, reference: &FaceStyle) -> Result<Written> {
    mkdir(dir)?;
    let (ms, mr) = (src.masks(), reference.masks());
    let (xs, xr) = (src.image(&ms), reference.image(&mr));
    let (ls, lr) = (src.landmarks(), reference.landmarks());
    xs.save(dir.join("src.png")).expect("png");
    xr.save(dir.join("ref.png")).expect("png");
    write(&dir.join("src_landmarks.json"), &ls.to_json())?;
    write(&dir.join("ref_landmarks.json"), &lr.to_json())?;
    ms.save_dir(dir.join("masks_src"))?;
    mr.save_dir(dir.join("masks_ref"))?;
    // Goldens are built from what the CLI will read back, not the drawn values.
    let ls = LandmarkSet::load(dir.join("src_landmarks.json"), SIZE, SIZE)?;
    let lr = LandmarkSet::load(dir.join("ref_landmarks.json"), SIZE, SIZE)?;
    let (ms, mr) = (RegionMasks::load_dir(dir.join("masks_src"), &ls)?, RegionMasks::load_dir(dir.join("masks_ref"), &lr)?);
    Ok(Written {
        src: Face { image: xs, landmarks: ls },
        reference: Face { image: xr, landmarks: lr },
        masks_src: ms,
        masks_ref: mr,
    })
}

fn shifted(img: &RgbImage, dx: i64, dy: i64) -> RgbImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let sx = (x as i64 + dx).clamp(0, w - 1);
        let sy = (y as i64 + dy).clamp(0, h - 1);
        *img.get_pixel(sx as u32, sy as u32)
    })
}

fn main() -> Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    let golden = out.join("golden");
    mkdir(&golden)?;

    let bare = |dx, dy, scale, skin, lip, seed| FaceStyle { dx, dy, scale, skin, lip, shadow: None, stripes: 3.0, seed };
    let pair0 = write_pair(
        &out.join("pair0"),
        &bare(0.0, 0.0, 1.0, [224.0, 182.0, 150.0], [190.0, 120.0, 115.0], 11),
        &FaceStyle { shadow: Some([120.0, 60.0, 150.0]), ..bare(2.0, -1.0, 0.95, [200.0, 150.0, 118.0], [200.0, 30.0, 60.0], 12) },
    )?;
    let pair1 = write_pair(
        &out.join("pair1"),
        &bare(-1.0, 1.0, 1.05, [150.0, 105.0, 80.0], [150.0, 90.0, 85.0], 21),
        &FaceStyle {
            shadow: Some([40.0, 110.0, 90.0]),
            stripes: 2.0,
            ..bare(1.0, 1.0, 0.9, [236.0, 200.0, 175.0], [230.0, 80.0, 120.0], 22)
        },
    )?;

    // Translation warp: reference landmarks are the source landmarks moved by
    // (+3, +2), so the warp is a pure shift of the reference image.
    let warp = out.join("warp");
    mkdir(&warp)?;
    let ls = &pair0.reference.landmarks;
    write(&warp.join("src_landmarks.json"), &ls.to_json())?;
    write(&warp.join("ref_landmarks.json"), &ls.translated(3.0, 2.0)?.to_json())?;
    shifted(&pair0.reference.image, 3, 2).save(golden.join("warp_translate.png")).expect("png");

    // Edit spec: full lip color from pair0's reference, 60 % eye shadow from pair1's.
    let edit = out.join("edit");
    mkdir(&edit)?;
    let lips = pair0.masks_src.get(Region::Lip).clone();
    let eyes = pair0.masks_src.get(Region::Eyeshadow).clone();
    lips.save(edit.join("lips.png"))?;
    eyes.save(edit.join("eyes.png"))?;
    let file = EditSpecFile {
        schema_version: EDIT_SPEC_SCHEMA_VERSION,
        width: SIZE,
        height: SIZE,
        entries: vec![
            EditSpecFileEntry { mask: "lips.png".into(), shade: 1.0, reference: "a".into() },
            EditSpecFileEntry { mask: "eyes.png".into(), shade: 0.6, reference: "b".into() },
        ],
    };
    write(&edit.join("spec.json"), &serde_json::to_string_pretty(&file).expect("spec serializes"))?;
    let over = EditSpecFile {
        entries: vec![
            EditSpecFileEntry { mask: "lips.png".into(), shade: 0.7, reference: "a".into() },
            EditSpecFileEntry { mask: "lips.png".into(), shade: 0.5, reference: "b".into() },
        ],
        ..file
    };
    write(&edit.join("over_budget.json"), &serde_json::to_string_pretty(&over).expect("spec serializes"))?;

    for (name, p) in [("pair0", &pair0), ("pair1", &pair1)] {
        let comp = histogram_composite(&p.src.image, &p.reference.image, &p.masks_src, &p.masks_ref)?;
        comp.save(golden.join(format!("histmatch_{name}.png"))).expect("png");
        let pgt = make_pgt(
            &p.src.image,
            &p.reference.image,
            &p.masks_src,
            &p.masks_ref,
            &p.src.landmarks,
            &p.reference.landmarks,
            RegionAlphas::uniform(0.5),
        )?;
        pgt.save(golden.join(format!("pgt_{name}_a05.png"))).expect("png");
    }

    let g = Generator::new(GeneratorConfig::default())?;
    let spec = EditSpec::load(edit.join("spec.json"))?;
    let refs = vec![("a".to_string(), pair0.reference.clone()), ("b".to_string(), pair1.reference.clone())];
    edit_transfer(&pair0.src, &refs, &spec, &g)?.save(golden.join("edit_pair0.png")).expect("png");

    println!("fixtures written to {}", out.display());
    Ok(())
}
