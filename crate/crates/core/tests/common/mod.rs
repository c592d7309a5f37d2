//! Helpers and reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use makeup_core::attention::AttentionParams;
use makeup_core::geometry::{alignment_grid, bilinear_sample, embedding_map, LandmarkSet, Point};
use makeup_core::Tensor;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

/// Jittered ring of `n` points around the map center.
pub fn ring_landmarks(n: usize, h: usize, w: usize, rng: &mut impl Rng) -> LandmarkSet {
    let pts = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64 * std::f64::consts::TAU;
            let r = if k % 2 == 0 { 0.35 } else { 0.22 };
            Point::new(
                (w as f64 - 1.0) / 2.0 + r * w as f64 * t.cos() + rng.gen_range(-0.3..0.3),
                (h as f64 - 1.0) / 2.0 + r * h as f64 * t.sin() + rng.gen_range(-0.3..0.3),
            )
        })
        .collect();
    LandmarkSet::new(pts, w, h).unwrap()
}

fn at(t: &Tensor, i: usize, j: usize) -> &[f64] {
    let s = t.shape();
    let c = s[2];
    &t.data()[(i * s[1] + j) * c..(i * s[1] + j + 1) * c]
}

/// `row · M` for a `d × c` matrix.
fn row_times(row: &[f64], m: &Tensor) -> Vec<f64> {
    let c = m.shape()[1];
    let mut out = vec![0.0; c];
    for (a, &r) in row.iter().enumerate() {
        for b in 0..c {
            out[b] += r * m.data()[a * c + b];
        }
    }
    out
}

/// Softmax-weighted sum of `values` with scores `q · k / √C`.
fn attend_one(q: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>]) -> Vec<f64> {
    let scale = 1.0 / (q.len() as f64).sqrt();
    let scores: Vec<f64> = keys.iter().map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut out = vec![0.0; values[0].len()];
    for (wt, v) in e.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += wt / z * x;
        }
    }
    out
}

/// Full cross-attention as a plain double loop over query and key pixels.
pub fn naive_cross_attention(x: &Tensor, y: &Tensor, x_lm: &LandmarkSet, y_lm: &LandmarkSet, p: &AttentionParams) -> Tensor {
    let s = x.shape();
    let (h, w, c) = (s[0], s[1], s[2]);
    let xe = x.concat_last(&embedding_map(h, w, x_lm.points()).unwrap()).unwrap();
    let ye = y.concat_last(&embedding_map(h, w, y_lm.points()).unwrap()).unwrap();
    let mut keys = Vec::new();
    let mut values = Vec::new();
    for i in 0..h {
        for j in 0..w {
            keys.push(row_times(at(&ye, i, j), p.k()));
            values.push(row_times(at(y, i, j), p.v()));
        }
    }
    let mut out = Vec::with_capacity(h * w * c);
    for i in 0..h {
        for j in 0..w {
            out.extend(attend_one(&row_times(at(&xe, i, j), p.q()), &keys, &values));
        }
    }
    Tensor::new([h, w, c], out).unwrap()
}

/// Sow-Attention written out window by window: the aligned reference is
/// edge-padded by the scheme shift, cut into `S×S` tiles, each in-image
/// query attends to its tile, and the four scheme outputs are blended with
/// tent weights measured from the tile center.
pub fn sow_oracle(x: &Tensor, y: &Tensor, x_lm: &LandmarkSet, y_lm: &LandmarkSet, size: usize, p: &AttentionParams) -> Tensor {
    let s = x.shape();
    let (h, w, c) = (s[0], s[1], s[2]);
    let y_al = bilinear_sample(y, &alignment_grid(y_lm, x_lm, h, w).unwrap()).unwrap();
    let emb = embedding_map(h, w, x_lm.points()).unwrap();
    let xe = x.concat_last(&emb).unwrap();
    let ye = y_al.concat_last(&emb).unwrap();
    let half = size / 2;
    let mut out = vec![0.0; h * w * c];
    for (sx, sy) in [(0, 0), (half, 0), (0, half), (half, half)] {
        let (ph, pw) = (h + 2 * sy, w + 2 * sx);
        // Padded key/value planes by edge replication.
        let clamp_at = |t: &Tensor, pi: usize, pj: usize| -> Vec<f64> {
            let i = (pi as isize - sy as isize).clamp(0, h as isize - 1) as usize;
            let j = (pj as isize - sx as isize).clamp(0, w as isize - 1) as usize;
            at(t, i, j).to_vec()
        };
        for ty in (0..ph).step_by(size) {
            for tx in (0..pw).step_by(size) {
                let mut keys = Vec::new();
                let mut values = Vec::new();
                for a in ty..ty + size {
                    for b in tx..tx + size {
                        keys.push(row_times(&clamp_at(&ye, a, b), p.k()));
                        values.push(row_times(&clamp_at(&y_al, a, b), p.v()));
                    }
                }
                let cy = ty as f64 + (size as f64 - 1.0) / 2.0 - sy as f64;
                let cx = tx as f64 + (size as f64 - 1.0) / 2.0 - sx as f64;
                for a in ty..ty + size {
                    for b in tx..tx + size {
                        let (i, j) = (a as isize - sy as isize, b as isize - sx as isize);
                        if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
                            continue;
                        }
                        let (i, j) = (i as usize, j as usize);
                        let g = attend_one(&row_times(at(&xe, i, j), p.q()), &keys, &values);
                        let sz = size as f64;
                        let wt = (sz - 2.0 * (j as f64 - cx).abs()) * (sz - 2.0 * (i as f64 - cy).abs()) / (sz * sz);
                        for k in 0..c {
                            out[(i * w + j) * c + k] += wt * g[k];
                        }
                    }
                }
            }
        }
    }
    Tensor::new([h, w, c], out).unwrap()
}

/// Runs the CLI binary, returning (exit code, stdout, stderr).
pub fn makeup<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_makeup")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn arg(p: impl AsRef<Path>) -> String {
    p.as_ref().to_str().expect("utf-8 path").to_string()
}

pub const FACE_TEMPLATE: [(f64, f64); 17] = [
    (8.0, 16.0), (10.0, 40.0), (32.0, 56.0), (54.0, 40.0), (56.0, 16.0),
    (14.0, 22.0), (20.0, 19.0), (26.0, 22.0), (20.0, 25.0),
    (38.0, 22.0), (44.0, 19.0), (50.0, 22.0), (44.0, 25.0),
    (24.0, 44.0), (32.0, 41.0), (40.0, 44.0), (32.0, 48.0),
];

pub struct RandomFace {
    pub image: image::RgbImage,
    pub landmarks: LandmarkSet,
    pub masks: makeup_core::pgt::RegionMasks,
}

/// A 64×64 face from the 17-point template under a random similarity, with
/// ellipse masks and per-region colors drawn from random distributions.
pub fn random_face(rng: &mut impl Rng) -> RandomFace {
    use makeup_core::mask::Mask;
    use makeup_core::pgt::RegionMasks;
    let scale = rng.gen_range(0.85..1.05);
    let (dx, dy) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let map = |(x, y): (f64, f64)| (32.0 + (x - 32.0) * scale + dx, 32.0 + (y - 32.0) * scale + dy);
    let inside = |r: usize, c: usize, center: (f64, f64), rx: f64, ry: f64| {
        let (cx, cy) = map(center);
        let (u, v) = ((c as f64 - cx) / (rx * scale), (r as f64 - cy) / (ry * scale));
        u * u + v * v <= 1.0
    };
    let face = |r, c| inside(r, c, (32.0, 32.0), 24.5, 25.0);
    let eye = |r, c| inside(r, c, (20.0, 22.0), 6.5, 3.5) || inside(r, c, (44.0, 22.0), 6.5, 3.5);
    let lip = |r, c| face(r, c) && inside(r, c, (32.0, 44.5), 8.5, 4.0);
    let landmarks = LandmarkSet::new(
        FACE_TEMPLATE.iter().map(|&p| {
            let (x, y) = map(p);
            Point::new(x, y)
        }).collect(),
        64,
        64,
    )
    .unwrap();
    let skin = Mask::from_fn(64, 64, |r, c| face(r, c) && !lip(r, c) && !eye(r, c));
    let masks = RegionMasks::with_synthesized_eyeshadow(skin, Mask::from_fn(64, 64, lip), &landmarks).unwrap();
    let mut palette = || {
        let base: [f64; 3] = [rng.gen_range(30.0..220.0), rng.gen_range(30.0..220.0), rng.gen_range(30.0..220.0)];
        (base, rng.gen_range(4.0..40.0))
    };
    let regions = [palette(), palette(), palette(), palette()];
    let image = image::RgbImage::from_fn(64, 64, |c, r| {
        let (r, c) = (r as usize, c as usize);
        let k = if masks.get(makeup_core::pgt::Region::Lip).get(r, c) {
            1
        } else if masks.get(makeup_core::pgt::Region::Eyeshadow).get(r, c) {
            2
        } else if face(r, c) {
            0
        } else {
            3
        };
        let (base, spread) = regions[k];
        image::Rgb(base.map(|b| (b + rng.gen_range(-spread..spread)).round().clamp(0.0, 255.0) as u8))
    });
    RandomFace { image, landmarks, masks }
}
