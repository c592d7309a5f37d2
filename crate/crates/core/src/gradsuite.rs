//! Registered finite-difference checks, shared by the `gradcheck` CLI
//! command and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{AttentionArg, AttentionInputs, AttentionParams, CrossAttentionKernel, SowAttentionKernel};
use crate::error::{Error, Result};
use crate::geometry::{identity_grid, BilinearSample, LandmarkSet, Point};
use crate::network::{faenc_forward, mtm_forward, DecoderArg, Generator, GeneratorConfig, MadecKernel, MadecLossKernel};
use crate::tensor::{gradcheck, Differentiable, MatmulRight, SoftmaxRows, Tensor};

/// Kernel names accepted by [`run_suite`].
pub const KERNELS: [&str; 7] =
    ["bilinear_sample", "cross_attention", "sow_attention", "softmax_rows", "matmul", "madec", "madec_makeup_loss"];

/// Random instances per kernel and argument.
pub const DEFAULT_INSTANCES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub kernel: String,
    pub argument: String,
    pub instance: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub entries: usize,
    pub passed: bool,
}

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

/// Well-spread landmarks: a jittered ring around the map center.
fn spread_landmarks(n: usize, h: usize, w: usize, rng: &mut impl Rng) -> LandmarkSet {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let pts = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64 * std::f64::consts::TAU;
            let r = if k % 2 == 0 { 0.35 } else { 0.2 };
            let x = cx + r * w as f64 * t.cos() + rng.gen_range(-0.3..0.3);
            let y = cy + r * h as f64 * t.sin() + rng.gen_range(-0.3..0.3);
            Point::new(x, y)
        })
        .collect();
    LandmarkSet::new(pts, w, h).expect("ring fits in the map")
}

fn attention_inputs(h: usize, w: usize, c: usize, n: usize, rng: &mut impl Rng) -> AttentionInputs {
    AttentionInputs {
        x: random(&[h, w, c], rng),
        y: random(&[h, w, c], rng),
        x_lm: spread_landmarks(n, h, w, rng),
        y_lm: spread_landmarks(n, h, w, rng),
        params: AttentionParams::random(c, 2 * n, 0.5, rng),
    }
}

fn record(kernel: &str, argument: &str, instance: usize, f: &dyn Differentiable, input: &Tensor, cot: &Tensor, tol: f64) -> Result<SuiteResult> {
    let r = gradcheck(f, input, cot, tol)?;
    Ok(SuiteResult {
        kernel: kernel.into(),
        argument: argument.into(),
        instance,
        max_abs_err: r.max_abs_err,
        max_rel_err: r.max_rel_err,
        entries: r.num_entries_checked,
        passed: r.passed,
    })
}

fn face_landmarks(res: usize, dx: f64) -> LandmarkSet {
    let s = res as f64 / 64.0;
    let pts = [
        (8.0, 16.0), (10.0, 40.0), (32.0, 56.0), (54.0, 40.0), (56.0, 16.0),
        (14.0, 22.0), (20.0, 19.0), (26.0, 22.0), (20.0, 25.0),
        (38.0, 22.0), (44.0, 19.0), (50.0, 22.0), (44.0, 25.0),
        (24.0, 44.0), (32.0, 41.0), (40.0, 44.0), (32.0, 48.0),
    ];
    LandmarkSet::new(pts.iter().map(|&(x, y)| Point::new((x + dx) * s, y * s)).collect(), res, res).expect("fits")
}

/// Runs every registered check for `kernel`, `instances` random draws per
/// differentiable argument, seeded from `seed`.
pub fn run_suite(kernel: &str, tol: f64, instances: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::new();
    for inst in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(inst as u64));
        match kernel {
            "bilinear_sample" => {
                let (h, w) = (5, 6);
                let jitter = random(&[h, w, 2], &mut rng).scale(1.7);
                let grid = identity_grid(h, w).add(&jitter)?;
                let f = BilinearSample { grid };
                let img = random(&[4, 5, 2], &mut rng);
                out.push(record(kernel, "image", inst, &f, &img, &random(&[h, w, 2], &mut rng), tol)?);
            }
            "cross_attention" => {
                let inputs = attention_inputs(3, 4, 3, 4, &mut rng);
                let cot = random(&[3, 4, 3], &mut rng);
                for wrt in AttentionArg::ALL {
                    let f = CrossAttentionKernel { inputs: inputs.clone(), wrt };
                    out.push(record(kernel, wrt.name(), inst, &f, inputs.get(wrt), &cot, tol)?);
                }
            }
            "sow_attention" => {
                let inputs = attention_inputs(8, 8, 2, 5, &mut rng);
                let cot = random(&[8, 8, 2], &mut rng);
                for wrt in AttentionArg::ALL {
                    let f = SowAttentionKernel { inputs: inputs.clone(), window: 4, wrt };
                    out.push(record(kernel, wrt.name(), inst, &f, inputs.get(wrt), &cot, tol)?);
                }
            }
            "softmax_rows" => {
                let a = random(&[4, 6], &mut rng).scale(3.0);
                out.push(record(kernel, "input", inst, &SoftmaxRows, &a, &random(&[4, 6], &mut rng), tol)?);
            }
            "matmul" => {
                let f = MatmulRight { rhs: random(&[5, 3], &mut rng) };
                let a = random(&[4, 5], &mut rng);
                out.push(record(kernel, "lhs", inst, &f, &a, &random(&[4, 3], &mut rng), tol)?);
            }
            "madec" | "madec_makeup_loss" => {
                let g = Generator::new(GeneratorConfig { seed: rng.gen(), ..GeneratorConfig::tiny() })?;
                let (xh, xl) = faenc_forward(&random(&[16, 16, 3], &mut rng), &g)?;
                let (yh, yl) = faenc_forward(&random(&[16, 16, 3], &mut rng), &g)?;
                let (gh, gl) = mtm_forward(&xh, &xl, &yh, &yl, &face_landmarks(16, 0.0), &face_landmarks(16, 1.5), &g)?;
                let target = random(&[16, 16, 3], &mut rng);
                let cot = random(&[16, 16, 3], &mut rng);
                for (wrt, name) in [(DecoderArg::GammaHigh, "gamma_high"), (DecoderArg::GammaLow, "gamma_low")] {
                    let dec = MadecKernel {
                        generator: g.clone(),
                        x_high: xh.clone(),
                        x_low: xl.clone(),
                        gamma_high: gh.clone(),
                        gamma_low: gl.clone(),
                        wrt,
                    };
                    let input = dec.input().clone();
                    if kernel == "madec" {
                        out.push(record(kernel, name, inst, &dec, &input, &cot, tol)?);
                    } else {
                        let f = MadecLossKernel { decoder: dec, target: target.clone() };
                        out.push(record(kernel, name, inst, &f, &input, &Tensor::ones([1]), tol)?);
                    }
                }
            }
            other => {
                return Err(Error::Config(format!("unknown kernel `{other}` (known: {})", KERNELS.join(", "))));
            }
        }
    }
    Ok(out)
}
