use super::landmarks::Point;
use super::tps::TpsTransform;
use crate::error::{Error, Result};
use crate::tensor::{Differentiable, Tensor};

/// Source-space sampling location for every output pixel:
/// `grid[i][j] = T(j, i)`, stored as `(x, y)` in an `h×w×2` tensor.
pub fn make_grid(t: &TpsTransform, height: usize, width: usize) -> Tensor {
    let mut data = Vec::with_capacity(height * width * 2);
    for i in 0..height {
        for j in 0..width {
            let p = t.apply(Point::new(j as f64, i as f64));
            data.push(p.x);
            data.push(p.y);
        }
    }
    Tensor::new([height, width, 2], data).expect("grid extents")
}

/// The grid that samples every pixel at its own location.
pub fn identity_grid(height: usize, width: usize) -> Tensor {
    Tensor::from_fn([height, width, 2], |k| {
        let pix = k / 2;
        if k % 2 == 0 {
            (pix % width) as f64
        } else {
            (pix / width) as f64
        }
    })
}

/// Bilinear tap: four neighbor offsets (row-major pixel indices) and weights.
#[derive(Debug, Clone, Copy)]
struct Tap {
    idx: [usize; 4],
    w: [f64; 4],
}

fn tap(x: f64, y: f64, height: usize, width: usize) -> Tap {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    Tap {
        idx: [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1],
        w: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
    }
}

fn check_inputs(image: &Tensor, grid: &Tensor) -> Result<((usize, usize, usize), (usize, usize))> {
    let (hh, ww, cc) = image.dims3()?;
    let (h, w, two) = grid.dims3()?;
    if two != 2 {
        return Err(Error::Dimension(format!("grid must be h×w×2, got {:?}", grid.shape())));
    }
    if hh == 0 || ww == 0 {
        return Err(Error::Dimension("cannot sample an empty image".into()));
    }
    if !grid.is_finite() {
        return Err(Error::Domain("sampling grid contains non-finite coordinates".into()));
    }
    Ok(((hh, ww, cc), (h, w)))
}

/// Bilinear resampling of an `H×W×C` image at the `(x, y)` locations of an
/// `h×w×2` grid. Coordinates outside the image are clamped to the border.
pub fn bilinear_sample(image: &Tensor, grid: &Tensor) -> Result<Tensor> {
    let ((hh, ww, cc), (h, w)) = check_inputs(image, grid)?;
    let src = image.data();
    let mut out = vec![0.0; h * w * cc];
    for (o, g) in out.chunks_mut(cc.max(1)).zip(grid.data().chunks(2)).take(h * w) {
        let t = tap(g[0], g[1], hh, ww);
        for (k, ov) in o.iter_mut().enumerate().take(cc) {
            *ov = t.w[0] * src[t.idx[0] * cc + k]
                + t.w[1] * src[t.idx[1] * cc + k]
                + t.w[2] * src[t.idx[2] * cc + k]
                + t.w[3] * src[t.idx[3] * cc + k];
        }
    }
    Tensor::new([h, w, cc], out)
}

/// Gradient of [`bilinear_sample`] with respect to the image.
pub fn bilinear_sample_vjp(image_shape: &[usize], grid: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
    let image = Tensor::zeros(image_shape.to_vec());
    let ((hh, ww, cc), (h, w)) = check_inputs(&image, grid)?;
    if cotangent.shape() != [h, w, cc] {
        return Err(Error::Dimension(format!(
            "cotangent {:?} does not match sampled shape {:?}",
            cotangent.shape(),
            [h, w, cc]
        )));
    }
    let mut grad = image.into_data();
    for (g, ct) in grid.data().chunks(2).zip(cotangent.data().chunks(cc.max(1))).take(h * w) {
        let t = tap(g[0], g[1], hh, ww);
        for (n, &idx) in t.idx.iter().enumerate() {
            if t.w[n] == 0.0 {
                continue;
            }
            for k in 0..cc {
                grad[idx * cc + k] += t.w[n] * ct[k];
            }
        }
    }
    Tensor::new(image_shape.to_vec(), grad)
}

/// [`bilinear_sample`] over a fixed grid, differentiable in the image.
#[derive(Debug, Clone)]
pub struct BilinearSample {
    pub grid: Tensor,
}

impl Differentiable for BilinearSample {
    fn name(&self) -> &str {
        "bilinear_sample"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        bilinear_sample(input, &self.grid)
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        bilinear_sample_vjp(input.shape(), &self.grid, cotangent)
    }
}
