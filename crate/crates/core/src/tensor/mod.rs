//! Dense row-major `f64` tensors and the handful of kernels the rest of the
//! crate is built on.
//!
//! There is no autodiff tape. Kernels that need gradients implement
//! [`Differentiable`] by hand and are validated with [`gradcheck`].

mod gradcheck;

pub use gradcheck::{gradcheck, gradcheck_with_step, Differentiable, GradCheckReport, FD_STEP};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {numel} values but {} were given",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Tensor { shape, data: vec![value; numel] }
    }

    /// Builds a tensor by evaluating `f` at each flat (row-major) index.
    pub fn from_fn(shape: impl Into<Vec<usize>>, f: impl FnMut(usize) -> f64) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Tensor { shape, data: (0..numel).map(f).collect() }
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn([n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    /// Interprets the tensor as a matrix whose last axis is the column axis.
    pub fn as_matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape.split_last() {
            Some((&cols, rest)) => Ok((rest.iter().product(), cols)),
            None => Err(Error::Dimension("scalar tensor has no matrix view".into())),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [m, n] => Ok((m, n)),
            _ => Err(Error::Dimension(format!("expected a matrix, got shape {:?}", self.shape))),
        }
    }

    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::Dimension(format!("expected an H×W×C tensor, got shape {:?}", self.shape))),
        }
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn at3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    fn check_same_shape(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.check_same_shape(other, "zip_map")?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// Sum of elementwise products, i.e. the Frobenius inner product.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::new([n, m], out)
    }

    /// Concatenates two tensors along their last axis. Leading axes must agree.
    pub fn concat_last(&self, other: &Tensor) -> Result<Tensor> {
        let (rows_a, ca) = self.as_matrix_dims()?;
        let (rows_b, cb) = other.as_matrix_dims()?;
        let lead_a = &self.shape[..self.ndim() - 1];
        let lead_b = &other.shape[..other.ndim() - 1];
        if lead_a != lead_b || rows_a != rows_b {
            return Err(Error::Dimension(format!(
                "concat: leading axes {lead_a:?} and {lead_b:?} differ"
            )));
        }
        let mut data = Vec::with_capacity(rows_a * (ca + cb));
        for r in 0..rows_a {
            data.extend_from_slice(&self.data[r * ca..(r + 1) * ca]);
            data.extend_from_slice(&other.data[r * cb..(r + 1) * cb]);
        }
        let mut shape = lead_a.to_vec();
        shape.push(ca + cb);
        Tensor::new(shape, data)
    }

    /// Splits the last axis at `at`, the inverse of [`Tensor::concat_last`].
    pub fn split_last(&self, at: usize) -> Result<(Tensor, Tensor)> {
        let (rows, c) = self.as_matrix_dims()?;
        if at > c {
            return Err(Error::Dimension(format!("split at {at} beyond {c} channels")));
        }
        let mut a = Vec::with_capacity(rows * at);
        let mut b = Vec::with_capacity(rows * (c - at));
        for r in 0..rows {
            a.extend_from_slice(&self.data[r * c..r * c + at]);
            b.extend_from_slice(&self.data[r * c + at..(r + 1) * c]);
        }
        let lead = &self.shape[..self.ndim() - 1];
        let mut sa = lead.to_vec();
        sa.push(at);
        let mut sb = lead.to_vec();
        sb.push(c - at);
        Ok((Tensor::new(sa, a)?, Tensor::new(sb, b)?))
    }
}

/// Standard matrix product of an `m×k` and a `k×n` matrix.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::Dimension(format!("matmul: {m}×{k} by {k2}×{n}")));
    }
    let mut out = vec![0.0; m * n];
    matmul_into(a.data(), b.data(), &mut out, m, k, n);
    Tensor::new([m, n], out)
}

/// `out = a · b` on raw row-major slices. `out` is overwritten.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (o, &bpj) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bpj;
            }
        }
    }
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(a: &Tensor) -> Result<Tensor> {
    let (_, n) = a.dims2()?;
    let mut out = a.data().to_vec();
    if n > 0 {
        for row in out.chunks_mut(n) {
            softmax_in_place(row);
        }
    }
    Tensor::new(a.shape().to_vec(), out)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    let inv = total.recip();
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Backward of a softmax row: `ds = p ⊙ (dp − ⟨dp, p⟩)`, written into `dp`.
pub(crate) fn softmax_row_vjp(p: &[f64], dp: &mut [f64]) {
    let inner: f64 = p.iter().zip(dp.iter()).map(|(a, b)| a * b).sum();
    for (g, &pi) in dp.iter_mut().zip(p) {
        *g = pi * (*g - inner);
    }
}

/// `softmax_rows` as a [`Differentiable`] kernel.
#[derive(Debug, Clone, Copy, Default)]
pub struct SoftmaxRows;

impl Differentiable for SoftmaxRows {
    fn name(&self) -> &str {
        "softmax_rows"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        softmax_rows(input)
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let p = softmax_rows(input)?;
        let (_, n) = p.dims2()?;
        let mut grad = cotangent.data().to_vec();
        if n > 0 {
            for (g, pr) in grad.chunks_mut(n).zip(p.data().chunks(n)) {
                softmax_row_vjp(pr, g);
            }
        }
        Tensor::new(input.shape().to_vec(), grad)
    }
}

/// `x ↦ x · rhs` for a fixed right operand.
#[derive(Debug, Clone)]
pub struct MatmulRight {
    pub rhs: Tensor,
}

impl Differentiable for MatmulRight {
    fn name(&self) -> &str {
        "matmul"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        matmul(input, &self.rhs)
    }

    fn vjp(&self, _input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        matmul(cotangent, &self.rhs.transpose()?)
    }
}

/// Elementwise square.
#[derive(Debug, Clone, Copy, Default)]
pub struct Square;

impl Differentiable for Square {
    fn name(&self) -> &str {
        "square"
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(input.map(|v| v * v))
    }

    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        input.zip_map(cotangent, |x, g| 2.0 * x * g)
    }
}
