use super::Tensor;
use crate::error::{Error, Result};

/// Central-difference step used by [`gradcheck`].
pub const FD_STEP: f64 = 1e-5;

/// Entries whose analytic and numeric gradients are both below this are
/// compared in absolute rather than relative terms.
const REL_FLOOR: f64 = 1e-6;

/// A kernel with a hand-written vector-Jacobian product.
pub trait Differentiable {
    fn name(&self) -> &str;

    fn forward(&self, input: &Tensor) -> Result<Tensor>;

    /// `cotangentᵀ · ∂forward/∂input`, shaped like `input`.
    fn vjp(&self, input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
        let _ = (input, cotangent);
        Err(Error::Capability(format!("{} has no vector-Jacobian product", self.name())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub num_entries_checked: usize,
    pub passed: bool,
}

/// Compares the analytic VJP of `f` against central finite differences of
/// `⟨f(input), cotangent⟩`, one input entry at a time, with step [`FD_STEP`].
pub fn gradcheck(
    f: &dyn Differentiable,
    input: &Tensor,
    cotangent: &Tensor,
    tol: f64,
) -> Result<GradCheckReport> {
    gradcheck_with_step(f, input, cotangent, tol, FD_STEP)
}

pub fn gradcheck_with_step(
    f: &dyn Differentiable,
    input: &Tensor,
    cotangent: &Tensor,
    tol: f64,
    h: f64,
) -> Result<GradCheckReport> {
    let out = f.forward(input)?;
    if out.shape() != cotangent.shape() {
        return Err(Error::Dimension(format!(
            "cotangent shape {:?} does not match output shape {:?}",
            cotangent.shape(),
            out.shape()
        )));
    }
    let analytic = f.vjp(input, cotangent)?;
    if analytic.shape() != input.shape() {
        return Err(Error::Dimension(format!(
            "{}: VJP returned shape {:?} for input {:?}",
            f.name(),
            analytic.shape(),
            input.shape()
        )));
    }

    let mut probe = input.clone();
    let mut max_abs_err: f64 = 0.0;
    let mut max_rel_err: f64 = 0.0;
    for i in 0..input.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f.forward(&probe)?.dot(cotangent)?;
        probe.data_mut()[i] = orig - h;
        let minus = f.forward(&probe)?.dot(cotangent)?;
        probe.data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.data()[i];
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
        max_abs_err = max_abs_err.max(abs);
        max_rel_err = max_rel_err.max(rel);
    }

    Ok(GradCheckReport {
        max_abs_err,
        max_rel_err,
        num_entries_checked: input.numel(),
        passed: max_rel_err <= tol,
    })
}
