//! Thin-plate-spline warps in closed form.
//!
//! A transform over `N` control points `c_i` is the `2×(N+3)` matrix
//!
//! ```text
//! T = | a0 a1 a2 u |
//!     | b0 b1 b2 v |
//! ```
//!
//! acting on the lifted point `[1, x, y, φ(‖p−c_1‖), …, φ(‖p−c_N‖)]ᵀ` with
//! `φ(r) = r² log r`. It is solved as `T = [C' 0] Δ_C⁻¹`, where the columns
//! of `Δ_C` are the lifted control points followed by the three side
//! conditions `u·1 = u·C_x = u·C_y = 0` (and the same for `v`).

use super::landmarks::{LandmarkSet, Point};
use crate::error::{Error, Result};

/// Largest accepted 1-norm condition estimate of `Δ_C`.
pub const MAX_CONDITION: f64 = 1e12;

/// Radial basis `r² log r`, extended by continuity with `φ(0) = 0`.
pub fn tps_kernel(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpsTransform {
    /// Row-major `2×(N+3)`.
    params: Vec<f64>,
    source: LandmarkSet,
}

impl TpsTransform {
    pub fn num_controls(&self) -> usize {
        self.source.len()
    }

    pub fn source_controls(&self) -> &LandmarkSet {
        &self.source
    }

    /// The full parameter matrix, row-major `2×(N+3)`.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// `(a0, a1, a2)` and `(b0, b1, b2)`.
    pub fn affine(&self) -> ([f64; 3], [f64; 3]) {
        let w = self.num_controls() + 3;
        let a = [self.params[0], self.params[1], self.params[2]];
        let b = [self.params[w], self.params[w + 1], self.params[w + 2]];
        (a, b)
    }

    /// Non-affine weights `u` (x row) and `v` (y row).
    pub fn nonlinear(&self) -> (&[f64], &[f64]) {
        let w = self.num_controls() + 3;
        (&self.params[3..w], &self.params[w + 3..])
    }

    pub fn apply(&self, p: Point) -> Point {
        let w = self.num_controls() + 3;
        let (rx, ry) = self.params.split_at(w);
        let mut x = rx[0] + rx[1] * p.x + rx[2] * p.y;
        let mut y = ry[0] + ry[1] * p.x + ry[2] * p.y;
        for (j, c) in self.source.points().iter().enumerate() {
            let phi = tps_kernel(p.dist(*c));
            x += rx[3 + j] * phi;
            y += ry[3 + j] * phi;
        }
        Point::new(x, y)
    }
}

/// Solves the spline that carries each `source` point onto the matching
/// `target` point.
pub fn tps_solve(source: &LandmarkSet, target: &LandmarkSet) -> Result<TpsTransform> {
    let n = source.len();
    if target.len() != n {
        return Err(Error::Dimension(format!(
            "TPS needs matching control sets, got {n} and {}",
            target.len()
        )));
    }
    let m = n + 3;
    // The spline is solved on controls centered and scaled to unit RMS
    // radius, then mapped back; the interpolant is the same function.
    let mu = source.points().iter().fold(Point::new(0.0, 0.0), |a, p| Point::new(a.x + p.x, a.y + p.y));
    let mu = Point::new(mu.x / n as f64, mu.y / n as f64);
    let scale = (source.points().iter().map(|p| p.dist(mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(scale > 0.0) {
        return Err(Error::DegenerateControls("all control points coincide".into()));
    }
    let c: Vec<Point> = source.points().iter().map(|p| Point::new((p.x - mu.x) / scale, (p.y - mu.y) / scale)).collect();

    // Δ_C, row-major m×m.
    let mut delta = vec![0.0; m * m];
    for (i, ci) in c.iter().enumerate() {
        delta[i] = 1.0;
        delta[m + i] = ci.x;
        delta[2 * m + i] = ci.y;
        for (j, cj) in c.iter().enumerate() {
            delta[(3 + j) * m + i] = tps_kernel(ci.dist(*cj));
        }
    }
    for (j, cj) in c.iter().enumerate() {
        let row = (3 + j) * m;
        delta[row + n] = 1.0;
        delta[row + n + 1] = cj.x;
        delta[row + n + 2] = cj.y;
    }

    // T Δ = [C' 0]  ⇔  Δᵀ Tᵀ = [C' 0]ᵀ.
    let mut delta_t = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            delta_t[j * m + i] = delta[i * m + j];
        }
    }
    let lu = Lu::factor(delta_t, m)
        .ok_or_else(|| Error::DegenerateControls("singular control matrix".into()))?;
    let cond = lu.condition_estimate(&delta);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateControls(format!(
            "control matrix condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }

    if source.points() == target.points() {
        // Exact identity, so identity warps resample bit-for-bit.
        let mut params = vec![0.0; 2 * m];
        params[1] = 1.0;
        params[m + 2] = 1.0;
        return Ok(TpsTransform { params, source: source.clone() });
    }

    let mut rhs_x = vec![0.0; m];
    let mut rhs_y = vec![0.0; m];
    for (i, t) in target.points().iter().enumerate() {
        rhs_x[i] = t.x;
        rhs_y[i] = t.y;
    }
    let mut params = Vec::with_capacity(2 * m);
    for rhs in [&rhs_x, &rhs_y] {
        let mut row = lu.solve(rhs);
        // φ(r/s) = φ(r)/s² − r² log(s)/s², and the side conditions reduce
        // Σ w r² to the constant Σ w ‖c'‖² s².
        let drift: f64 = row[3..].iter().zip(&c).map(|(w, p)| w * (p.x * p.x + p.y * p.y)).sum();
        row[0] -= (row[1] * mu.x + row[2] * mu.y) / scale + scale.ln() * drift;
        row[1] /= scale;
        row[2] /= scale;
        for w in &mut row[3..] {
            *w /= scale * scale;
        }
        params.extend(row);
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateControls("non-finite spline parameters".into()));
    }
    Ok(TpsTransform { params, source: source.clone() })
}

/// LU factorization with partial pivoting of a small dense matrix.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_abs > 0.0) {
                return None;
            }
            if pivot_row != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[r * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Some(Lu { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// `‖A‖₁ ‖A⁻¹‖₁` with the inverse formed column by column. `original` is
    /// the transpose of the factored matrix, which has the same condition
    /// number under the ∞-norm; we use the 1-norm of the factored one.
    fn condition_estimate(&self, original: &[f64]) -> f64 {
        let n = self.n;
        // factored = originalᵀ, so its 1-norm is the ∞-norm of `original`.
        let norm_a = (0..n)
            .map(|i| (0..n).map(|j| original[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut norm_inv: f64 = 0.0;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            norm_inv = norm_inv.max(col.iter().map(|v| v.abs()).sum());
        }
        norm_a * norm_inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(points: &[(f64, f64)]) -> LandmarkSet {
        LandmarkSet::new(points.iter().map(|&(x, y)| Point::new(x, y)).collect(), 64, 64).unwrap()
    }

    fn random_set(n: usize, rng: &mut impl Rng) -> LandmarkSet {
        let pts = (0..n).map(|_| Point::new(rng.gen_range(8.0..56.0), rng.gen_range(8.0..56.0))).collect();
        LandmarkSet::new(pts, 64, 64).unwrap()
    }

    fn square() -> LandmarkSet {
        set(&[(10.0, 10.0), (40.0, 12.0), (38.0, 45.0), (12.0, 40.0), (25.0, 25.0)])
    }

    #[test]
    fn kernel_at_zero_and_one() {
        assert_eq!(tps_kernel(0.0), 0.0);
        assert_eq!(tps_kernel(1.0), 0.0);
        assert!((tps_kernel(2.0) - 4.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_warp() {
        let c = square();
        let t = tps_solve(&c, &c).unwrap();
        let (a, b) = t.affine();
        let want_a = [0.0, 1.0, 0.0];
        let want_b = [0.0, 0.0, 1.0];
        for k in 0..3 {
            assert!((a[k] - want_a[k]).abs() < 1e-8, "{a:?}");
            assert!((b[k] - want_b[k]).abs() < 1e-8, "{b:?}");
        }
        let (u, v) = t.nonlinear();
        assert!(u.iter().chain(v).all(|w| w.abs() < 1e-8));
        let p = Point::new(3.3, 50.1);
        let q = t.apply(p);
        assert!((q.x - p.x).abs() < 1e-8 && (q.y - p.y).abs() < 1e-8);
    }

    #[test]
    fn pure_translation() {
        let c = square();
        let t = tps_solve(&c, &c.translated(5.0, -3.0).unwrap()).unwrap();
        let (a, b) = t.affine();
        assert!((a[0] - 5.0).abs() < 1e-8 && (a[1] - 1.0).abs() < 1e-8 && a[2].abs() < 1e-8);
        assert!((b[0] + 3.0).abs() < 1e-8 && b[1].abs() < 1e-8 && (b[2] - 1.0).abs() < 1e-8);
        let (u, v) = t.nonlinear();
        assert!(u.iter().chain(v).all(|w| w.abs() < 1e-8));
        let q = t.apply(Point::new(10.0, 10.0));
        assert!((q.x - 15.0).abs() < 1e-8 && (q.y - 7.0).abs() < 1e-8);
    }

    #[test]
    fn interpolates_random_controls() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in [4, 10, 68] {
            let src = random_set(n, &mut rng);
            let dst = LandmarkSet::new(
                src.points()
                    .iter()
                    .map(|p| Point::new(p.x + rng.gen_range(-4.0..4.0), p.y + rng.gen_range(-4.0..4.0)))
                    .collect(),
                64,
                64,
            )
            .unwrap();
            let t = tps_solve(&src, &dst).unwrap();
            for (c, d) in src.points().iter().zip(dst.points()) {
                assert!(t.apply(*c).dist(*d) < 1e-6);
            }
            let (u, v) = t.nonlinear();
            for w in [u, v] {
                let s1: f64 = w.iter().sum();
                let sx: f64 = w.iter().zip(src.points()).map(|(w, p)| w * p.x).sum();
                let sy: f64 = w.iter().zip(src.points()).map(|(w, p)| w * p.y).sum();
                assert!(s1.abs() < 1e-8 && sx.abs() < 1e-8 && sy.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn collinear_controls_are_degenerate() {
        let c = set(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0), (5.0, 5.0)]);
        let err = tps_solve(&c, &c).unwrap_err();
        assert!(matches!(err, Error::DegenerateControls(_)), "{err}");
    }

    #[test]
    fn duplicated_controls_are_degenerate() {
        let c = set(&[(1.0, 1.0), (20.0, 2.0), (1.0, 1.0), (4.0, 30.0)]);
        assert!(matches!(tps_solve(&c, &c), Err(Error::DegenerateControls(_))));
    }

    #[test]
    fn mismatched_counts() {
        let a = square();
        let b = a.subset(&[0, 1, 2, 3]).unwrap();
        assert!(matches!(tps_solve(&a, &b), Err(Error::Dimension(_))));
    }
}
