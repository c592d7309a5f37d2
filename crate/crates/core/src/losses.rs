//! Adversarial, cycle, perceptual and makeup losses and their weighted sum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::layers::{Activation, Conv2d};
use crate::tensor::Tensor;

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean of `|a − b|` over all entries.
pub fn mean_abs(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let n = a.numel().max(1) as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// Gradient of [`mean_abs`] with respect to `a` (zero where `a == b`).
pub fn mean_abs_vjp(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b)?;
    let n = a.numel().max(1) as f64;
    a.zip_map(b, |x, y| if x > y { 1.0 / n } else if x < y { -1.0 / n } else { 0.0 })
}

fn mean_neg_log(scores: &Tensor, what: &str, f: impl Fn(f64) -> f64) -> Result<f64> {
    if scores.numel() == 0 {
        return Err(Error::Dimension(format!("{what} score map is empty")));
    }
    let mut sum = 0.0;
    for &s in scores.data() {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("{what} score {s} outside (0, 1)")));
        }
        sum -= f(s).ln();
    }
    Ok(sum / scores.numel() as f64)
}

/// Generator adversarial loss `−E[log D_X(G(y,x))] − E[log D_Y(G(x,y))]`,
/// with expectations taken as means over each score map.
pub fn adv_loss_g(dx_fake: &Tensor, dy_fake: &Tensor) -> Result<f64> {
    Ok(mean_neg_log(dx_fake, "D_X(fake)", |s| s)? + mean_neg_log(dy_fake, "D_Y(fake)", |s| s)?)
}

/// Discriminator adversarial loss over real and generated score maps.
pub fn adv_loss_d(real_x: &Tensor, real_y: &Tensor, fake_x: &Tensor, fake_y: &Tensor) -> Result<f64> {
    Ok(mean_neg_log(real_x, "D_X(real)", |s| s)?
        + mean_neg_log(real_y, "D_Y(real)", |s| s)?
        + mean_neg_log(fake_x, "D_X(fake)", |s| 1.0 - s)?
        + mean_neg_log(fake_y, "D_Y(fake)", |s| 1.0 - s)?)
}

/// `mean|x_rec − x| + mean|y_rec − y|`.
pub fn cycle_loss(x: &Tensor, y: &Tensor, x_rec: &Tensor, y_rec: &Tensor) -> Result<f64> {
    Ok(mean_abs(x_rec, x)? + mean_abs(y_rec, y)?)
}

/// `mean|G(x,y) − PGT(x,y)| + mean|G(y,x) − PGT(y,x)|`.
pub fn makeup_loss(gen_xy: &Tensor, pgt_xy: &Tensor, gen_yx: &Tensor, pgt_yx: &Tensor) -> Result<f64> {
    Ok(mean_abs(gen_xy, pgt_xy)? + mean_abs(gen_yx, pgt_yx)?)
}

/// Feature network used by the perceptual loss.
pub trait FeatureExtractor {
    fn features(&self, image: &Tensor) -> Result<Tensor>;
}

/// `F(v) = v`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn features(&self, image: &Tensor) -> Result<Tensor> {
        Ok(image.clone())
    }
}

/// Fixed random stand-in for a pretrained feature network: three 3×3
/// stride-2 convolutions with ReLU, widths 8, 16, 32.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvExtractor {
    convs: Vec<Conv2d>,
}

impl ConvExtractor {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chans = [3, 8, 16, 32];
        ConvExtractor { convs: (0..3).map(|l| Conv2d::random(3, chans[l], chans[l + 1], 2, 1, &mut rng)).collect() }
    }
}

impl FeatureExtractor for ConvExtractor {
    fn features(&self, image: &Tensor) -> Result<Tensor> {
        let mut z = image.clone();
        for c in &self.convs {
            z = Activation::Relu.apply(&c.forward(&z)?);
        }
        Ok(z)
    }
}

/// `‖F(a) − F(b)‖₂` over the whole feature tensor.
pub fn perceptual_distance(a: &Tensor, b: &Tensor, extractor: &dyn FeatureExtractor) -> Result<f64> {
    let (fa, fb) = (extractor.features(a)?, extractor.features(b)?);
    same_shape(&fa, &fb)?;
    Ok(fa.data().iter().zip(fb.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `‖F(G(x,y)) − F(x)‖₂ + ‖F(G(y,x)) − F(y)‖₂`.
pub fn perceptual_loss(gen_xy: &Tensor, x: &Tensor, gen_yx: &Tensor, y: &Tensor, extractor: &dyn FeatureExtractor) -> Result<f64> {
    Ok(perceptual_distance(gen_xy, x, extractor)? + perceptual_distance(gen_yx, y, extractor)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub adv: f64,
    pub cyc: f64,
    pub per: f64,
    pub make: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { adv: 1.0, cyc: 10.0, per: 0.005, make: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("adv", self.adv), ("cyc", self.cyc), ("per", self.per), ("make", self.make)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("loss weight {name} = {v} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

/// Unweighted loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub adv_g: f64,
    pub adv_d: f64,
    pub cyc: f64,
    pub per: f64,
    pub make: f64,
}

/// `(L_G, L_D)`: the generator gets the adversarial, cycle, perceptual and
/// makeup terms; the discriminator gets its adversarial term.
pub fn total_loss(parts: &LossParts, w: &LossWeights) -> Result<(f64, f64)> {
    w.validate()?;
    let vals = [parts.adv_g, parts.adv_d, parts.cyc, parts.per, parts.make];
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("loss parts must be finite".into()));
    }
    let generator = w.adv * parts.adv_g + w.cyc * parts.cyc + w.per * parts.per + w.make * parts.make;
    Ok((generator, w.adv * parts.adv_d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn adversarial_closed_forms() {
        let half = Tensor::full([3, 3, 1], 0.5);
        assert!((adv_loss_g(&half, &half).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((adv_loss_d(&half, &half, &half, &half).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-15);
        let (q, tq) = (Tensor::full([2, 2, 1], 0.25), Tensor::full([2, 2, 1], 0.75));
        assert!((adv_loss_g(&q, &tq).unwrap() - (-(0.25f64.ln()) - 0.75f64.ln())).abs() < 1e-15);
        let hi = Tensor::full([2, 2, 1], 1.0 - 1e-12);
        let lo = Tensor::full([2, 2, 1], 1e-12);
        assert!(adv_loss_g(&hi, &hi).unwrap() < 1e-11);
        assert!(adv_loss_d(&hi, &hi, &lo, &lo).unwrap() < 1e-11);
        assert!(matches!(adv_loss_g(&Tensor::full([1], 1.0), &half), Err(Error::Domain(_))));
        assert!(matches!(adv_loss_d(&half, &half, &Tensor::full([1], 0.0), &half), Err(Error::Domain(_))));
    }

    #[test]
    fn discriminator_loss_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s: Vec<Tensor> = (0..4).map(|_| Tensor::from_fn([3, 3, 1], |_| rng.gen_range(0.01..0.99))).collect();
        let a = adv_loss_d(&s[0], &s[1], &s[2], &s[3]).unwrap();
        let b = adv_loss_d(&s[1], &s[0], &s[3], &s[2]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn l1_losses() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (x, y) = (random(&[4, 4, 3], &mut rng), random(&[4, 4, 3], &mut rng));
        assert_eq!(cycle_loss(&x, &y, &x, &y).unwrap(), 0.0);
        assert_eq!(makeup_loss(&x, &x, &y, &y).unwrap(), 0.0);
        let d = 0.25;
        let (xs, ys) = (x.map(|v| v + d), y.map(|v| v - d));
        assert!((cycle_loss(&x, &y, &xs, &ys).unwrap() - 2.0 * d).abs() < 1e-15);
        assert!((makeup_loss(&xs, &x, &ys, &y).unwrap() - 2.0 * d).abs() < 1e-15);

        let (a, b) = (random(&[3, 5, 2], &mut rng), random(&[3, 5, 2], &mut rng));
        let mut oracle = 0.0;
        for i in 0..a.numel() {
            oracle += (a.data()[i] - b.data()[i]).abs();
        }
        assert!((mean_abs(&a, &b).unwrap() - oracle / 30.0).abs() < 1e-15);
        assert!(mean_abs(&a, &x).is_err());
    }

    #[test]
    fn perceptual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random(&[8, 8, 3], &mut rng), random(&[8, 8, 3], &mut rng));
        let f = ConvExtractor::new(0);
        assert_eq!(perceptual_loss(&a, &a, &b, &b, &f).unwrap(), 0.0);
        let direct = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((perceptual_distance(&a, &b, &IdentityExtractor).unwrap() - direct).abs() < 1e-14);
        assert_eq!(f.features(&a).unwrap().shape(), &[1, 1, 32]);
        assert!(perceptual_loss(&a, &b, &b, &a, &f).unwrap() > 0.0);
    }

    #[test]
    fn weighted_totals() {
        let unit = LossParts { adv_g: 1.0, adv_d: 1.0, cyc: 1.0, per: 1.0, make: 1.0 };
        let (g, d) = total_loss(&unit, &LossWeights::default()).unwrap();
        assert_eq!(g, 12.005);
        assert_eq!(d, 1.0);
        let zero = LossWeights { adv: 0.0, cyc: 0.0, per: 0.0, make: 0.0 };
        assert_eq!(total_loss(&unit, &zero).unwrap(), (0.0, 0.0));
        let parts = LossParts { adv_g: 0.3, adv_d: 1.7, cyc: 0.11, per: 42.0, make: 0.05 };
        let w = LossWeights::default();
        let w2 = LossWeights { adv: 2.0 * w.adv, cyc: 2.0 * w.cyc, per: 2.0 * w.per, make: 2.0 * w.make };
        let (g1, d1) = total_loss(&parts, &w).unwrap();
        let (g2, d2) = total_loss(&parts, &w2).unwrap();
        assert_eq!((g2, d2), (2.0 * g1, 2.0 * d1));
        assert!(total_loss(&parts, &LossWeights { per: -1.0, ..w }).is_err());
    }
}
