//! Aitchison geometry of the probability simplex.
//!
//! A [`Composition`] is a strictly positive vector of `D >= 2` parts summing
//! to one. Perturbation plays the role of vector addition, powering the role
//! of scalar multiplication, and the Aitchison inner product turns the
//! simplex into a Euclidean space. All products and powers are evaluated on
//! logarithms, and the inner product goes through centred log-ratios rather
//! than the `D x D` double sum of log-ratios it is equal to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(parts) == 1` accepted by [`Composition::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Floor applied to raw model outputs before closure.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// A discrete probability distribution with strictly positive parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Composition {
    parts: Vec<f64>,
}

impl<'de> Deserialize<'de> for Composition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let parts = Vec::<f64>::deserialize(deserializer)?;
        Composition::new(parts).map_err(serde::de::Error::custom)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::DimensionTooSmall(d))
    } else {
        Ok(())
    }
}

fn same_dim(x: &Composition, y: &Composition) -> Result<()> {
    if x.dim() != y.dim() {
        Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        })
    } else {
        Ok(())
    }
}

impl Composition {
    /// Wraps parts that already satisfy the simplex invariants.
    pub fn new(parts: Vec<f64>) -> Result<Self> {
        check_dim(parts.len())?;
        if let Some((index, &value)) = parts
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositivePart { index, value });
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Composition { parts })
    }

    /// Rescales a positive vector onto the simplex.
    pub fn closure(raw: &[f64]) -> Result<Self> {
        check_dim(raw.len())?;
        if let Some((index, &value)) = raw
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositivePart { index, value });
        }
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() {
            // Rescale before summing to stay finite.
            let max = raw.iter().cloned().fold(f64::MIN, f64::max);
            let scaled: Vec<f64> = raw.iter().map(|v| v / max).collect();
            return Self::closure(&scaled);
        }
        Ok(Composition {
            parts: raw.iter().map(|v| v / sum).collect(),
        })
    }

    /// Closure of a model output after flooring every part at
    /// [`PROBABILITY_FLOOR`]. Negative or non-finite entries are rejected.
    pub fn from_model_output(raw: &[f64]) -> Result<Self> {
        check_dim(raw.len())?;
        if let Some((index, &value)) = raw
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::NonPositivePart { index, value });
        }
        let floored: Vec<f64> = raw.iter().map(|v| v.max(PROBABILITY_FLOOR)).collect();
        Self::closure(&floored)
    }

    /// Builds the composition whose parts are proportional to `exp(logs)`.
    pub fn from_log_parts(logs: &[f64]) -> Result<Self> {
        check_dim(logs.len())?;
        if let Some((index, &value)) = logs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonPositivePart { index, value });
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs
            .iter()
            .map(|l| (l - max).exp().max(f64::MIN_POSITIVE))
            .collect();
        Self::closure(&raw)
    }

    /// The neutral element of perturbation.
    pub fn uniform(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Composition {
            parts: vec![1.0 / d as f64; d],
        })
    }

    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    pub fn into_parts(self) -> Vec<f64> {
        self.parts
    }

    pub fn dim(&self) -> usize {
        self.parts.len()
    }

    pub fn log_parts(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.ln()).collect()
    }

    /// Centred log-ratio coordinates: `log(x_i) - mean_j log(x_j)`.
    pub fn clr(&self) -> Vec<f64> {
        let logs = self.log_parts();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        logs.into_iter().map(|l| l - mean).collect()
    }

    /// Index of the largest part (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.parts.iter().enumerate() {
            if p > self.parts[best] {
                best = i;
            }
        }
        best
    }

    /// `x ⊕ y`: closure of the componentwise product.
    pub fn perturb(&self, other: &Composition) -> Result<Composition> {
        same_dim(self, other)?;
        let logs: Vec<f64> = self
            .log_parts()
            .iter()
            .zip(other.log_parts())
            .map(|(a, b)| a + b)
            .collect();
        Composition::from_log_parts(&logs)
    }

    /// `alpha ⊙ x`: closure of the componentwise power.
    pub fn power(&self, alpha: f64) -> Composition {
        let logs: Vec<f64> = self.log_parts().iter().map(|l| alpha * l).collect();
        Composition::from_log_parts(&logs).expect("powering preserves dimension")
    }

    /// `(-1) ⊙ x`.
    pub fn inverse(&self) -> Composition {
        self.power(-1.0)
    }

    /// `x ⊖ y = x ⊕ ((-1) ⊙ y)`.
    pub fn subtract(&self, other: &Composition) -> Result<Composition> {
        same_dim(self, other)?;
        let logs: Vec<f64> = self
            .log_parts()
            .iter()
            .zip(other.log_parts())
            .map(|(a, b)| a - b)
            .collect();
        Composition::from_log_parts(&logs)
    }

    /// Aitchison inner product.
    pub fn inner(&self, other: &Composition) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self
            .clr()
            .iter()
            .zip(other.clr())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Aitchison norm.
    pub fn norm(&self) -> f64 {
        self.clr().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Aitchison distance `||x ⊖ y||`.
    pub fn distance(&self, other: &Composition) -> Result<f64> {
        same_dim(self, other)?;
        let (a, b) = (self.clr(), other.clr());
        Ok(a.iter()
            .zip(&b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt())
    }
}

/// Perturbation-sum of a non-empty sequence of compositions.
pub fn perturb_all<'a, I>(items: I) -> Result<Composition>
where
    I: IntoIterator<Item = &'a Composition>,
{
    let mut iter = items.into_iter();
    let first = iter.next().ok_or(Error::EmptySample)?;
    let mut logs = first.log_parts();
    for c in iter {
        if c.dim() != logs.len() {
            return Err(Error::DimensionMismatch {
                expected: logs.len(),
                got: c.dim(),
            });
        }
        for (l, p) in logs.iter_mut().zip(c.parts()) {
            *l += p.ln();
        }
    }
    Composition::from_log_parts(&logs)
}

/// Expectation under the Aitchison measure: closure of componentwise
/// geometric means.
pub fn aitchison_mean(samples: &[Composition]) -> Result<Composition> {
    let first = samples.first().ok_or(Error::EmptySample)?;
    let d = first.dim();
    let mut acc = vec![0.0; d];
    for s in samples {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
        for (a, p) in acc.iter_mut().zip(s.parts()) {
            *a += p.ln();
        }
    }
    let n = samples.len() as f64;
    let logs: Vec<f64> = acc.into_iter().map(|a| a / n).collect();
    Composition::from_log_parts(&logs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(p: &[f64]) -> Composition {
        Composition::closure(p).unwrap()
    }

    // Double-sum inner product evaluated literally, as an oracle for the clr route.
    fn double_sum_inner(x: &Composition, y: &Composition) -> f64 {
        let d = x.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += (x.parts()[i] / x.parts()[j]).ln() * (y.parts()[i] / y.parts()[j]).ln();
            }
        }
        s / (2.0 * d as f64)
    }

    #[test]
    fn closure_examples() {
        let c = comp(&[1.0, 1.0, 1.0]);
        for p in c.parts() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(comp(&[2.0, 1.0, 1.0]).parts(), &[0.5, 0.25, 0.25]);
        let e = comp(&[std::f64::consts::E, 1.0, 1.0]);
        let expected = [0.576117, 0.211942, 0.211942];
        for (p, q) in e.parts().iter().zip(expected) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn closure_errors() {
        assert!(matches!(
            Composition::closure(&[1.0, 0.0, 2.0]),
            Err(Error::NonPositivePart { index: 1, .. })
        ));
        assert!(matches!(
            Composition::closure(&[1.0]),
            Err(Error::DimensionTooSmall(1))
        ));
        assert!(matches!(
            Composition::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn model_output_is_floored() {
        let c = Composition::from_model_output(&[1.0, 0.0, 0.0]).unwrap();
        assert!(c.parts().iter().all(|p| *p > 0.0));
        assert!((c.parts()[1] - PROBABILITY_FLOOR).abs() < 1e-20);
        assert!(Composition::from_model_output(&[0.5, -0.1, 0.6]).is_err());
    }

    #[test]
    fn perturbation_examples() {
        let x = comp(&[0.5, 0.25, 0.25]);
        let u = Composition::uniform(3).unwrap();
        assert!(x.perturb(&u).unwrap().distance(&x).unwrap() < 1e-12);
        let y = comp(&[0.25, 0.5, 0.25]);
        // Products 0.125, 0.125, 0.0625.
        let xy = x.perturb(&y).unwrap();
        assert!(xy.parts().iter().zip([0.4, 0.4, 0.2]).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(x.perturb(&x.inverse()).unwrap().distance(&u).unwrap() < 1e-12);
        assert!(matches!(
            x.perturb(&Composition::uniform(4).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn powering_examples() {
        let x = comp(&[0.5, 0.25, 0.25]);
        let u = Composition::uniform(3).unwrap();
        assert!(x.power(0.0).distance(&u).unwrap() < 1e-12);
        assert!(x.power(1.0).distance(&x).unwrap() < 1e-12);
        let two = x.power(2.0);
        for (p, q) in two.parts().iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn subtraction_examples() {
        let x = comp(&[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]);
        let y = comp(&[0.5, 0.25, 0.25]);
        let u = Composition::uniform(3).unwrap();
        assert!(x.subtract(&x).unwrap().distance(&u).unwrap() < 1e-12);
        assert!(x.subtract(&u).unwrap().distance(&x).unwrap() < 1e-12);
        let diff = x.subtract(&y).unwrap();
        for (p, q) in diff.parts().iter().zip([0.5, 0.25, 0.25]) {
            assert!((p - q).abs() < 1e-14);
        }
        let via_power = x.perturb(&y.power(-1.0)).unwrap();
        assert!(via_power.distance(&diff).unwrap() < 1e-12);
    }

    #[test]
    fn inner_and_norm_examples() {
        let x = comp(&[0.5, 0.25, 0.25]);
        let u = Composition::uniform(3).unwrap();
        assert_eq!(u.inner(&x).unwrap(), 0.0);
        assert_eq!(u.norm(), 0.0);
        let xx = x.inner(&x).unwrap();
        assert!((xx - double_sum_inner(&x, &x)).abs() < 1e-14);
        assert!((xx - 0.320302).abs() < 1e-6);
        // Same value via the squared Gram-Schmidt ILR coordinates.
        let g = 0.490129_f64.powi(2) + 0.282976_f64.powi(2);
        assert!((xx - g).abs() < 1e-5);
        assert!((x.norm() - 0.565953).abs() < 1e-6);
        assert!((x.power(-2.5).norm() - 2.5 * x.norm()).abs() < 1e-12);
    }

    #[test]
    fn clr_inner_matches_double_sum_for_large_d() {
        let raw: Vec<f64> = (1..=40).map(|i| (i as f64 * 0.37).sin() + 1.5).collect();
        let x = comp(&raw);
        let y = comp(&raw.iter().rev().cloned().collect::<Vec<_>>());
        assert!((x.inner(&y).unwrap() - double_sum_inner(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn mean_examples() {
        let x = comp(&[0.5, 0.25, 0.25]);
        let y = comp(&[0.25, 0.5, 0.25]);
        let u = Composition::uniform(3).unwrap();
        assert!(aitchison_mean(std::slice::from_ref(&x)).unwrap().distance(&x).unwrap() < 1e-12);
        assert!(
            aitchison_mean(&[x.clone(), x.inverse()])
                .unwrap()
                .distance(&u)
                .unwrap()
                < 1e-12
        );
        let m = aitchison_mean(&[x, y]).unwrap();
        let h = 0.125_f64.sqrt();
        let expected = comp(&[h, h, 0.25]);
        assert!(m.distance(&expected).unwrap() < 1e-12);
        assert!((m.parts()[0] - 0.369398).abs() < 1e-6);
        assert!(matches!(aitchison_mean(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn perturb_all_sums() {
        let x = comp(&[0.5, 0.25, 0.25]);
        let y = comp(&[0.25, 0.5, 0.25]);
        let s = perturb_all([&x, &y, &x.inverse()]).unwrap();
        assert!(s.distance(&y).unwrap() < 1e-12);
    }

    #[test]
    fn extreme_log_ratios_stay_valid() {
        let c = Composition::from_log_parts(&[0.0, -800.0, 5.0]).unwrap();
        assert!(c.parts().iter().all(|p| *p > 0.0));
        assert_eq!(c.argmax(), 2);
    }
}
