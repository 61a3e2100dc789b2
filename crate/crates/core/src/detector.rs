//! Maximum-likelihood detection under the unconditional Gaussian model.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::model::{self, Alphabet, ChannelModel, ConditionalCovariance, NoiseModel, PowerConfig};

/// `ln f(y | S_i) = −K·Nr·ln π − ln|Σ| − yᴴΣ⁻¹y`.
pub fn log_likelihood(y: &CVector, cov: &ConditionalCovariance) -> Result<f64> {
    check_len(y, cov)?;
    Ok(log_likelihood_unchecked(y, cov))
}

fn log_likelihood_unchecked(y: &CVector, cov: &ConditionalCovariance) -> f64 {
    -(cov.dim() as f64) * PI.ln() - cov.logdet() - cov.quadratic_form(y)
}

/// Log-likelihood ratio `L_{a,b}(y) = yᴴ(Σ_b⁻¹ − Σ_a⁻¹)y − ln(|Σ_a|/|Σ_b|)`.
pub fn llr(y: &CVector, cov_a: &ConditionalCovariance, cov_b: &ConditionalCovariance) -> Result<f64> {
    check_len(y, cov_a)?;
    check_len(y, cov_b)?;
    Ok(llr_unchecked(y, cov_a, cov_b))
}

fn llr_unchecked(y: &CVector, cov_a: &ConditionalCovariance, cov_b: &ConditionalCovariance) -> f64 {
    (cov_b.quadratic_form(y) - cov_a.quadratic_form(y)) - (cov_a.logdet() - cov_b.logdet())
}

/// The LLR together with the magnitude of the terms it was computed from,
/// so callers can tell a roundoff-level value from a genuine sign.
pub(crate) fn llr_with_scale(y: &CVector, cov_a: &ConditionalCovariance, cov_b: &ConditionalCovariance) -> (f64, f64) {
    let (qa, qb) = (cov_a.quadratic_form(y), cov_b.quadratic_form(y));
    let llr = (qb - qa) - (cov_a.logdet() - cov_b.logdet());
    (llr, qa + qb + cov_a.logdet().abs() + cov_b.logdet().abs())
}

fn check_len(y: &CVector, cov: &ConditionalCovariance) -> Result<()> {
    if y.len() != cov.dim() {
        return Err(Error::Dimension(format!(
            "observation has length {}, covariance is {}×{}",
            y.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    Ok(())
}

/// The M hypothesis covariances of an alphabet, in alphabet order.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    covariances: Vec<ConditionalCovariance>,
}

impl DetectorBank {
    pub fn new(covariances: Vec<ConditionalCovariance>) -> Result<Self> {
        let dim = covariances
            .first()
            .ok_or_else(|| Error::InvalidArgument("detector bank needs at least one hypothesis".into()))?
            .dim();
        if covariances.iter().any(|c| c.dim() != dim) {
            return Err(Error::Dimension("hypotheses of different dimension".into()));
        }
        Ok(DetectorBank { covariances })
    }

    pub fn from_model(
        alphabet: &Alphabet,
        ch: &ChannelModel,
        nz: &NoiseModel,
        pw: &PowerConfig,
        nr: usize,
    ) -> Result<Self> {
        Self::new(model::conditional_covariances(alphabet, ch, nz, pw, nr)?)
    }

    pub fn covariances(&self) -> &[ConditionalCovariance] {
        &self.covariances
    }

    pub fn len(&self) -> usize {
        self.covariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariances[0].dim()
    }

    /// Per-hypothesis log-likelihoods of `y`.
    pub fn log_likelihoods(&self, y: &CVector) -> Result<Vec<f64>> {
        check_len(y, &self.covariances[0])?;
        Ok(self
            .covariances
            .iter()
            .map(|c| log_likelihood_unchecked(y, c))
            .collect())
    }
}

/// Index of the largest value, ties going to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ML decision `argmax_i ln f(y | S_i)`; ties break toward the lowest index.
pub fn ml_detect(y: &CVector, bank: &DetectorBank) -> Result<usize> {
    if bank.len() == 1 {
        check_len(y, &bank.covariances[0])?;
        return Ok(0);
    }
    Ok(argmax_lowest(&bank.log_likelihoods(y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::rng;
    use num_complex::Complex64;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn scalar_cov(v: f64) -> ConditionalCovariance {
        ConditionalCovariance::from_sigma(CMatrix::from_element(1, 1, c(v))).unwrap()
    }

    fn random_cov(n: usize, seed: u64) -> ConditionalCovariance {
        let mut g = rng::stream(seed, 0);
        let a = CMatrix::from_fn(n, n, |_, _| rng::complex_normal(&mut g));
        ConditionalCovariance::from_sigma(&a * a.adjoint() + CMatrix::identity(n, n) * c(0.5)).unwrap()
    }

    fn random_y(n: usize, seed: u64) -> CVector {
        let mut g = rng::stream(seed, 1);
        CVector::from_fn(n, |_, _| rng::complex_normal(&mut g))
    }

    #[test]
    fn scalar_log_likelihoods() {
        let y0 = CVector::from_element(1, c(0.0));
        assert!((log_likelihood(&y0, &scalar_cov(1.0)).unwrap() + PI.ln()).abs() < 1e-15);
        let y1 = CVector::from_element(1, c(1.0));
        let expected = -PI.ln() - 2f64.ln() - 0.5;
        assert!((log_likelihood(&y1, &scalar_cov(2.0)).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_matches_explicit_inverse() {
        let cov = random_cov(4, 9);
        let y = random_y(4, 9);
        let inv = cov.sigma().clone().try_inverse().unwrap();
        let det = cov.sigma().clone().determinant().re;
        let quad = (y.adjoint() * inv * &y)[(0, 0)].re;
        let oracle = -4.0 * PI.ln() - det.ln() - quad;
        let got = log_likelihood(&y, &cov).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * oracle.abs());
    }

    #[test]
    fn llr_scalar_and_identity() {
        let y = CVector::from_element(1, c(1.0));
        let v = llr(&y, &scalar_cov(2.0), &scalar_cov(1.0)).unwrap();
        assert!((v - (0.5 - 2f64.ln())).abs() < 1e-15);
        let a = random_cov(3, 4);
        for s in 0..20 {
            assert_eq!(llr(&random_y(3, s), &a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn llr_is_difference_of_log_likelihoods_and_antisymmetric() {
        let (a, b) = (random_cov(5, 1), random_cov(5, 2));
        for s in 0..20 {
            let y = random_y(5, 100 + s);
            let l = llr(&y, &a, &b).unwrap();
            let d = log_likelihood(&y, &a).unwrap() - log_likelihood(&y, &b).unwrap();
            assert!((l - d).abs() <= 1e-10 * d.abs().max(1.0));
            assert!((l + llr(&y, &b, &a).unwrap()).abs() <= 1e-10 * l.abs().max(1.0));
        }
    }

    #[test]
    fn ml_detect_scalar_bank() {
        let bank = DetectorBank::new(vec![scalar_cov(1.0), scalar_cov(101.0)]).unwrap();
        assert_eq!(ml_detect(&CVector::from_element(1, c(0.1)), &bank).unwrap(), 0);
        assert_eq!(ml_detect(&CVector::from_element(1, c(10.0)), &bank).unwrap(), 1);
        let single = DetectorBank::new(vec![scalar_cov(3.0)]).unwrap();
        assert_eq!(ml_detect(&CVector::from_element(1, c(7.0)), &single).unwrap(), 0);
    }

    #[test]
    fn ml_detect_matches_exhaustive_scan_and_offsets() {
        let bank = DetectorBank::new((0..4).map(|i| random_cov(3, 20 + i)).collect()).unwrap();
        for s in 0..50 {
            let y = random_y(3, 500 + s);
            let ll: Vec<f64> = bank
                .covariances()
                .iter()
                .map(|cv| log_likelihood(&y, cv).unwrap())
                .collect();
            let mut best = 0;
            for i in 0..ll.len() {
                if ll[i] > ll[best] {
                    best = i;
                }
            }
            let got = ml_detect(&y, &bank).unwrap();
            assert_eq!(got, best);
            let shifted: Vec<f64> = ll.iter().map(|v| v + 123.25).collect();
            assert_eq!(argmax_lowest(&shifted), got);
        }
    }

    #[test]
    fn ties_break_low_and_lengths_are_checked() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        let bank = DetectorBank::new(vec![scalar_cov(2.0), scalar_cov(2.0)]).unwrap();
        assert_eq!(ml_detect(&CVector::from_element(1, c(1.0)), &bank).unwrap(), 0);
        assert!(log_likelihood(&random_y(2, 0), &scalar_cov(1.0)).is_err());
    }
}
