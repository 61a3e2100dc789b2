//! Jeffreys divergence between the conditional Gaussian laws of two codewords.
//!
//! For zero-mean complex Gaussians the divergence has several equivalent
//! closed forms; all of them are implemented here through independent
//! numerical routes so they can be cross-checked:
//!
//! * trace form `tr{(Σ_b⁻¹ − Σ_a⁻¹)(Σ_a − Σ_b)}` via Cholesky solves,
//! * whitened Frobenius form `‖Σ_a^{-1/2}(Σ_a − Σ_b)Σ_b^{-1/2}‖_F²` via eigen square roots,
//! * weighted norm `‖C̊ − I‖²_{C̊}` of the normalized covariance `C̊ = Σ_b^{-1/2}Σ_aΣ_b^{-1/2}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen};
use crate::model::{ChannelModel, Codeword, ConditionalCovariance, NoiseModel, PowerConfig};

/// Negative values above `-NEGATIVE_GUARD` are round-off and clamp to zero.
pub const NEGATIVE_GUARD: f64 = 1e-9;

fn clamp_divergence(j: f64) -> Result<f64> {
    if j >= 0.0 {
        Ok(j)
    } else if j >= -NEGATIVE_GUARD {
        Ok(0.0)
    } else {
        Err(Error::NegativeDivergence(j))
    }
}

fn same_dim(a: &ConditionalCovariance, b: &ConditionalCovariance) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "covariances of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `J = tr{Σ_b⁻¹ D} − tr{Σ_a⁻¹ D}` with `D = Σ_a − Σ_b`.
pub fn jeffreys_trace(a: &ConditionalCovariance, b: &ConditionalCovariance) -> Result<f64> {
    same_dim(a, b)?;
    let d = a.sigma() - b.sigma();
    let j = linalg::trace(&b.solve(&d)).re - linalg::trace(&a.solve(&d)).re;
    clamp_divergence(j)
}

/// `J = ‖Σ_a^{-1/2}(Σ_a − Σ_b)Σ_b^{-1/2}‖_F²`.
pub fn jeffreys_norm_form(a: &ConditionalCovariance, b: &ConditionalCovariance) -> Result<f64> {
    same_dim(a, b)?;
    let wa = linalg::inv_sqrt_hermitian(a.sigma())?;
    let wb = linalg::inv_sqrt_hermitian(b.sigma())?;
    let d = a.sigma() - b.sigma();
    clamp_divergence(linalg::frobenius_sq(&(wa * d * wb)))
}

/// `C̊ = Σ_b^{-1/2} Σ_a Σ_b^{-1/2}` and its smallest eigenvalue.
#[derive(Debug, Clone)]
pub struct NormalizedCovariance {
    pub c_ring: CMatrix,
    pub sigma_min: f64,
}

impl NormalizedCovariance {
    /// `‖C̊ − I‖²_{C̊} = tr{(C̊ − I)ᴴ C̊⁻¹ (C̊ − I)}`.
    pub fn jeffreys(&self) -> Result<f64> {
        let n = self.c_ring.nrows();
        let x = &self.c_ring - linalg::identity(n);
        clamp_divergence(weighted_norm_sq(&x, &self.c_ring)?)
    }

    /// `‖C̊ − I‖_F²`.
    pub fn frobenius_discrepancy(&self) -> f64 {
        let n = self.c_ring.nrows();
        linalg::frobenius_sq(&(&self.c_ring - linalg::identity(n)))
    }
}

pub fn normalized_covariance(a: &ConditionalCovariance, b: &ConditionalCovariance) -> Result<NormalizedCovariance> {
    same_dim(a, b)?;
    let wb = linalg::inv_sqrt_hermitian(b.sigma())?;
    let c_ring = linalg::hermitian_part(&(&wb * a.sigma() * &wb));
    let sigma_min = HermitianEigen::new(&c_ring)?.min();
    Ok(NormalizedCovariance { c_ring, sigma_min })
}

/// `‖X‖²_A = tr{Xᴴ A⁻¹ X}` for Hermitian PD `A`.
pub fn weighted_norm_sq(x: &CMatrix, a: &CMatrix) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(linalg::hermitian_part(a)).ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: HermitianEigen::new(a).map(|e| e.min()).unwrap_or(f64::NAN),
    })?;
    Ok(linalg::trace(&(x.adjoint() * chol.solve(x))).re)
}

/// `tr{Σ_b⁻¹ D Σ_b⁻¹ D}` for Hermitian `D`, the congruence-weighted size of a
/// covariance difference. Equals `‖C̊ − I‖_F²` when `D = Σ_a − Σ_b`.
pub fn congruence_weighted_norm_sq(d: &CMatrix, b: &ConditionalCovariance) -> f64 {
    let x = b.solve(d);
    linalg::trace(&(&x * &x)).re
}

/// `(‖C̊ − I‖_F², σ_min(C̊))`: the pair of statistics whose growth and
/// positivity decide divergence of `J` as the array grows.
pub fn equivalent_condition_stats(a: &ConditionalCovariance, b: &ConditionalCovariance) -> Result<(f64, f64)> {
    let nc = normalized_covariance(a, b)?;
    Ok((nc.frobenius_discrepancy(), nc.sigma_min))
}

/// Transmitted scalars of a single-use SIMO pair (`K = Nt = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimoPair {
    pub xa: Complex64,
    pub xb: Complex64,
    /// `|x_a|² − |x_b|²`.
    pub delta: f64,
}

impl SimoPair {
    pub fn new(xa: Complex64, xb: Complex64) -> Self {
        SimoPair {
            xa,
            xb,
            delta: xa.norm_sqr() - xb.norm_sqr(),
        }
    }

    /// `x = √Px·s` for two 1×1 codewords.
    pub fn from_codewords(sa: &Codeword, sb: &Codeword, pw: &PowerConfig) -> Result<Self> {
        for s in [sa, sb] {
            if s.k() != 1 || s.nt() != 1 {
                return Err(Error::Dimension("SIMO pair needs 1×1 codewords".into()));
            }
        }
        let g = pw.px().sqrt();
        Ok(Self::new(sa.matrix()[(0, 0)] * g, sb.matrix()[(0, 0)] * g))
    }
}

/// `Γ = C_z^{-1/2} C_h C_z^{-1/2}` and `C = σ_max(Γ)`.
#[derive(Debug, Clone)]
pub struct GammaSpectrum {
    pub gamma: CMatrix,
    pub sigma_max: f64,
    /// `tr{Γ²}`.
    pub trace_sq: f64,
}

impl GammaSpectrum {
    pub fn new(ch: &ChannelModel, nz: &NoiseModel) -> Result<Self> {
        if ch.dim() != nz.dim() {
            return Err(Error::Dimension(format!(
                "SIMO model needs Nr×Nr channel and noise covariances, got {} and {}",
                ch.dim(),
                nz.dim()
            )));
        }
        let w = linalg::inv_sqrt_hermitian(nz.matrix())?;
        let gamma = linalg::hermitian_part(&(&w * ch.matrix() * &w));
        let sigma_max = HermitianEigen::new(&gamma)?.max().max(0.0);
        let trace_sq = linalg::frobenius_sq(&gamma);
        Ok(GammaSpectrum {
            gamma,
            sigma_max,
            trace_sq,
        })
    }
}

/// `J = Δ²·tr{C_h Σ_b⁻¹ C_h Σ_a⁻¹}` with `Σ_◇ = |x_◇|² C_h + C_z`.
pub fn simo_jeffreys(pair: &SimoPair, ch: &ChannelModel, nz: &NoiseModel) -> Result<f64> {
    if ch.dim() != nz.dim() {
        return Err(Error::Dimension(
            "SIMO divergence needs K = Nt = 1 (matching Nr×Nr covariances)".into(),
        ));
    }
    if pair.delta == 0.0 {
        return Ok(0.0);
    }
    let sigma =
        |x: Complex64| ConditionalCovariance::from_sigma(ch.matrix() * Complex64::new(x.norm_sqr(), 0.0) + nz.matrix());
    let (sa, sb) = (sigma(pair.xa)?, sigma(pair.xb)?);
    let pa = sa.solve(ch.matrix());
    let pb = sb.solve(ch.matrix());
    let t = linalg::trace(&(pb * pa)).re;
    clamp_divergence(pair.delta * pair.delta * t)
}

/// `(Δ²·tr{Γ²}/((|x_a|²C + 1)(|x_b|²C + 1)), Δ²·tr{Γ²})`.
pub fn simo_bounds(pair: &SimoPair, gamma: &GammaSpectrum) -> (f64, f64) {
    let d2 = pair.delta * pair.delta;
    let upper = d2 * gamma.trace_sq;
    let c = gamma.sigma_max;
    let lower = upper / ((pair.xa.norm_sqr() * c + 1.0) * (pair.xb.norm_sqr() * c + 1.0));
    (lower, upper)
}
