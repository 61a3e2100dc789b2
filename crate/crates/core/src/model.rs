//! Block-fading signal model.
//!
//! A codeword `S` (K×Nt) is sent over a channel `H` (Nt×Nr) that stays constant
//! for the K channel uses of a coherence block: `Y = √Px·S·H + Z`. Vectorizing
//! column-wise gives `y = (I_Nr ⊗ X)·vec(H) + vec(Z)`, and marginalizing the
//! Rayleigh channel leaves `y | S_i ~ CN(0, Σ_i)` with
//! `Σ_i = X̆_i C_h X̆_iᴴ + C_z`.
//!
//! Power normalizations are advisory: the constructors accept any Hermitian
//! PSD channel covariance and any PD noise covariance, and
//! [`check_normalizations`] reports how far an instance is from the
//! normalized model.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, CMatrix, CVector, HermitianEigen};
use crate::rng;

/// Eigenvalue ratio below which a covariance counts as numerically singular.
pub const SINGULARITY_RATIO: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SystemDims {
    /// Coherence block length (channel uses).
    pub k: usize,
    pub nt: usize,
    pub nr: usize,
    /// Alphabet size.
    pub m: usize,
}

impl SystemDims {
    pub fn new(k: usize, nt: usize, nr: usize, m: usize) -> Result<Self> {
        if k == 0 || nt == 0 || nr == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive (K={k}, Nt={nt}, Nr={nr}, M={m})"
            )));
        }
        Ok(SystemDims { k, nt, nr, m })
    }

    /// Length of the vectorized received block, `K·Nr`.
    pub fn rx_len(&self) -> usize {
        self.k * self.nr
    }

    /// Size of the vectorized channel, `Nt·Nr`.
    pub fn channel_len(&self) -> usize {
        self.nt * self.nr
    }
}

/// A K×Nt symbol matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(CMatrix);

impl Codeword {
    pub fn new(s: CMatrix) -> Result<Self> {
        if !linalg::all_finite(&s) {
            return Err(Error::NonFinite("codeword"));
        }
        if s.nrows() == 0 || s.ncols() == 0 {
            return Err(Error::Dimension("codeword must be non-empty".into()));
        }
        Ok(Codeword(s))
    }

    /// A 1×1 codeword.
    pub fn scalar(x: Complex64) -> Result<Self> {
        Self::new(CMatrix::from_element(1, 1, x))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn nt(&self) -> usize {
        self.0.ncols()
    }

    pub fn energy(&self) -> f64 {
        linalg::frobenius_sq(&self.0)
    }
}

/// Ordered codebook of M equally likely codewords sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    codewords: Vec<Codeword>,
    normalized: bool,
}

impl Alphabet {
    /// Wraps the codewords as given. The `normalized` flag reflects whether the
    /// average-power constraint already holds.
    pub fn new(codewords: Vec<Codeword>) -> Result<Self> {
        let first = codewords
            .first()
            .ok_or_else(|| Error::InvalidArgument("alphabet must contain a codeword".into()))?;
        let shape = first.matrix().shape();
        if let Some(bad) = codewords.iter().find(|c| c.matrix().shape() != shape) {
            return Err(Error::Dimension(format!(
                "codeword of shape {:?} in alphabet of shape {:?}",
                bad.matrix().shape(),
                shape
            )));
        }
        let mut a = Alphabet {
            codewords,
            normalized: false,
        };
        a.normalized = (a.average_power() - 1.0).abs() <= 1e-12;
        Ok(a)
    }

    /// Rescales every codeword by one common factor so that
    /// `(1/(M·K))·Σ‖S_i‖_F² = 1`. An all-zero alphabet cannot be normalized and
    /// is returned unchanged (flag stays false).
    pub fn normalized(mut self) -> Self {
        let p = self.average_power();
        if p > 0.0 {
            let scale = Complex64::new(1.0 / p.sqrt(), 0.0);
            for c in &mut self.codewords {
                c.0 *= scale;
            }
            self.normalized = (self.average_power() - 1.0).abs() <= 1e-12;
        } else {
            log::warn!("alphabet has zero average energy and cannot be power-normalized");
        }
        self
    }

    /// `(1/(M·K))·Σ‖S_i‖_F²`.
    pub fn average_power(&self) -> f64 {
        let total: f64 = self.codewords.iter().map(Codeword::energy).sum();
        total / (self.len() * self.k()) as f64
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn get(&self, i: usize) -> &Codeword {
        &self.codewords[i]
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn k(&self) -> usize {
        self.codewords[0].k()
    }

    pub fn nt(&self) -> usize {
        self.codewords[0].nt()
    }

    pub fn dims(&self, nr: usize) -> Result<SystemDims> {
        SystemDims::new(self.k(), self.nt(), nr, self.len())
    }
}

/// Transmit and noise power (linear scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerConfig {
    px: f64,
    pz: f64,
}

impl PowerConfig {
    pub fn new(px: f64, pz: f64) -> Result<Self> {
        if !(px >= 0.0 && px.is_finite()) || !(pz > 0.0 && pz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "powers must satisfy Px >= 0, Pz > 0 (got Px={px}, Pz={pz})"
            )));
        }
        Ok(PowerConfig { px, pz })
    }

    /// `Px = γ·Pz`.
    pub fn from_gamma(gamma: f64, pz: f64) -> Result<Self> {
        Self::new(gamma * pz, pz)
    }

    pub fn px(&self) -> f64 {
        self.px
    }

    pub fn pz(&self) -> f64 {
        self.pz
    }

    /// `γ = Px / Pz`.
    pub fn gamma(&self) -> f64 {
        self.px / self.pz
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Covariance of the vectorized channel `vec(H)`, (Nt·Nr)×(Nt·Nr).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    ch: CMatrix,
}

impl ChannelModel {
    pub fn new(ch: CMatrix) -> Result<Self> {
        let ch = validated_hermitian(ch, "channel covariance")?;
        let eig = HermitianEigen::new(&ch)?;
        let (lo, hi) = (eig.min(), eig.max());
        if lo < -HERMITIAN_TOL * hi.max(0.0) {
            return Err(Error::NotPositiveSemidefinite {
                what: "channel covariance",
                min_eigenvalue: lo,
            });
        }
        Ok(ChannelModel { ch })
    }

    /// `I / dim`: uncorrelated fading with `E‖H‖_F² = 1`.
    pub fn isotropic(dim: usize) -> Self {
        ChannelModel {
            ch: linalg::identity(dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// Diagonal covariance with the given eigenvalues.
    pub fn from_spectrum(values: &[f64]) -> Result<Self> {
        Self::new(linalg::real_diagonal(values))
    }

    /// Eigenvalues `λ_k ∝ k^{-p}`, `k = 1..dim`, scaled to unit trace.
    pub fn polynomial_decay(dim: usize, exponent: f64) -> Self {
        let spectrum = decay_spectrum(dim, exponent, 1.0);
        ChannelModel {
            ch: linalg::real_diagonal(&spectrum),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.ch
    }

    pub fn dim(&self) -> usize {
        self.ch.nrows()
    }

    /// Numerical rank, counting eigenvalues above `dim·ε·σ_max`.
    pub fn rank(&self) -> Result<usize> {
        let eig = HermitianEigen::new(&self.ch)?;
        let tol = self.dim() as f64 * f64::EPSILON * eig.max().max(0.0);
        Ok(eig.values.iter().filter(|&&v| v > tol).count())
    }

    /// Fails with [`Error::RankDeficientChannel`] unless the covariance is full rank.
    pub fn require_full_rank(&self) -> Result<()> {
        let rank = self.rank()?;
        if rank < self.dim() {
            return Err(Error::RankDeficientChannel { rank, dim: self.dim() });
        }
        Ok(())
    }
}

/// Covariance of the vectorized noise `vec(Z)`, (K·Nr)×(K·Nr), with the noise
/// power `Pz` used for the normalized version `C̄_z = C_z / Pz`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    cz: CMatrix,
    pz: f64,
}

impl NoiseModel {
    pub fn new(cz: CMatrix, pz: f64) -> Result<Self> {
        if !(pz > 0.0 && pz.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise power must be > 0 (got {pz})")));
        }
        let cz = validated_hermitian(cz, "noise covariance")?;
        let eig = HermitianEigen::new(&cz)?;
        if eig.min() <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: eig.min(),
            });
        }
        Ok(NoiseModel { cz, pz })
    }

    /// `Pz·I`.
    pub fn isotropic(dim: usize, pz: f64) -> Result<Self> {
        Self::new(linalg::identity(dim) * Complex64::new(pz, 0.0), pz)
    }

    /// Eigenvalues `σ_k ∝ k^{-p}` scaled to trace `dim·Pz`.
    pub fn polynomial_decay(dim: usize, exponent: f64, pz: f64) -> Result<Self> {
        let spectrum = decay_spectrum(dim, exponent, dim as f64 * pz);
        Self::new(linalg::real_diagonal(&spectrum), pz)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.cz
    }

    pub fn pz(&self) -> f64 {
        self.pz
    }

    /// `C̄_z = C_z / Pz`.
    pub fn normalized_matrix(&self) -> CMatrix {
        &self.cz * Complex64::new(1.0 / self.pz, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.cz.nrows()
    }
}

fn decay_spectrum(dim: usize, exponent: f64, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=dim).map(|k| (k as f64).powf(-exponent)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v * total / sum).collect()
}

fn validated_hermitian(m: CMatrix, what: &'static str) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{what} must be square, got {:?}", m.shape())));
    }
    if !linalg::all_finite(&m) {
        return Err(Error::NonFinite(what));
    }
    let asym = linalg::asymmetry(&m);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { what, asymmetry: asym });
    }
    Ok(linalg::hermitian_part(&m))
}

/// Received-signal covariance under one hypothesis, with its Cholesky factor
/// and log-determinant cached.
#[derive(Debug, Clone)]
pub struct ConditionalCovariance {
    sigma: CMatrix,
    chol: Cholesky<Complex64, nalgebra::Dyn>,
    l: CMatrix,
    logdet: f64,
}

impl ConditionalCovariance {
    /// Factorizes a Hermitian PD matrix. Loss of definiteness and eigenvalue
    /// ratios below [`SINGULARITY_RATIO`] are construction errors.
    pub fn from_sigma(sigma: CMatrix) -> Result<Self> {
        let sigma = validated_hermitian(sigma, "conditional covariance")?;
        let eig = HermitianEigen::new(&sigma)?;
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        if lo < SINGULARITY_RATIO * hi {
            return Err(Error::NearSingular { ratio: lo / hi });
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite { min_eigenvalue: lo })?;
        let l = chol.l();
        let logdet = 2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
        Ok(ConditionalCovariance { sigma, chol, l, logdet })
    }

    pub fn sigma(&self) -> &CMatrix {
        &self.sigma
    }

    /// Lower-triangular Cholesky factor `L` with `Σ = L Lᴴ`.
    pub fn cholesky_factor(&self) -> &CMatrix {
        &self.l
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// `yᴴ Σ⁻¹ y` by a forward triangular solve.
    pub fn quadratic_form(&self, y: &CVector) -> f64 {
        let w = self
            .l
            .solve_lower_triangular(y)
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }

    /// `Σ⁻¹ b` for a matrix right-hand side.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }

    /// One draw `L·w` with `w ~ CN(0, I)`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let w = CVector::from_fn(self.dim(), |_, _| rng::complex_normal(rng));
        &self.l * w
    }
}

/// `S̆ = I_Nr ⊗ S`, shape (K·Nr)×(Nt·Nr).
pub fn expand_codeword(s: &Codeword, nr: usize) -> Result<CMatrix> {
    if nr == 0 {
        return Err(Error::Dimension("Nr must be at least 1".into()));
    }
    Ok(linalg::kron_identity(nr, s.matrix()))
}

/// `Σ = X̆ C_h X̆ᴴ + C_z` with `X̆ = √Px·(I_Nr ⊗ S)`.
pub fn conditional_covariance(
    s: &Codeword,
    ch: &ChannelModel,
    nz: &NoiseModel,
    pw: &PowerConfig,
    nr: usize,
) -> Result<ConditionalCovariance> {
    if ch.dim() != s.nt() * nr {
        return Err(Error::Dimension(format!(
            "channel covariance is {0}×{0}, expected Nt·Nr = {1}",
            ch.dim(),
            s.nt() * nr
        )));
    }
    if nz.dim() != s.k() * nr {
        return Err(Error::Dimension(format!(
            "noise covariance is {0}×{0}, expected K·Nr = {1}",
            nz.dim(),
            s.k() * nr
        )));
    }
    let x = expand_codeword(s, nr)? * Complex64::new(pw.px().sqrt(), 0.0);
    let sigma = &x * ch.matrix() * x.adjoint() + nz.matrix();
    ConditionalCovariance::from_sigma(sigma)
}

/// One covariance per codeword, in alphabet order.
pub fn conditional_covariances(
    alphabet: &Alphabet,
    ch: &ChannelModel,
    nz: &NoiseModel,
    pw: &PowerConfig,
    nr: usize,
) -> Result<Vec<ConditionalCovariance>> {
    alphabet
        .codewords()
        .iter()
        .map(|s| conditional_covariance(s, ch, nz, pw, nr))
        .collect()
}

/// `n` draws of `y ~ CN(0, Σ)`; draw `i` uses stream `(seed, i)`.
pub fn sample_received(cov: &ConditionalCovariance, n: usize, seed: u64) -> Vec<CVector> {
    sample_received_with(cov, n, seed, Execution::default())
}

pub fn sample_received_with(cov: &ConditionalCovariance, n: usize, seed: u64, exec: Execution) -> Vec<CVector> {
    exec.map(n, |i| cov.sample_with(&mut rng::stream(seed, i as u64)))
}

/// Receive SNR `γ·E_S[tr{S̆ᴴS̆ C_h}]/K`, averaging over the alphabet with equal weights.
pub fn snr(alphabet: &Alphabet, ch: &ChannelModel, pw: &PowerConfig, dims: &SystemDims) -> Result<f64> {
    Ok(pw.gamma() * snr_gain(alphabet, ch, dims)?)
}

/// `E_S[tr{S̆ᴴS̆ C_h}]/K`, the factor mapping γ to the receive SNR.
pub fn snr_gain(alphabet: &Alphabet, ch: &ChannelModel, dims: &SystemDims) -> Result<f64> {
    let mut acc = 0.0;
    for s in alphabet.codewords() {
        let sx = expand_codeword(s, dims.nr)?;
        if sx.ncols() != ch.dim() {
            return Err(Error::Dimension(format!(
                "channel covariance is {0}×{0}, expected {1}",
                ch.dim(),
                sx.ncols()
            )));
        }
        acc += linalg::trace(&(sx.adjoint() * &sx * ch.matrix())).re;
    }
    Ok(acc / (alphabet.len() * dims.k) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationCheck {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub pass: bool,
}

impl NormalizationCheck {
    fn new(name: &'static str, measured: f64, expected: f64) -> Self {
        let pass = (measured - expected).abs() <= NORMALIZATION_TOL * expected.abs().max(1e-300);
        NormalizationCheck {
            name,
            measured,
            expected,
            pass,
        }
    }
}

pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    /// `(1/(M·K))·Σ‖S_i‖_F² = 1`.
    pub alphabet_power: NormalizationCheck,
    /// `trace(C_h) = E‖H‖_F² = 1`.
    pub channel_power: NormalizationCheck,
    /// `trace(C_z) = K·Nr·Pz`.
    pub noise_power: NormalizationCheck,
}

impl NormalizationReport {
    pub fn all_pass(&self) -> bool {
        self.alphabet_power.pass && self.channel_power.pass && self.noise_power.pass
    }
}

/// Advisory check of the normalized-model constraints (relative tolerance 1e-9).
pub fn check_normalizations(
    alphabet: &Alphabet,
    ch: &ChannelModel,
    nz: &NoiseModel,
    dims: &SystemDims,
) -> NormalizationReport {
    NormalizationReport {
        alphabet_power: NormalizationCheck::new("alphabet_power", alphabet.average_power(), 1.0),
        channel_power: NormalizationCheck::new("channel_power", linalg::trace(ch.matrix()).re, 1.0),
        noise_power: NormalizationCheck::new(
            "noise_power",
            linalg::trace(nz.matrix()).re,
            (dims.k * dims.nr) as f64 * nz.pz(),
        ),
    }
}
