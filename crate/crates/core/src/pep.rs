//! Pairwise and full error probabilities.
//!
//! The pairwise error probability `P_{a→b} = P{L_{a,b}(y) ≤ 0 | S_a}` is
//! estimated two independent ways:
//!
//! * [`pep_monte_carlo`] draws `y ~ CN(0, Σ_a)` and counts non-positive LLRs.
//! * [`pep_quadform`] writes `y = Σ_a^{1/2} w`, so that
//!   `L = Σ_k μ_k |w_k|² − Σ_k ln ρ_k` with `ρ_k` the generalized eigenvalues of
//!   `(Σ_a, Σ_b)` and `μ_k = ρ_k − 1`. The `|w_k|²` are i.i.d. unit
//!   exponentials, and the distribution of the indefinite form is recovered
//!   by numerically inverting its characteristic function.
//!
//! Ties (`L = 0`) count as errors throughout, so identical hypotheses give a
//! PEP of exactly one.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::detector::{self, DetectorBank};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{CMatrix, HermitianEigen};
use crate::model::{Alphabet, ChannelModel, ConditionalCovariance, NoiseModel, PowerConfig, SystemDims};
use crate::rng;

/// Standard-normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Largest covariance dimension accepted by the quadrature oracle.
pub const QUADFORM_MAX_DIM: usize = 512;

/// Generalized eigenvalues within this distance of one are treated as
/// coincident hypotheses.
pub const IDENTICAL_TOL: f64 = 1e-9;

/// Monte Carlo LLRs within this fraction of the magnitude of their terms are
/// ties, and ties count as errors. Without it, hypotheses that coincide up to
/// roundoff would split their ties by the sign of the rounding noise.
pub const TIE_RTOL: f64 = 1e-10;

const MAX_QUADRATURE_TERMS: usize = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PepMethod {
    MonteCarlo,
    QuadformCf,
}

impl fmt::Display for PepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PepMethod::MonteCarlo => "monte-carlo",
            PepMethod::QuadformCf => "quadform-cf",
        })
    }
}

/// A probability estimate with its 95% interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PepEstimate {
    pub value: f64,
    /// Half-width of the 95% interval (the quadrature tolerance for `quadform-cf`).
    pub ci95: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: PepMethod,
    /// Monte Carlo trials (0 for the quadrature).
    pub trials: u64,
}

impl PepEstimate {
    /// Wilson score interval for `hits` successes in `trials` draws.
    pub fn wilson(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        PepEstimate {
            value: p,
            ci95: half,
            lower: if hits == 0 { 0.0 } else { (center - half).max(0.0) },
            upper: if hits == trials { 1.0 } else { (center + half).min(1.0) },
            method: PepMethod::MonteCarlo,
            trials,
        }
    }

    fn exact(value: f64, tol: f64) -> Self {
        let value = value.clamp(0.0, 1.0);
        PepEstimate {
            value,
            ci95: tol,
            lower: (value - tol).max(0.0),
            upper: (value + tol).min(1.0),
            method: PepMethod::QuadformCf,
            trials: 0,
        }
    }

    /// True when the two 95% intervals overlap.
    pub fn agrees_with(&self, other: &PepEstimate) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }

    /// A quadrature value under its own tolerance only bounds the PEP from above.
    pub fn is_upper_bound_only(&self) -> bool {
        self.method == PepMethod::QuadformCf && self.value < self.ci95
    }
}

/// Monte Carlo estimate of `P_{a→b}` with a Wilson 95% interval.
pub fn pep_monte_carlo(
    cov_a: &ConditionalCovariance,
    cov_b: &ConditionalCovariance,
    trials: u64,
    seed: u64,
) -> Result<PepEstimate> {
    pep_monte_carlo_with(cov_a, cov_b, trials, seed, Execution::default())
}

pub fn pep_monte_carlo_with(
    cov_a: &ConditionalCovariance,
    cov_b: &ConditionalCovariance,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<PepEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if cov_a.dim() != cov_b.dim() {
        return Err(Error::Dimension("hypotheses of different dimension".into()));
    }
    let hits = exec.count(trials as usize, |i| {
        let y = cov_a.sample_with(&mut rng::stream(seed, i as u64));
        let (llr, scale) = detector::llr_with_scale(&y, cov_a, cov_b);
        llr <= TIE_RTOL * scale
    });
    Ok(PepEstimate::wilson(hits, trials))
}

/// Generalized eigenvalues `ρ_k` of `Σ_a x = ρ Σ_b x`, ascending.
pub fn generalized_eigenvalues(cov_a: &ConditionalCovariance, cov_b: &ConditionalCovariance) -> Result<Vec<f64>> {
    let l = cov_b.cholesky_factor();
    let x: CMatrix = l
        .solve_lower_triangular(cov_a.sigma())
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;
    let m = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;
    Ok(HermitianEigen::new(&m)?.values.iter().copied().collect())
}

/// `P_{a→b}` by characteristic-function inversion, to absolute accuracy `tol`.
pub fn pep_quadform(cov_a: &ConditionalCovariance, cov_b: &ConditionalCovariance, tol: f64) -> Result<PepEstimate> {
    if cov_a.dim() != cov_b.dim() {
        return Err(Error::Dimension("hypotheses of different dimension".into()));
    }
    if cov_a.dim() > QUADFORM_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "quadrature oracle limited to dimension {QUADFORM_MAX_DIM}"
        )));
    }
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::InvalidArgument(format!("tol must lie in (0, 1e-3], got {tol}")));
    }
    let rho = generalized_eigenvalues(cov_a, cov_b)?;
    if rho.iter().all(|r| (r - 1.0).abs() <= IDENTICAL_TOL) {
        return Ok(PepEstimate::exact(1.0, tol));
    }
    let weights: Vec<f64> = rho.iter().map(|r| r - 1.0).collect();
    let threshold: f64 = rho.iter().map(|r| r.ln()).sum();
    let (p, _) = exponential_form_cdf(&weights, threshold, tol)?;
    Ok(PepEstimate::exact(p, tol))
}

/// `P(Σ_k w_k e_k ≤ c)` for i.i.d. unit-mean exponentials `e_k`, together
/// with the a-priori error bound of the quadrature.
///
/// Gil-Pelaez inversion `F(c) = ½ − (1/π)∫₀^∞ Im[e^{−itc}φ(t)]/t dt` with
/// `φ(t) = Π_k (1 − i w_k t)^{-1}`, evaluated on the midpoint grid
/// `t_j = (j + ½)h`. The step `h = 2π/D` keeps aliasing below `tol/4`, with `D`
/// sized from Chernoff tail bounds; the truncation point doubles until the
/// bound on the neglected integral falls below `tol/2`.
pub fn exponential_form_cdf(weights: &[f64], c: f64, tol: f64) -> Result<(f64, f64)> {
    let w: Vec<f64> = weights.iter().copied().filter(|x| *x != 0.0).collect();
    if w.is_empty() {
        return Ok((if c >= 0.0 { 1.0 } else { 0.0 }, 0.0));
    }

    let scale: f64 = w.iter().map(|x| x.abs()).sum();
    let mut span = scale.max(c.abs() * 1e-3).max(f64::MIN_POSITIVE);
    let mut alias = tails_beyond(&w, c, span);
    let mut guard = 0;
    while alias > tol / 4.0 {
        span *= 2.0;
        alias = tails_beyond(&w, c, span);
        guard += 1;
        if guard > 200 {
            return Err(Error::Quadrature { estimate: alias, tol });
        }
    }
    let h = 2.0 * PI / span;

    let mut mags: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut upper = 1.0 / mags[0];
    let mut trunc = truncation_bound(&mags, upper);
    while trunc > tol / 2.0 {
        upper *= 2.0;
        trunc = truncation_bound(&mags, upper);
    }
    let terms = (upper / h).ceil() as usize;
    if terms > MAX_QUADRATURE_TERMS {
        return Err(Error::Quadrature {
            estimate: truncation_bound(&mags, MAX_QUADRATURE_TERMS as f64 * h) + alias,
            tol,
        });
    }

    let mut sum = 0.0;
    for j in 0..terms {
        let t = (j as f64 + 0.5) * h;
        let mut phase = -c * t;
        let mut log_mod = 0.0;
        for &x in &w {
            let xt = x * t;
            phase += xt.atan();
            log_mod += (xt * xt).ln_1p();
        }
        sum += phase.sin() * (-0.5 * log_mod).exp() / (j as f64 + 0.5);
    }
    let p = (0.5 - sum / PI).clamp(0.0, 1.0);
    Ok((p, alias + trunc))
}

/// Bound on `(1/π)∫_U^∞ |φ(t)|/t dt` using the `m` largest weights:
/// `1 / (π·m·U^m·Π|w|)`, minimized over `m`.
fn truncation_bound(sorted_mags: &[f64], upper: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut log_prod = 0.0;
    for (i, &m) in sorted_mags.iter().enumerate() {
        let k = (i + 1) as f64;
        log_prod += (m * upper).ln();
        let bound = (-log_prod).exp() / (PI * k);
        best = best.min(bound);
    }
    best
}

/// Chernoff bound on `P(Q ≥ c + d) + P(Q ≤ c − d)`.
fn tails_beyond(w: &[f64], c: f64, d: f64) -> f64 {
    let neg: Vec<f64> = w.iter().map(|x| -x).collect();
    chernoff_upper(w, c + d) + chernoff_upper(&neg, -(c - d))
}

/// `inf_s exp(−s·x − Σ ln(1 − s·w_k))`, a bound on `P(Σ w_k e_k ≥ x)`.
fn chernoff_upper(w: &[f64], x: f64) -> f64 {
    let mean: f64 = w.iter().sum();
    if x <= mean {
        return 1.0;
    }
    let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top <= 0.0 && x > 0.0 {
        return 0.0;
    }
    let log_bound = |s: f64| -> f64 {
        let mut acc = -s * x;
        for &wk in w {
            let arg = 1.0 - s * wk;
            if arg <= 0.0 {
                return f64::INFINITY;
            }
            acc -= arg.ln();
        }
        acc
    };
    let hi = if top > 0.0 {
        (1.0 - 1e-12) / top
    } else {
        // all weights non-positive and x ≤ 0: grow until the bound turns upward
        let mut s = 1.0 / w.iter().map(|v| v.abs()).fold(0.0, f64::max).max(x.abs()).max(1e-300);
        while log_bound(2.0 * s) < log_bound(s) {
            s *= 2.0;
        }
        2.0 * s
    };
    let (mut lo, mut hi) = (0.0, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut m1 = hi - g * (hi - lo);
    let mut m2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (log_bound(m1), log_bound(m2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - g * (hi - lo);
            f1 = log_bound(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + g * (hi - lo);
            f2 = log_bound(m2);
        }
    }
    f1.min(f2).min(0.0).exp()
}

/// Bracket on the M-ary error probability from the largest PEP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `max PEP / M ≤ P_e ≤ min(1, (M − 1)·max PEP)`.
pub fn error_prob_bounds(max_pep: f64, m: usize) -> Result<ErrorBounds> {
    if m < 2 {
        return Err(Error::InvalidArgument("error bounds need M >= 2".into()));
    }
    if !(0.0..=1.0).contains(&max_pep) {
        return Err(Error::InvalidArgument(format!(
            "max PEP {max_pep} is not a probability"
        )));
    }
    Ok(ErrorBounds {
        lower: max_pep / m as f64,
        upper: ((m - 1) as f64 * max_pep).min(1.0),
    })
}

/// Quadrature PEPs for every ordered pair `a ≠ b`, as `(a, b, estimate)`.
pub fn pairwise_peps_quadform(covs: &[ConditionalCovariance], tol: f64) -> Result<Vec<(usize, usize, PepEstimate)>> {
    let pairs: Vec<(usize, usize)> = ordered_pairs(covs.len());
    Execution::default()
        .map_slice(&pairs, |&(a, b)| {
            pep_quadform(&covs[a], &covs[b], tol).map(|p| (a, b, p))
        })
        .into_iter()
        .collect()
}

pub fn ordered_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|a| (0..m).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect()
}

/// Full M-ary symbol error rate of the ML detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolErrorEstimate {
    /// Error rate when codeword `i` is sent.
    pub per_codeword: Vec<f64>,
    pub per_codeword_trials: Vec<u64>,
    /// Equal-weight average of `per_codeword`.
    pub average: f64,
    /// Wilson 95% interval on the pooled error count.
    pub ci95: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: u64,
}

/// Sends codeword `t mod M` on trial `t` (stream `(seed, t)`) and runs ML detection.
pub fn symbol_error_monte_carlo(
    alphabet: &Alphabet,
    ch: &ChannelModel,
    nz: &NoiseModel,
    pw: &PowerConfig,
    dims: &SystemDims,
    trials: u64,
    seed: u64,
) -> Result<SymbolErrorEstimate> {
    let bank = DetectorBank::from_model(alphabet, ch, nz, pw, dims.nr)?;
    symbol_error_bank_with(&bank, trials, seed, Execution::default())
}

pub fn symbol_error_bank_with(
    bank: &DetectorBank,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<SymbolErrorEstimate> {
    let m = bank.len();
    if trials < m as u64 {
        return Err(Error::InvalidArgument(format!(
            "need at least M = {m} trials, got {trials}"
        )));
    }
    let covs = bank.covariances();
    let tally = exec.tally(trials as usize, m, |t| {
        let sent = t % m;
        if m == 1 {
            return (0, false);
        }
        let y = covs[sent].sample_with(&mut rng::stream(seed, t as u64));
        let decided = detector::argmax_lowest(&bank.log_likelihoods(&y).expect("sample length matches the bank"));
        (sent, decided != sent)
    });
    let per_codeword: Vec<f64> = tally.iter().map(|&(n, e)| e as f64 / n as f64).collect();
    let errors: u64 = tally.iter().map(|x| x.1).sum();
    let pooled = PepEstimate::wilson(errors, trials);
    Ok(SymbolErrorEstimate {
        average: per_codeword.iter().sum::<f64>() / m as f64,
        per_codeword_trials: tally.iter().map(|x| x.0).collect(),
        per_codeword,
        ci95: pooled.ci95,
        lower: pooled.lower,
        upper: pooled.upper,
        trials,
    })
}
