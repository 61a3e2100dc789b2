//! Singular-detection verdicts.
//!
//! Three questions are answered here for a given alphabet:
//!
//! * unique identifiability: do distinct codewords induce distinct covariances?
//! * large-array regime: does the Jeffreys divergence of a pair keep growing
//!   with the number of receive antennas? Finitely many array sizes cannot
//!   settle a limit, so [`large_array_curve`] returns a labeled heuristic
//!   verdict from the log-log growth rate.
//! * high-SNR regime: do distinct codewords span distinct column spaces?

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use serde::Serialize;

use crate::divergence;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, CMatrix};
use crate::model::{self, Alphabet, ChannelModel, Codeword, NoiseModel, PowerConfig, SystemDims};

/// Default largest principal angle (radians) below which two subspaces are equal.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-8;

/// Relative eigenvalue threshold used to read off the column space of Ξ.
pub const XI_RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of a column space.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: CMatrix,
    tol: f64,
}

impl SubspaceBasis {
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projector `U Uᴴ`, independent of the choice of basis.
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }
}

/// Column space from the SVD: left singular vectors whose singular value
/// exceeds `tol`, by default `max(rows, cols)·ε·σ_max`.
pub fn column_space(m: &CMatrix, tol: Option<f64>) -> Result<SubspaceBasis> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 || linalg::max_abs(m) == 0.0 {
        return Ok(SubspaceBasis {
            basis: CMatrix::zeros(rows, 0),
            tol: tol.unwrap_or(0.0),
        });
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.ok_or(Error::EigenFailure)?;
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON * smax);
    let mut keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol).collect();
    keep.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut basis = CMatrix::zeros(rows, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    Ok(SubspaceBasis { basis, tol })
}

/// Principal angles between two subspaces of equal rank, ascending, from the
/// singular values of `AᴴB` (cosines) clamped to `[0, 1]`.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<Vec<f64>> {
    check_ambient(a, b)?;
    if a.rank() == 0 || b.rank() == 0 {
        return Ok(Vec::new());
    }
    let cross = a.basis.adjoint() * &b.basis;
    let sv = cross.singular_values();
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Largest principal angle between equal-rank subspaces, computed from its
/// sine `‖(I − P_A)B‖₂`, which stays accurate for nearly equal subspaces.
/// Returns π/2 when the ranks differ.
pub fn largest_principal_angle(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    check_ambient(a, b)?;
    if a.rank() != b.rank() {
        return Ok(FRAC_PI_2);
    }
    if a.rank() == 0 {
        return Ok(0.0);
    }
    let residual = &b.basis - &a.basis * (a.basis.adjoint() * &b.basis);
    let s = residual.singular_values().iter().copied().fold(0.0, f64::max);
    Ok(s.min(1.0).asin())
}

fn check_ambient(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<()> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::Dimension(format!(
            "subspaces of C^{} and C^{}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    Ok(())
}

/// Equal ranks and largest principal angle below `angle_tol`.
pub fn subspaces_equal(a: &SubspaceBasis, b: &SubspaceBasis, angle_tol: f64) -> Result<bool> {
    check_ambient(a, b)?;
    if a.rank() != b.rank() {
        return Ok(false);
    }
    Ok(largest_principal_angle(a, b)? < angle_tol)
}

/// Pairs `(a, b)`, `a < b`, whose covariances coincide:
/// `‖Σ_a − Σ_b‖_F ≤ tol·max(‖Σ_a‖_F, ‖Σ_b‖_F)`.
pub fn unique_identifiability(
    alphabet: &Alphabet,
    ch: &ChannelModel,
    nz: &NoiseModel,
    pw: &PowerConfig,
    dims: &SystemDims,
    tol: f64,
) -> Result<Vec<(usize, usize)>> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::InvalidArgument(format!("tol must lie in (0, 1e-3], got {tol}")));
    }
    let covs = model::conditional_covariances(alphabet, ch, nz, pw, dims.nr)?;
    let norms: Vec<f64> = covs.iter().map(|c| linalg::frobenius_sq(c.sigma()).sqrt()).collect();
    let mut flagged = Vec::new();
    for a in 0..covs.len() {
        for b in a + 1..covs.len() {
            let diff = linalg::frobenius_sq(&(covs[a].sigma() - covs[b].sigma())).sqrt();
            if diff <= tol * norms[a].max(norms[b]) {
                flagged.push((a, b));
            }
        }
    }
    Ok(flagged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveVerdict {
    DivergentEvidence,
    BoundedEvidence,
    Inconclusive,
}

impl std::fmt::Display for CurveVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveVerdict::DivergentEvidence => "divergent-evidence",
            CurveVerdict::BoundedEvidence => "bounded-evidence",
            CurveVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// Log-log slope above which growth counts as divergent evidence.
pub const DIVERGENT_SLOPE: f64 = 0.2;
/// Log-log slope below which the curve counts as bounded evidence.
pub const BOUNDED_SLOPE: f64 = 0.05;

/// Jeffreys divergence of one pair across array sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceCurve {
    pub nr_values: Vec<usize>,
    pub j_values: Vec<f64>,
    /// Least-squares slope of `ln J` against `ln Nr` over the upper half of the grid.
    pub slope: f64,
    pub verdict: CurveVerdict,
}

impl DivergenceCurve {
    /// Fits the growth exponent and applies the slope thresholds. The verdict
    /// is a finite-sample heuristic, not a proof of divergence.
    pub fn from_values(nr_values: Vec<usize>, j_values: Vec<f64>) -> Result<Self> {
        if nr_values.len() < 4 || nr_values.len() != j_values.len() {
            return Err(Error::InvalidArgument(
                "need at least four array sizes with one J value each".into(),
            ));
        }
        if nr_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("array sizes must be strictly increasing".into()));
        }
        let n = nr_values.len();
        let start = n / 2;
        let upper: Vec<(f64, f64)> = (start..n).map(|i| ((nr_values[i] as f64).ln(), j_values[i])).collect();
        let (slope, verdict) = if j_values.iter().all(|&j| j < 1e-12) {
            (0.0, CurveVerdict::BoundedEvidence)
        } else if upper.iter().any(|&(_, j)| j <= 0.0) {
            (f64::NAN, CurveVerdict::Inconclusive)
        } else {
            let pts: Vec<(f64, f64)> = upper.iter().map(|&(x, j)| (x, j.ln())).collect();
            let slope = ls_slope(&pts);
            let verdict = if slope > DIVERGENT_SLOPE && j_values[n - 1] > 2.0 * j_values[0] {
                CurveVerdict::DivergentEvidence
            } else if slope < BOUNDED_SLOPE {
                CurveVerdict::BoundedEvidence
            } else {
                CurveVerdict::Inconclusive
            };
            (slope, verdict)
        };
        Ok(DivergenceCurve {
            nr_values,
            j_values,
            slope,
            verdict,
        })
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Model at one array size, as produced by a family generator.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub alphabet: Alphabet,
    pub ch: ChannelModel,
    pub nz: NoiseModel,
    pub pw: PowerConfig,
}

/// Evaluates `J_Nr = J(Σ_a(Nr), Σ_b(Nr))` over `nr_values` and classifies its growth.
pub fn large_array_curve<F>(family: F, pair: (usize, usize), nr_values: &[usize]) -> Result<DivergenceCurve>
where
    F: Fn(usize) -> Result<ModelInstance> + Sync,
{
    if nr_values.len() < 4 || nr_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "need at least four strictly increasing array sizes".into(),
        ));
    }
    let j_values: Vec<f64> = Execution::default()
        .map_slice(nr_values, |&nr| -> Result<f64> {
            let inst = family(nr)?;
            let (a, b) = pair;
            if a >= inst.alphabet.len() || b >= inst.alphabet.len() {
                return Err(Error::InvalidArgument(format!("pair ({a}, {b}) out of range")));
            }
            let sa = model::conditional_covariance(inst.alphabet.get(a), &inst.ch, &inst.nz, &inst.pw, nr)?;
            let sb = model::conditional_covariance(inst.alphabet.get(b), &inst.ch, &inst.nz, &inst.pw, nr)?;
            divergence::jeffreys_trace(&sa, &sb)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    DivergenceCurve::from_values(nr_values.to_vec(), j_values)
}

/// `Ξ = C̄_z^{-1/2} S̆ C_h S̆ᴴ C̄_z^{-1/2}`.
#[derive(Debug, Clone)]
pub struct XiMatrix {
    pub xi: CMatrix,
}

impl XiMatrix {
    /// Column space, keeping singular values above `XI_RANK_TOL·σ_max`.
    pub fn column_space(&self) -> Result<SubspaceBasis> {
        let smax = linalg::HermitianEigen::new(&self.xi)?.max().max(0.0);
        column_space(&self.xi, Some(XI_RANK_TOL * smax))
    }
}

/// Builds Ξ for one codeword. The channel covariance must be full rank.
pub fn xi_matrix(s: &Codeword, ch: &ChannelModel, nz: &NoiseModel, nr: usize) -> Result<XiMatrix> {
    ch.require_full_rank()?;
    let sx = model::expand_codeword(s, nr)?;
    if sx.ncols() != ch.dim() || sx.nrows() != nz.dim() {
        return Err(Error::Dimension(format!(
            "expanded codeword is {:?}, channel {}, noise {}",
            sx.shape(),
            ch.dim(),
            nz.dim()
        )));
    }
    let w = linalg::inv_sqrt_hermitian(&nz.normalized_matrix())?;
    let xi = linalg::hermitian_part(&(&w * &sx * ch.matrix() * sx.adjoint() * &w));
    Ok(XiMatrix { xi })
}

/// Per-pair record of a singularity report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub a: usize,
    pub b: usize,
    pub rank_a: usize,
    pub rank_b: usize,
    /// Unknown unless channel statistics were supplied.
    pub uniquely_identifiable: Option<bool>,
    pub colsp_distinct: bool,
    /// Largest principal angle between the column spaces (π/2 for unequal ranks).
    pub principal_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityReport {
    pub pairs: Vec<PairRecord>,
    /// Every pair uniquely identifiable (None when not evaluated).
    pub uniquely_identifiable: Option<bool>,
    /// Every pair of distinct codewords spans distinct column spaces.
    pub high_snr_asd: bool,
    /// Smallest per-pair principal angle (π/2 when every pair differs in rank).
    pub min_principal_angle: f64,
    pub angle_tol: f64,
}

impl SingularityReport {
    /// Fills the identifiability columns from the pairs flagged by
    /// [`unique_identifiability`].
    pub fn with_identifiability(mut self, flagged: &[(usize, usize)]) -> Self {
        for p in &mut self.pairs {
            p.uniquely_identifiable = Some(!flagged.contains(&(p.a, p.b)));
        }
        self.uniquely_identifiable = Some(flagged.is_empty());
        self
    }
}

/// Column-space test over all codeword pairs.
pub fn high_snr_singularity(alphabet: &Alphabet, angle_tol: f64) -> Result<SingularityReport> {
    let spaces: Vec<SubspaceBasis> = alphabet
        .codewords()
        .iter()
        .map(|s| column_space(s.matrix(), None))
        .collect::<Result<_>>()?;
    let m = spaces.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let records: Vec<PairRecord> = Execution::default()
        .map_slice(&pairs, |&(a, b)| -> Result<PairRecord> {
            let angle = largest_principal_angle(&spaces[a], &spaces[b])?;
            Ok(PairRecord {
                a,
                b,
                rank_a: spaces[a].rank(),
                rank_b: spaces[b].rank(),
                uniquely_identifiable: None,
                colsp_distinct: !subspaces_equal(&spaces[a], &spaces[b], angle_tol)?,
                principal_angle: angle,
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(SingularityReport {
        high_snr_asd: records.iter().all(|r| r.colsp_distinct),
        min_principal_angle: records.iter().map(|r| r.principal_angle).fold(FRAC_PI_2, f64::min),
        pairs: records,
        uniquely_identifiable: None,
        angle_tol,
    })
}

/// Colsp equality of a codeword pair decided twice: through Ξ (KNr-dim
/// receive space) and through the codewords themselves. Returns
/// `(xi_equal, codeword_equal)`.
pub fn colsp_equality_both_ways(
    sa: &Codeword,
    sb: &Codeword,
    ch: &ChannelModel,
    nz: &NoiseModel,
    nr: usize,
    angle_tol: f64,
) -> Result<(bool, bool)> {
    let xa = xi_matrix(sa, ch, nz, nr)?.column_space()?;
    let xb = xi_matrix(sb, ch, nz, nr)?.column_space()?;
    let ca = column_space(sa.matrix(), None)?;
    let cb = column_space(sb.matrix(), None)?;
    Ok((
        subspaces_equal(&xa, &xb, angle_tol)?,
        subspaces_equal(&ca, &cb, angle_tol)?,
    ))
}

/// Singular values of a matrix, descending.
pub fn singular_values_desc(m: &CMatrix) -> DVector<f64> {
    let mut v: Vec<f64> = m.singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(v)
}
