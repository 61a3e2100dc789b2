//! Codebook constructions: energy constellations, Grassmannian (unitary
//! space-time) codebooks, and unions of Grassmannian codebooks of every rank.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{Alphabet, Codeword};
use crate::rng;
use crate::singularity;

/// Same-rank codewords closer than this chordal distance are redrawn.
pub const COLLISION_DISTANCE: f64 = 1e-6;

const MAX_REDRAWS: usize = 1000;

/// `√(n − ‖AᴴB‖_F²)` for orthonormal `A`, `B` with `n` columns.
pub fn chordal_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.ncols() as f64;
    (n - linalg::frobenius_sq(&(a.adjoint() * b))).max(0.0).sqrt()
}

/// Smallest pairwise chordal distance, `+∞` for fewer than two bases.
pub fn min_chordal_distance(bases: &[CMatrix]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            best = best.min(chordal_distance(&bases[i], &bases[j]));
        }
    }
    best
}

/// Scalar energy constellation: codeword `i` is the K×1 vector with every
/// entry `√level_i`, then the alphabet is rescaled to unit average power.
pub fn energy_constellation(levels: &[f64], k: usize) -> Result<Alphabet> {
    if k == 0 || levels.is_empty() {
        return Err(Error::InvalidArgument("need K >= 1 and at least one level".into()));
    }
    if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument(
            "energy levels must be finite and nonnegative".into(),
        ));
    }
    for i in 0..levels.len() {
        if levels[..i].contains(&levels[i]) {
            return Err(Error::InvalidArgument(format!("duplicate energy level {}", levels[i])));
        }
    }
    if levels.iter().all(|&l| l == 0.0) {
        log::warn!("energy constellation contains only the zero symbol");
    }
    let codewords = levels
        .iter()
        .map(|&l| Codeword::new(CMatrix::from_element(k, 1, Complex64::new(l.sqrt(), 0.0))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Alphabet::new(codewords)?.normalized())
}

/// Objective history of a packing design.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DesignLog {
    pub iterations: usize,
    pub accepted: usize,
    /// Minimum chordal distance of the current design after each iteration,
    /// starting with the initial design.
    pub objective: Vec<f64>,
    pub step_size: Vec<f64>,
}

/// Truncated-unitary codebook: one point of the Grassmannian per codeword.
#[derive(Debug, Clone)]
pub struct GrassmannCodebook {
    /// Orthonormal K×Nt bases (`GᴴG = I`).
    bases: Vec<CMatrix>,
    /// Bases scaled by `√(K/Nt)` to unit average power.
    alphabet: Alphabet,
    min_chordal_distance: f64,
    pub design_log: DesignLog,
}

impl GrassmannCodebook {
    pub fn from_bases(bases: Vec<CMatrix>) -> Result<Self> {
        let first = bases
            .first()
            .ok_or_else(|| Error::InvalidArgument("codebook needs at least one point".into()))?;
        let (k, nt) = first.shape();
        for b in &bases {
            if b.shape() != (k, nt) {
                return Err(Error::Dimension("bases of different shape".into()));
            }
            let dev = linalg::frobenius_sq(&(b.adjoint() * b - linalg::identity(nt))).sqrt();
            if dev > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "basis is not orthonormal (deviation {dev:e})"
                )));
            }
        }
        let codewords = bases
            .iter()
            .map(|b| Codeword::new(b.clone()))
            .collect::<Result<Vec<_>>>()?;
        let alphabet = Alphabet::new(codewords)?.normalized();
        let min_chordal_distance = min_chordal_distance(&bases);
        let design_log = DesignLog {
            objective: vec![min_chordal_distance],
            ..DesignLog::default()
        };
        Ok(GrassmannCodebook {
            bases,
            alphabet,
            min_chordal_distance,
            design_log,
        })
    }

    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn into_alphabet(self) -> Alphabet {
        self.alphabet
    }

    pub fn min_chordal_distance(&self) -> f64 {
        self.min_chordal_distance
    }
}

/// Orthonormal K×n matrix from the QR factor of a Gaussian draw.
fn random_orthonormal<R: rand::Rng>(k: usize, n: usize, g: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(k, n, |_, _| rng::complex_normal(g));
    a.qr().q().columns(0, n).into_owned()
}

/// `m` random points of the Grassmannian of `n`-planes in C^K, pairwise
/// farther apart than [`COLLISION_DISTANCE`].
fn draw_distinct_points(m: usize, k: usize, n: usize, seed: u64) -> Result<Vec<CMatrix>> {
    let mut g = rng::stream(seed, 0);
    let mut bases: Vec<CMatrix> = Vec::with_capacity(m);
    let mut redraws = 0;
    while bases.len() < m {
        let cand = random_orthonormal(k, n, &mut g);
        if bases.iter().all(|b| chordal_distance(b, &cand) > COLLISION_DISTANCE) {
            bases.push(cand);
        } else {
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(Error::Infeasible(format!(
                    "could not place {m} distinct {n}-dimensional subspaces in C^{k}"
                )));
            }
        }
    }
    Ok(bases)
}

/// `m` truncated-unitary K×Nt codewords from orthonormalized Gaussian draws.
pub fn random_grassmannian(m: usize, k: usize, nt: usize, seed: u64) -> Result<GrassmannCodebook> {
    if m == 0 || nt == 0 || k < nt {
        return Err(Error::Infeasible(format!(
            "need M >= 1 and K >= Nt >= 1 (got M={m}, K={k}, Nt={nt})"
        )));
    }
    if m > 1 && nt == k {
        return Err(Error::Infeasible(format!(
            "the Grassmannian of {k}-planes in C^{k} is a single point; M={m} distinct codewords impossible"
        )));
    }
    GrassmannCodebook::from_bases(draw_distinct_points(m, k, nt, seed)?)
}

/// Pairs whose squared chordal distance is within this margin of the minimum
/// move together, so ties between worst pairs do not stall the ascent.
const ACTIVE_MARGIN: f64 = 1e-3;

/// Max-min packing refinement by projected gradient ascent.
///
/// Each iteration moves the points of the worst pair(s) apart along the
/// tangent direction that decreases `‖A_iᴴA_j‖_F²`, then retracts onto the
/// manifold by QR re-orthonormalization. A step that lowers the minimum
/// distance is rejected and the step size halved; accepted steps grow it
/// back toward `step_size`.
pub fn refine_packing(cb: &GrassmannCodebook, iterations: usize, step_size: f64) -> Result<GrassmannCodebook> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    let mut bases = cb.bases.clone();
    let mut log = cb.design_log.clone();
    if log.objective.is_empty() {
        log.objective.push(cb.min_chordal_distance);
    }
    if iterations == 0 || bases.len() < 2 {
        let mut out = cb.clone();
        out.design_log = log;
        return Ok(out);
    }
    let n = bases[0].ncols();
    let mut current = min_chordal_distance(&bases);
    let mut step = step_size;
    for _ in 0..iterations {
        let d2_min = current * current;
        let mut grads: Vec<Option<CMatrix>> = vec![None; bases.len()];
        for i in 0..bases.len() {
            for j in i + 1..bases.len() {
                let d = chordal_distance(&bases[i], &bases[j]);
                if d * d > d2_min + ACTIVE_MARGIN * n as f64 {
                    continue;
                }
                for (p, q) in [(i, j), (j, i)] {
                    let ap = &bases[p];
                    let aq = &bases[q];
                    let e = aq * (aq.adjoint() * ap);
                    let tangent = &e - ap * (ap.adjoint() * &e);
                    match &mut grads[p] {
                        Some(g) => *g += tangent,
                        slot @ None => *slot = Some(tangent),
                    }
                }
            }
        }
        let trial: Vec<CMatrix> = bases
            .iter()
            .zip(&grads)
            .map(|(a, g)| match g {
                Some(g) => retract(&(a - g * Complex64::new(step, 0.0))),
                None => a.clone(),
            })
            .collect();
        let candidate = min_chordal_distance(&trial);
        log.iterations += 1;
        if candidate >= current {
            bases = trial;
            current = candidate;
            log.accepted += 1;
            step = (step * 1.25).min(step_size);
        } else {
            step *= 0.5;
        }
        log.objective.push(current);
        log.step_size.push(step);
    }
    let mut out = GrassmannCodebook::from_bases(bases)?;
    out.design_log = log;
    Ok(out)
}

fn retract(a: &CMatrix) -> CMatrix {
    let n = a.ncols();
    let qr = a.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    // fix the phase of each column so the retraction is continuous in `a`
    let mut q = q.columns(0, n).into_owned();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / Complex64::new(d.norm(), 0.0);
            q.column_mut(j).scale_mut(1.0);
            let col = q.column(j) * phase;
            q.set_column(j, &col);
        }
    }
    q
}

/// Union of Grassmannian codebooks of every dimension `n = 0..=Nt`.
#[derive(Debug, Clone)]
pub struct SubspaceUnionCodebook {
    /// Orthonormal K×n bases of the rank-`n` sub-codebook, for each `n`.
    pub per_dimension: Vec<Vec<CMatrix>>,
    /// Rank of each flattened codeword, in alphabet order.
    pub ranks: Vec<usize>,
    pub alphabet: Alphabet,
}

/// `sizes[n]` codewords spanning distinct `n`-dimensional subspaces of C^K,
/// for `n = 0..=Nt`. A rank-`n` codeword puts an orthonormal basis on its
/// first `n` columns and zeros elsewhere; the whole union is rescaled by one
/// common factor to unit average power.
pub fn subspace_union_codebook(sizes: &[usize], k: usize, nt: usize, seed: u64) -> Result<SubspaceUnionCodebook> {
    if k == 0 || nt == 0 {
        return Err(Error::Infeasible("need K >= 1 and Nt >= 1".into()));
    }
    if sizes.len() != nt + 1 {
        return Err(Error::Infeasible(format!(
            "need one size per dimension 0..={nt}, got {} sizes",
            sizes.len()
        )));
    }
    if sizes[0] > 1 {
        return Err(Error::Infeasible("only one zero-dimensional codeword exists".into()));
    }
    for (n, &count) in sizes.iter().enumerate().skip(1) {
        if count > 0 && n > k {
            return Err(Error::Infeasible(format!("no {n}-dimensional subspaces in C^{k}")));
        }
        if n == k && count > 1 {
            return Err(Error::Infeasible(format!(
                "C^{k} has a single {k}-dimensional subspace, asked for {count}"
            )));
        }
    }
    if sizes.iter().sum::<usize>() == 0 {
        return Err(Error::Infeasible("codebook would be empty".into()));
    }

    let mut per_dimension = Vec::with_capacity(nt + 1);
    let mut codewords = Vec::new();
    let mut ranks = Vec::new();
    for (n, &count) in sizes.iter().enumerate() {
        let bases = if n == 0 || count == 0 {
            vec![CMatrix::zeros(k, 0); count]
        } else {
            draw_distinct_points(count, k, n, rng::derive_seed(seed, n as u64))?
        };
        for b in &bases {
            let mut s = CMatrix::zeros(k, nt);
            if n > 0 {
                s.columns_mut(0, n).copy_from(b);
            }
            codewords.push(Codeword::new(s)?);
            ranks.push(n);
        }
        per_dimension.push(bases);
    }
    Ok(SubspaceUnionCodebook {
        per_dimension,
        ranks,
        alphabet: Alphabet::new(codewords)?.normalized(),
    })
}

/// Structural property a codebook claims for its codewords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureClaim {
    None,
    /// `SᴴS ∝ I_Nt`.
    Unitary,
    /// `SᴴS` proportional to an orthogonal projector (one common scale per codeword).
    PartialIsometry,
}

/// Deviation above which a claimed structure fails.
pub const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookReport {
    pub size: usize,
    pub average_power: f64,
    pub power_pass: bool,
    pub claim: StructureClaim,
    /// Largest structure deviation across codewords (0 when nothing is claimed).
    pub structure_deviation: f64,
    pub structure_pass: bool,
    pub ranks: Vec<usize>,
    /// Smallest chordal distance between same-rank, nonzero-rank codewords.
    pub min_chordal_distance: f64,
    pub distinct_pass: bool,
    pub pass: bool,
}

/// Measures power normalization, the claimed structure, pairwise chordal
/// separation and per-codeword ranks.
pub fn validate_codebook(alphabet: &Alphabet, claim: StructureClaim) -> Result<CodebookReport> {
    let spaces: Vec<singularity::SubspaceBasis> = alphabet
        .codewords()
        .iter()
        .map(|s| singularity::column_space(s.matrix(), None))
        .collect::<Result<_>>()?;
    let ranks: Vec<usize> = spaces.iter().map(|s| s.rank()).collect();

    let mut deviation: f64 = 0.0;
    for (s, &r) in alphabet.codewords().iter().zip(&ranks) {
        let s = s.matrix();
        let gram = s.adjoint() * s;
        let nt = s.ncols();
        let dev = match claim {
            StructureClaim::None => 0.0,
            StructureClaim::Unitary => {
                let scale = linalg::frobenius_sq(s) / nt as f64;
                if scale == 0.0 {
                    f64::INFINITY
                } else {
                    let g = gram / Complex64::new(scale, 0.0);
                    linalg::frobenius_sq(&(g - linalg::identity(nt))).sqrt()
                }
            }
            StructureClaim::PartialIsometry => {
                if r == 0 {
                    0.0
                } else {
                    let scale = linalg::frobenius_sq(s) / r as f64;
                    let p = gram / Complex64::new(scale, 0.0);
                    linalg::frobenius_sq(&(&p * &p - &p)).sqrt()
                }
            }
        };
        deviation = deviation.max(dev);
    }

    let mut min_d = f64::INFINITY;
    for i in 0..spaces.len() {
        for j in i + 1..spaces.len() {
            if ranks[i] == ranks[j] && ranks[i] > 0 {
                min_d = min_d.min(chordal_distance(spaces[i].basis(), spaces[j].basis()));
            }
        }
    }
    let zero_count = ranks.iter().filter(|&&r| r == 0).count();
    let distinct_pass = min_d > COLLISION_DISTANCE && zero_count <= 1;
    let average_power = alphabet.average_power();
    let power_pass = (average_power - 1.0).abs() <= crate::model::NORMALIZATION_TOL;
    let structure_pass = deviation <= STRUCTURE_TOL;
    Ok(CodebookReport {
        size: alphabet.len(),
        average_power,
        power_pass,
        claim,
        structure_deviation: deviation,
        structure_pass,
        ranks,
        min_chordal_distance: min_d,
        distinct_pass,
        pass: power_pass && structure_pass && distinct_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singularity::{high_snr_singularity, DEFAULT_ANGLE_TOL};

    #[test]
    fn energy_pair_and_triple() {
        let a = energy_constellation(&[0.0, 2.0], 1).unwrap();
        assert!(a.is_normalized());
        assert_eq!(a.get(0).matrix()[(0, 0)].re, 0.0);
        assert!((a.get(1).matrix()[(0, 0)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(high_snr_singularity(&a, DEFAULT_ANGLE_TOL).unwrap().high_snr_asd);
        let b = energy_constellation(&[0.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(b.len(), 3);
        assert!(!high_snr_singularity(&b, DEFAULT_ANGLE_TOL).unwrap().high_snr_asd);
        let z = energy_constellation(&[0.0], 1).unwrap();
        assert_eq!(z.len(), 1);
        assert!(!z.is_normalized());
        assert!(energy_constellation(&[1.0, 1.0], 1).is_err());
    }

    #[test]
    fn grassmannian_basics() {
        let one = random_grassmannian(1, 3, 2, 1).unwrap();
        assert!(one.min_chordal_distance().is_infinite());
        let four = random_grassmannian(4, 4, 1, 2).unwrap();
        for b in four.bases() {
            assert!(linalg::frobenius_sq(&(b.adjoint() * b - linalg::identity(1))).sqrt() < 1e-10);
        }
        assert!(four.alphabet().is_normalized());
        assert!(
            high_snr_singularity(four.alphabet(), DEFAULT_ANGLE_TOL)
                .unwrap()
                .high_snr_asd
        );
        assert!(matches!(random_grassmannian(2, 2, 2, 3), Err(Error::Infeasible(_))));
        assert!(random_grassmannian(2, 1, 2, 3).is_err());
    }

    #[test]
    fn refine_zero_iterations_is_identity() {
        let cb = random_grassmannian(5, 4, 2, 7).unwrap();
        let out = refine_packing(&cb, 0, 0.1).unwrap();
        assert_eq!(out.bases(), cb.bases());
    }

    #[test]
    fn refine_is_monotone() {
        let cb = random_grassmannian(8, 4, 2, 11).unwrap();
        let out = refine_packing(&cb, 200, 0.2).unwrap();
        assert!(out.design_log.objective.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.min_chordal_distance() >= cb.min_chordal_distance());
        for b in out.bases() {
            assert!(linalg::frobenius_sq(&(b.adjoint() * b - linalg::identity(2))).sqrt() < 1e-10);
        }
    }

    #[test]
    fn union_codebook_shapes() {
        let z = subspace_union_codebook(&[1, 0, 0], 2, 2, 1).unwrap();
        assert_eq!(z.alphabet.len(), 1);
        let u = subspace_union_codebook(&[1, 3, 1], 2, 2, 5).unwrap();
        assert_eq!(u.ranks, vec![0, 1, 1, 1, 2]);
        assert!(u.alphabet.is_normalized());
        let report = validate_codebook(&u.alphabet, StructureClaim::PartialIsometry).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.ranks, u.ranks);
        assert!(
            high_snr_singularity(&u.alphabet, DEFAULT_ANGLE_TOL)
                .unwrap()
                .high_snr_asd
        );
        assert!(subspace_union_codebook(&[2, 1, 0], 2, 2, 1).is_err());
        assert!(subspace_union_codebook(&[0, 1, 2], 2, 2, 1).is_err());
        assert!(subspace_union_codebook(&[0, 1], 2, 2, 1).is_err());
    }

    #[test]
    fn validation_flags_corruption() {
        let cb = random_grassmannian(4, 4, 2, 3).unwrap();
        let good = validate_codebook(cb.alphabet(), StructureClaim::Unitary).unwrap();
        assert!(good.pass && good.structure_deviation < 1e-12);
        let mut words: Vec<Codeword> = cb.alphabet().codewords().to_vec();
        let mut m = words[1].matrix().clone();
        let col = m.column(0) * Complex64::new(1.1, 0.0);
        m.set_column(0, &col);
        words[1] = Codeword::new(m).unwrap();
        let bad = validate_codebook(&Alphabet::new(words).unwrap(), StructureClaim::Unitary).unwrap();
        assert!(!bad.structure_pass && bad.structure_deviation > 0.05);
        let energy = energy_constellation(&[0.0, 1.0, 2.0], 1).unwrap();
        let r = validate_codebook(&energy, StructureClaim::None).unwrap();
        assert!(r.power_pass && r.structure_pass);
    }
}
