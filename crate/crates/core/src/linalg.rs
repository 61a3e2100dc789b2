//! Dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalue floor used for inverse square roots, relative to the largest eigenvalue.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// `I_n ⊗ s`: block diagonal with `n` copies of `s`.
pub fn kron_identity(n: usize, s: &CMatrix) -> CMatrix {
    let (r, c) = s.shape();
    let mut out = CMatrix::zeros(n * r, n * c);
    for b in 0..n {
        out.view_mut((b * r, b * c), (r, c)).copy_from(s);
    }
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest entrywise deviation from Hermitian symmetry, relative to `max(1, max|m|)`.
pub fn asymmetry(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / max_abs(m).max(1.0)
}

/// `(m + mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let eig = SymmetricEigen::try_new(hermitian_part(m), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(HermitianEigen { values, vectors })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V f(Λ) Vᴴ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(j).scale_mut(s);
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }
}

/// `m^{-1/2}` for Hermitian PD `m`; eigenvalues are floored at `EIGEN_FLOOR · σ_max`.
pub fn inv_sqrt_hermitian(m: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEigen::new(m)?;
    let top = eig.max();
    if top <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig.min(),
        });
    }
    let floor = EIGEN_FLOOR * top;
    Ok(eig.map_spectrum(|v| 1.0 / v.max(floor).sqrt()))
}

/// `m^{1/2}` for Hermitian PSD `m` (negative round-off eigenvalues clipped to zero).
pub fn sqrt_hermitian(m: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEigen::new(m)?;
    Ok(eig.map_spectrum(|v| v.max(0.0).sqrt()))
}

/// Diagonal matrix with the given real entries.
pub fn real_diagonal(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_matrix(r: usize, c: usize, seed: u64) -> CMatrix {
        let mut g = rng::stream(seed, 0);
        CMatrix::from_fn(r, c, |_, _| rng::complex_normal(&mut g))
    }

    #[test]
    fn kron_identity_matches_four_index_loop() {
        let s = random_matrix(3, 2, 11);
        let n = 3;
        let k = kron_identity(n, &s);
        for a in 0..n {
            for b in 0..n {
                for i in 0..3 {
                    for j in 0..2 {
                        let expected = if a == b { s[(i, j)] } else { Complex64::new(0.0, 0.0) };
                        assert_eq!(k[(a * 3 + i, b * 2 + j)], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let a = random_matrix(5, 5, 3);
        let h = &a * a.adjoint();
        let eig = HermitianEigen::new(&h).unwrap();
        assert!(eig.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let back = eig.map_spectrum(|v| v);
        assert!(frobenius_sq(&(back - &h)).sqrt() < 1e-12 * frobenius_sq(&h).sqrt());
    }

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let a = random_matrix(4, 4, 5);
        let h = &a * a.adjoint() + identity(4);
        let r = inv_sqrt_hermitian(&h).unwrap();
        let prod = &r * &h * &r;
        assert!(frobenius_sq(&(prod - identity(4))).sqrt() < 1e-12);
        let s = sqrt_hermitian(&h).unwrap();
        assert!(frobenius_sq(&(&s * &s - &h)).sqrt() < 1e-11);
    }

    #[test]
    fn asymmetry_detects_non_hermitian() {
        let mut m = identity(2);
        assert_eq!(asymmetry(&m), 0.0);
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(asymmetry(&m) > 0.1);
    }
}
