#![allow(dead_code)]

use ncdetect::linalg::{self, CMatrix};
use ncdetect::model::{Codeword, ConditionalCovariance};
use ncdetect::rng;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(rows, cols, |_, _| rng::complex_normal(&mut g))
}

pub fn unitary(n: usize, seed: u64) -> CMatrix {
    gaussian(n, n, seed).qr().q()
}

pub fn pd(n: usize, seed: u64, ridge: f64) -> CMatrix {
    let a = gaussian(n, n, seed);
    &a * a.adjoint() / c(n as f64) + linalg::identity(n) * c(ridge)
}

pub fn cov(m: CMatrix) -> ConditionalCovariance {
    ConditionalCovariance::from_sigma(m).unwrap()
}

pub fn scalar_word(x: f64) -> Codeword {
    Codeword::scalar(c(x)).unwrap()
}
