mod common;

use common::*;
use ncdetect::detector::{llr, ml_detect, DetectorBank};
use ncdetect::divergence::*;
use ncdetect::linalg::{self, CMatrix, CVector};
use ncdetect::model::*;
use ncdetect::pep;
use ncdetect::rng;
use ncdetect::Execution;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_reproduces_the_vectorized_product(
        k in 1usize..5, nt in 1usize..4, nr in 1usize..5, seed in any::<u64>()
    ) {
        let s = gaussian(k, nt, seed);
        let h = gaussian(nt, nr, seed ^ 1);
        let sx = expand_codeword(&Codeword::new(s.clone()).unwrap(), nr).unwrap();
        let vec_h = CVector::from_column_slice(h.as_slice());
        let sh = &s * &h;
        let want = CVector::from_column_slice(sh.as_slice());
        let got = sx * vec_h;
        let err = (&got - &want).norm() / want.norm().max(1e-300);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn covariances_are_hermitian_pd_and_energy_bounded(
        k in 1usize..4, nt in 1usize..3, nr in 1usize..4, gamma in 0.0f64..100.0, seed in any::<u64>()
    ) {
        let words = (0..3).map(|i| Codeword::new(gaussian(k, nt, seed.wrapping_add(i))).unwrap()).collect();
        let alphabet = Alphabet::new(words).unwrap().normalized();
        let chm = pd(nt * nr, seed ^ 7, 0.01);
        let chm = &chm / linalg::trace(&chm);
        let ch = ChannelModel::new(chm).unwrap();
        let pz = 0.3;
        let nz = NoiseModel::new(pd(k * nr, seed ^ 9, 0.05) * c(pz), pz).unwrap();
        let pw = PowerConfig::from_gamma(gamma, pz).unwrap();
        let max_energy = alphabet.codewords().iter().map(|s| s.energy()).fold(0.0, f64::max);
        for s in alphabet.codewords() {
            let cov = conditional_covariance(s, &ch, &nz, &pw, nr).unwrap();
            prop_assert!(linalg::asymmetry(cov.sigma()) < 1e-12);
            let eig = linalg::HermitianEigen::new(cov.sigma()).unwrap();
            prop_assert!(eig.min() > 0.0);
            // tr(X̆ C_h X̆ᴴ) ≤ Px·σ_max(S̆ᴴS̆)·tr(C_h) ≤ Px·‖S‖_F² under unit-trace C_h
            let bound = pw.px() * max_energy + linalg::trace(nz.matrix()).re;
            prop_assert!(linalg::trace(cov.sigma()).re <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn llr_is_antisymmetric_and_ml_ignores_offsets(
        n in 1usize..7, seed in any::<u64>(), offset in -1e3f64..1e3
    ) {
        let a = cov(pd(n, seed, 0.2));
        let b = cov(pd(n, seed ^ 3, 0.2));
        let y = b.sample_with(&mut rng::stream(seed, 0));
        let lab = llr(&y, &a, &b).unwrap();
        let lba = llr(&y, &b, &a).unwrap();
        prop_assert!((lab + lba).abs() <= 1e-10 * lab.abs().max(1.0));
        let bank = DetectorBank::new(vec![a, b]).unwrap();
        let ll = bank.log_likelihoods(&y).unwrap();
        let shifted: Vec<f64> = ll.iter().map(|v| v + offset).collect();
        prop_assert_eq!(
            ncdetect::detector::argmax_lowest(&ll),
            ncdetect::detector::argmax_lowest(&shifted)
        );
        prop_assert_eq!(ml_detect(&y, &bank).unwrap(), ncdetect::detector::argmax_lowest(&ll));
    }

    #[test]
    fn jeffreys_forms_agree_and_are_symmetric(n in 1usize..12, seed in any::<u64>()) {
        let a = cov(pd(n, seed, 0.1));
        let b = cov(pd(n, seed ^ 5, 0.1));
        let jt = jeffreys_trace(&a, &b).unwrap();
        let jn = jeffreys_norm_form(&a, &b).unwrap();
        let jc = normalized_covariance(&a, &b).unwrap().jeffreys().unwrap();
        prop_assert!(jt >= 0.0);
        prop_assert!(rel(jt, jn) < 1e-9);
        prop_assert!(rel(jt, jc) < 1e-9);
        prop_assert!(rel(jt, jeffreys_trace(&b, &a).unwrap()) < 1e-9);
        prop_assert!(rel(jn, jeffreys_norm_form(&b, &a).unwrap()) < 1e-9);
    }

    #[test]
    fn jeffreys_vanishes_only_for_equal_covariances(n in 1usize..8, seed in any::<u64>(), eps in prop_oneof![Just(0.0), 1e-4f64..1.0]) {
        let sa = pd(n, seed, 0.2);
        let sb = &sa + pd(n, seed ^ 11, 0.0) * c(eps);
        let a = cov(sa.clone());
        let b = cov(sb.clone());
        let j = jeffreys_trace(&a, &b).unwrap();
        let close = linalg::frobenius_sq(&(&sa - &sb)).sqrt() < 1e-6 * linalg::frobenius_sq(&sa).sqrt();
        prop_assert_eq!(j < 1e-9, close);
    }

    #[test]
    fn simo_bounds_bracket_the_divergence(
        nr in 1usize..16, seed in any::<u64>(), xa in 0.0f64..5.0, xb in 0.0f64..5.0
    ) {
        let ch = ChannelModel::new(pd(nr, seed, 0.01)).unwrap();
        let nz = NoiseModel::new(pd(nr, seed ^ 2, 0.1), 1.0).unwrap();
        let pair = SimoPair::new(c(xa), c(xb));
        let j = simo_jeffreys(&pair, &ch, &nz).unwrap();
        let (lo, hi) = simo_bounds(&pair, &GammaSpectrum::new(&ch, &nz).unwrap());
        let slack = 1e-12 * hi.max(1.0);
        prop_assert!(lo - j <= slack && j - hi <= slack, "{lo} {j} {hi}");
    }

    #[test]
    fn identical_hypotheses_have_unit_pep_and_zero_llr(n in 1usize..6, seed in any::<u64>()) {
        let s = pd(n, seed, 0.3);
        let a = cov(s.clone());
        let b = cov(s);
        for i in 0..20 {
            let y = a.sample_with(&mut rng::stream(seed, i));
            prop_assert!(llr(&y, &a, &b).unwrap().abs() < 1e-9);
        }
        prop_assert_eq!(pep::pep_quadform(&a, &b, 1e-6).unwrap().value, 1.0);
        prop_assert_eq!(pep::pep_quadform(&b, &a, 1e-6).unwrap().value, 1.0);
        prop_assert_eq!(pep::pep_monte_carlo(&a, &b, 200, seed).unwrap().value, 1.0);
    }

    #[test]
    fn pep_is_a_probability(n in 1usize..6, seed in any::<u64>()) {
        let a = cov(pd(n, seed, 0.1));
        let b = cov(pd(n, seed ^ 4, 0.1));
        let p = pep::pep_quadform(&a, &b, 1e-6).unwrap();
        prop_assert!((0.0..=1.0).contains(&p.value));
        prop_assert!(p.lower <= p.value && p.value <= p.upper);
    }

    #[test]
    fn sampling_does_not_depend_on_threads(n in 1usize..5, seed in any::<u64>()) {
        let a = cov(pd(n, seed, 0.1));
        let s = sample_received_with(&a, 50, seed, Execution::Sequential);
        let p = sample_received_with(&a, 50, seed, Execution::Parallel);
        prop_assert_eq!(s, p);
    }
}

/// With a correct oracle the per-pair z-scores `(mc − q)/se` are standard
/// normal, so the fraction inside ±1.96 is itself Binomial(100, 0.95). The
/// count is checked against its 3σ floor; bias or miscalibration is caught by
/// the mean and variance of the z-scores.
#[test]
fn monte_carlo_and_quadrature_agree_on_most_pairs() {
    let trials = 20_000;
    let mut within = 0;
    let mut zs = Vec::new();
    for i in 0..100u64 {
        let n = 1 + (i as usize % 6);
        let a = cov(pd(n, 1000 + i, 0.2));
        let b = cov(pd(n, 2000 + i, 0.2));
        let q = pep::pep_quadform(&a, &b, 1e-6).unwrap();
        let mc = pep::pep_monte_carlo(&a, &b, trials, i).unwrap();
        let se = (q.value * (1.0 - q.value) / trials as f64).sqrt();
        if (mc.value - q.value).abs() <= 1.96 * se + 1e-6 {
            within += 1;
        }
        zs.push((mc.value - q.value) / se);
    }
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (zs.len() - 1) as f64;
    println!("{within}/100 pairs within 1.96 SE; z mean {mean:.3}, variance {var:.3}");
    assert!(mean.abs() < 0.4, "z mean {mean}");
    assert!((0.6..1.5).contains(&var), "z variance {var}");
    assert!(within >= 88, "{within}/100 pairs within 1.96 standard errors");
}

#[test]
fn parallel_symbol_error_matches_sequential() {
    let words = (0..4).map(|i| Codeword::new(gaussian(2, 1, 40 + i)).unwrap()).collect();
    let alphabet = Alphabet::new(words).unwrap().normalized();
    let bank = DetectorBank::from_model(
        &alphabet,
        &ChannelModel::isotropic(2),
        &NoiseModel::isotropic(4, 1.0).unwrap(),
        &PowerConfig::from_gamma(10.0, 1.0).unwrap(),
        2,
    )
    .unwrap();
    let s = pep::symbol_error_bank_with(&bank, 4000, 3, Execution::Sequential).unwrap();
    let p = pep::symbol_error_bank_with(&bank, 4000, 3, Execution::Parallel).unwrap();
    assert_eq!(s, p);
}

#[test]
fn unequal_dimensions_are_rejected() {
    let a = cov(pd(2, 1, 0.1));
    let b = cov(pd(3, 2, 0.1));
    assert!(jeffreys_trace(&a, &b).is_err());
    assert!(pep::pep_quadform(&a, &b, 1e-6).is_err());
    let _unused: CMatrix = a.sigma().clone();
}

#[test]
fn rotated_codewords_tie_in_monte_carlo_as_in_quadrature() {
    let (k, nt, nr) = (4, 2, 3);
    let s = unitary(k, 1).columns(0, nt).into_owned();
    let sa = Codeword::new(s.clone()).unwrap();
    let sb = Codeword::new(&s * unitary(nt, 2)).unwrap();
    let ch = ChannelModel::isotropic(nt * nr);
    let nz = NoiseModel::isotropic(k * nr, 1.0).unwrap();
    for gamma in [1.0, 1e3, 1e5] {
        let pw = PowerConfig::from_gamma(gamma, 1.0).unwrap();
        let a = conditional_covariance(&sa, &ch, &nz, &pw, nr).unwrap();
        let b = conditional_covariance(&sb, &ch, &nz, &pw, nr).unwrap();
        assert_ne!(a.sigma(), b.sigma());
        assert_eq!(pep::pep_quadform(&a, &b, 1e-6).unwrap().value, 1.0);
        assert_eq!(pep::pep_monte_carlo(&a, &b, 2000, 4).unwrap().value, 1.0);
    }
}
