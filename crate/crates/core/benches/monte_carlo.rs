use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ncdetect::codebooks::random_grassmannian;
use ncdetect::detector::DetectorBank;
use ncdetect::linalg::{self, CMatrix};
use ncdetect::model::{conditional_covariance, ChannelModel, Codeword, NoiseModel, PowerConfig};
use ncdetect::{pep, rng, Execution};
use num_complex::Complex64;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Execution::Parallel));
    }
    v
}

fn pep_pair(
    nr: usize,
) -> (
    ncdetect::model::ConditionalCovariance,
    ncdetect::model::ConditionalCovariance,
) {
    let ch = ChannelModel::isotropic(nr);
    let nz = NoiseModel::isotropic(nr, 1.0).unwrap();
    let pw = PowerConfig::from_gamma(10.0, 1.0).unwrap();
    let sa = Codeword::scalar(Complex64::new(2f64.sqrt(), 0.0)).unwrap();
    let sb = Codeword::scalar(Complex64::new(1.0, 0.0)).unwrap();
    (
        conditional_covariance(&sa, &ch, &nz, &pw, nr).unwrap(),
        conditional_covariance(&sb, &ch, &nz, &pw, nr).unwrap(),
    )
}

fn pep_trials(c: &mut Criterion) {
    let trials = 20_000u64;
    let mut group = c.benchmark_group("pep_monte_carlo");
    group.throughput(Throughput::Elements(trials));
    group.sample_size(10);
    for nr in [4, 16] {
        let (a, b) = pep_pair(nr);
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, nr), &nr, |bch, _| {
                bch.iter(|| pep::pep_monte_carlo_with(&a, &b, trials, 1, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn symbol_error(c: &mut Criterion) {
    let trials = 8_000u64;
    let nr = 4;
    let cb = random_grassmannian(8, 4, 2, 3).unwrap();
    let bank = DetectorBank::from_model(
        cb.alphabet(),
        &ChannelModel::isotropic(2 * nr),
        &NoiseModel::isotropic(4 * nr, 1.0).unwrap(),
        &PowerConfig::from_gamma(10.0, 1.0).unwrap(),
        nr,
    )
    .unwrap();
    let mut group = c.benchmark_group("symbol_error_grassmann_m8");
    group.throughput(Throughput::Elements(trials));
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |bch| {
            bch.iter(|| pep::symbol_error_bank_with(&bank, trials, 9, exec).unwrap())
        });
    }
    group.finish();
}

fn quadform(c: &mut Criterion) {
    let mut g = rng::stream(5, 0);
    let mut group = c.benchmark_group("pep_quadform");
    for n in [4, 16, 64] {
        let m = CMatrix::from_fn(n, n, |_, _| rng::complex_normal(&mut g));
        let sa = &m * m.adjoint() / Complex64::new(n as f64, 0.0) + linalg::identity(n);
        let a = ncdetect::model::ConditionalCovariance::from_sigma(sa).unwrap();
        let b =
            ncdetect::model::ConditionalCovariance::from_sigma(linalg::identity(n) * Complex64::new(1.5, 0.0)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| pep::pep_quadform(&a, &b, 1e-6).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pep_trials, symbol_error, quadform);
criterion_main!(benches);
