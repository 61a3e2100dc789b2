//! Experiment configuration files.
//!
//! A TOML file with one section per concern. Only the sections a subcommand
//! needs have to be present; every section that is present is validated at
//! load time, and all dB values are converted to linear scale here, once.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! k = 1
//! nt = 1
//! nr = 2
//!
//! [alphabet]
//! source = "energy"          # energy | scalars | grassmann | union | rotated-pair | file
//! levels = [0.0, 2.0]
//!
//! [channel]
//! profile = "isotropic"      # isotropic | polynomial-decay | file
//!
//! [noise]
//! profile = "isotropic"
//! pz = 1.0
//!
//! [snr_sweep]
//! snr_db = [0, 10, 20, 30, 40]
//! method = "both"            # monte-carlo | quadform-cf | both
//! trials = 100000
//! ```

use std::path::{Path, PathBuf};

use ncdetect::codebooks::{self, StructureClaim};
use ncdetect::linalg::CMatrix;
use ncdetect::model::{db_to_linear, Alphabet, ChannelModel, Codeword, NoiseModel, SystemDims};
use ncdetect::{io, linalg, rng};
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    system: RawSystem,
    alphabet: Option<RawAlphabet>,
    #[serde(default)]
    channel: RawSpectrum,
    #[serde(default)]
    noise: RawSpectrum,
    singularity: Option<RawSingularity>,
    snr_sweep: Option<RawSnrSweep>,
    nr_sweep: Option<RawNrSweep>,
    design: Option<RawDesign>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    k: usize,
    nt: usize,
    nr: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlphabet {
    source: AlphabetSource,
    levels: Option<Vec<f64>>,
    /// Complex symbols as `[re, im]` pairs.
    values: Option<Vec<[f64; 2]>>,
    size: Option<usize>,
    sizes: Option<Vec<usize>>,
    refine_iterations: Option<usize>,
    step: Option<f64>,
    seed: Option<u64>,
    path: Option<PathBuf>,
    normalize: Option<bool>,
    structure: Option<StructureClaim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AlphabetSource {
    Energy,
    Scalars,
    Grassmann,
    Union,
    RotatedPair,
    File,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    #[serde(default)]
    profile: ProfileKind,
    exponent: Option<f64>,
    path: Option<PathBuf>,
    pz: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ProfileKind {
    #[default]
    Isotropic,
    PolynomialDecay,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSingularity {
    angle_tol: Option<f64>,
    identifiability_tol: Option<f64>,
    gamma_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSnrSweep {
    snr_db: Vec<f64>,
    #[serde(default)]
    method: MethodChoice,
    trials: Option<u64>,
    tol: Option<f64>,
    pairs: Option<Vec<[usize; 2]>>,
    symbol_error_trials: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    MonteCarlo,
    QuadformCf,
    #[default]
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNrSweep {
    nr: Vec<usize>,
    gamma_db: f64,
    pair: Option<[usize; 2]>,
    trials: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    kind: DesignKind,
    size: Option<usize>,
    sizes: Option<Vec<usize>>,
    iterations: Option<usize>,
    step: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Grassmann,
    Union,
}

/// How to build the alphabet, resolved and checked.
#[derive(Debug, Clone)]
pub enum AlphabetSpec {
    Energy(Vec<f64>),
    Scalars(Vec<Complex64>),
    Grassmann {
        size: usize,
        refine_iterations: usize,
        step: f64,
        seed: u64,
    },
    Union {
        sizes: Vec<usize>,
        seed: u64,
    },
    RotatedPair {
        seed: u64,
    },
    File {
        path: PathBuf,
        normalize: bool,
    },
}

#[derive(Debug, Clone)]
pub struct AlphabetConfig {
    pub spec: AlphabetSpec,
    /// Structure the codebook is checked against by `validate`.
    pub structure: StructureClaim,
}

#[derive(Debug, Clone)]
pub enum Spectrum {
    Isotropic,
    PolynomialDecay(f64),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SingularityConfig {
    pub angle_tol: f64,
    pub identifiability_tol: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct SnrSweepConfig {
    /// Receive SNR grid, dB (for labels) and linear.
    pub snr_db: Vec<f64>,
    pub snr: Vec<f64>,
    pub method: MethodChoice,
    pub trials: u64,
    pub tol: f64,
    pub pairs: Option<Vec<(usize, usize)>>,
    pub symbol_error_trials: u64,
}

#[derive(Debug, Clone)]
pub struct NrSweepConfig {
    pub nr: Vec<usize>,
    pub gamma: f64,
    pub pair: (usize, usize),
    pub trials: u64,
}

#[derive(Debug, Clone)]
pub struct DesignConfig {
    pub kind: DesignKind,
    pub size: usize,
    pub sizes: Vec<usize>,
    pub iterations: usize,
    pub step: f64,
    pub seed: u64,
}

/// A loaded, validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub nt: usize,
    pub nr: Option<usize>,
    pub alphabet: Option<AlphabetConfig>,
    pub channel: Spectrum,
    pub noise: Spectrum,
    pub pz: f64,
    pub singularity: SingularityConfig,
    pub snr_sweep: Option<SnrSweepConfig>,
    pub nr_sweep: Option<NrSweepConfig>,
    pub design: Option<DesignConfig>,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn require<T>(v: Option<T>, field: &str) -> Result<T, CliError> {
    v.ok_or_else(|| field_err(field, "required for this source"))
}

fn positive(v: f64, field: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(field, format!("must be a positive finite number, got {v}")))
    }
}

fn finite_db(v: f64, field: &str) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(db_to_linear(v))
    } else {
        Err(field_err(field, format!("must be finite, got {v}")))
    }
}

fn existing(path: PathBuf, base: &Path, field: &str) -> Result<PathBuf, CliError> {
    let p = if path.is_relative() { base.join(&path) } else { path };
    if p.is_file() {
        Ok(p)
    } else {
        Err(field_err(field, format!("file {} does not exist", p.display())))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses config text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        Self::resolve(raw, base)
    }

    fn resolve(raw: RawConfig, base: &Path) -> Result<Self, CliError> {
        let seed = raw.seed.unwrap_or(0);
        let RawSystem { k, nt, nr } = raw.system;
        if k == 0 || nt == 0 {
            return Err(field_err("system", "k and nt must be at least 1"));
        }
        if nr == Some(0) {
            return Err(field_err("system.nr", "must be at least 1"));
        }

        let alphabet = raw.alphabet.map(|a| resolve_alphabet(a, nt, seed, base)).transpose()?;
        let channel = resolve_spectrum(&raw.channel, "channel", base)?;
        if raw.channel.pz.is_some() {
            return Err(field_err("channel.pz", "noise power belongs in [noise]"));
        }
        let noise = resolve_spectrum(&raw.noise, "noise", base)?;
        let pz = positive(raw.noise.pz.unwrap_or(1.0), "noise.pz")?;

        let singularity = match raw.singularity {
            Some(s) => SingularityConfig {
                angle_tol: positive(
                    s.angle_tol.unwrap_or(ncdetect::singularity::DEFAULT_ANGLE_TOL),
                    "singularity.angle_tol",
                )?,
                identifiability_tol: {
                    let t = s.identifiability_tol.unwrap_or(1e-9);
                    if !(t > 0.0 && t <= 1e-3) {
                        return Err(field_err("singularity.identifiability_tol", "must lie in (0, 1e-3]"));
                    }
                    t
                },
                gamma: finite_db(s.gamma_db.unwrap_or(20.0), "singularity.gamma_db")?,
            },
            None => SingularityConfig {
                angle_tol: ncdetect::singularity::DEFAULT_ANGLE_TOL,
                identifiability_tol: 1e-9,
                gamma: db_to_linear(20.0),
            },
        };

        let snr_sweep = raw
            .snr_sweep
            .map(|s| -> Result<SnrSweepConfig, CliError> {
                if s.snr_db.is_empty() {
                    return Err(field_err("snr_sweep.snr_db", "SNR grid is empty"));
                }
                let snr = s
                    .snr_db
                    .iter()
                    .map(|&v| finite_db(v, "snr_sweep.snr_db"))
                    .collect::<Result<_, _>>()?;
                let trials = s.trials.unwrap_or(100_000);
                if trials == 0 {
                    return Err(field_err("snr_sweep.trials", "must be at least 1"));
                }
                let tol = s.tol.unwrap_or(1e-6);
                if !(tol > 0.0 && tol <= 1e-3) {
                    return Err(field_err("snr_sweep.tol", "must lie in (0, 1e-3]"));
                }
                Ok(SnrSweepConfig {
                    snr_db: s.snr_db,
                    snr,
                    method: s.method,
                    trials,
                    tol,
                    pairs: s.pairs.map(|p| p.into_iter().map(|[a, b]| (a, b)).collect()),
                    symbol_error_trials: s.symbol_error_trials.unwrap_or(trials),
                })
            })
            .transpose()?;

        let nr_sweep = raw
            .nr_sweep
            .map(|s| -> Result<NrSweepConfig, CliError> {
                if s.nr.len() < 4 {
                    return Err(field_err("nr_sweep.nr", "need at least four array sizes"));
                }
                if s.nr[0] == 0 || s.nr.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(field_err(
                        "nr_sweep.nr",
                        "array sizes must be positive and strictly increasing",
                    ));
                }
                let trials = s.trials.unwrap_or(10_000);
                if trials == 0 {
                    return Err(field_err("nr_sweep.trials", "must be at least 1"));
                }
                let [a, b] = s.pair.unwrap_or([0, 1]);
                if a == b {
                    return Err(field_err("nr_sweep.pair", "needs two distinct codeword indices"));
                }
                Ok(NrSweepConfig {
                    nr: s.nr,
                    gamma: finite_db(s.gamma_db, "nr_sweep.gamma_db")?,
                    pair: (a, b),
                    trials,
                })
            })
            .transpose()?;

        let design = raw
            .design
            .map(|d| -> Result<DesignConfig, CliError> {
                let (size, sizes) = match d.kind {
                    DesignKind::Grassmann => (require(d.size, "design.size")?, Vec::new()),
                    DesignKind::Union => (0, require(d.sizes, "design.sizes")?),
                };
                Ok(DesignConfig {
                    kind: d.kind,
                    size,
                    sizes,
                    iterations: d.iterations.unwrap_or(0),
                    step: positive(d.step.unwrap_or(0.1), "design.step")?,
                    seed: d.seed.unwrap_or(seed),
                })
            })
            .transpose()?;

        Ok(ExperimentConfig {
            seed,
            out: raw.out,
            k,
            nt,
            nr,
            alphabet,
            channel,
            noise,
            pz,
            singularity,
            snr_sweep,
            nr_sweep,
            design,
        })
    }

    /// Applies a `--seed` override to every seed that was not pinned explicitly.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(a) = &mut self.alphabet {
            match &mut a.spec {
                AlphabetSpec::Grassmann { seed: s, .. }
                | AlphabetSpec::Union { seed: s, .. }
                | AlphabetSpec::RotatedPair { seed: s } => *s = seed,
                _ => {}
            }
        }
        if let Some(d) = &mut self.design {
            d.seed = seed;
        }
    }

    pub fn require_nr(&self) -> Result<usize, CliError> {
        self.nr
            .ok_or_else(|| field_err("system.nr", "required by this subcommand"))
    }

    pub fn dims(&self, nr: usize, m: usize) -> Result<SystemDims, CliError> {
        Ok(SystemDims::new(self.k, self.nt, nr, m)?)
    }

    pub fn alphabet_config(&self) -> Result<&AlphabetConfig, CliError> {
        self.alphabet
            .as_ref()
            .ok_or_else(|| field_err("alphabet", "section required by this subcommand"))
    }

    pub fn build_alphabet(&self) -> Result<Alphabet, CliError> {
        let cfg = self.alphabet_config()?;
        let (k, nt) = (self.k, self.nt);
        let alphabet = match &cfg.spec {
            AlphabetSpec::Energy(levels) => codebooks::energy_constellation(levels, k)?,
            AlphabetSpec::Scalars(values) => {
                let words = values
                    .iter()
                    .map(|&x| Codeword::new(CMatrix::from_element(k, 1, x)))
                    .collect::<Result<Vec<_>, _>>()?;
                Alphabet::new(words)?.normalized()
            }
            AlphabetSpec::Grassmann {
                size,
                refine_iterations,
                step,
                seed,
            } => {
                let cb = codebooks::random_grassmannian(*size, k, nt, *seed)?;
                let cb = if *refine_iterations > 0 {
                    codebooks::refine_packing(&cb, *refine_iterations, *step)?
                } else {
                    cb
                };
                cb.into_alphabet()
            }
            AlphabetSpec::Union { sizes, seed } => codebooks::subspace_union_codebook(sizes, k, nt, *seed)?.alphabet,
            AlphabetSpec::RotatedPair { seed } => rotated_pair(k, nt, *seed)?,
            AlphabetSpec::File { path, normalize } => {
                let words = io::read_matrices(path)?
                    .into_iter()
                    .map(Codeword::new)
                    .collect::<Result<Vec<_>, _>>()?;
                if words.iter().any(|w| w.k() != k || w.nt() != nt) {
                    return Err(field_err(
                        "alphabet.path",
                        format!("codewords must be {k}×{nt} to match [system]"),
                    ));
                }
                let a = Alphabet::new(words)?;
                if *normalize {
                    a.normalized()
                } else {
                    a
                }
            }
        };
        Ok(alphabet)
    }

    pub fn channel_model(&self, nr: usize) -> Result<ChannelModel, CliError> {
        let dim = self.nt * nr;
        Ok(match &self.channel {
            Spectrum::Isotropic => ChannelModel::isotropic(dim),
            Spectrum::PolynomialDecay(p) => ChannelModel::polynomial_decay(dim, *p),
            Spectrum::File(path) => {
                let m = io::parse_matrix(&std::fs::read_to_string(path)?)?;
                if m.nrows() != dim {
                    return Err(field_err("channel.path", format!("matrix must be {dim}×{dim} (Nt·Nr)")));
                }
                ChannelModel::new(m)?
            }
        })
    }

    pub fn noise_model(&self, nr: usize) -> Result<NoiseModel, CliError> {
        let dim = self.k * nr;
        Ok(match &self.noise {
            Spectrum::Isotropic => NoiseModel::isotropic(dim, self.pz)?,
            Spectrum::PolynomialDecay(p) => NoiseModel::polynomial_decay(dim, *p, self.pz)?,
            Spectrum::File(path) => {
                let m = io::parse_matrix(&std::fs::read_to_string(path)?)?;
                if m.nrows() != dim {
                    return Err(field_err("noise.path", format!("matrix must be {dim}×{dim} (K·Nr)")));
                }
                NoiseModel::new(m, self.pz)?
            }
        })
    }
}

/// `{S, S·Q}` with `S` a random truncated unitary K×Nt matrix and `Q` a random
/// Nt×Nt unitary: two codewords with the same column space.
fn rotated_pair(k: usize, nt: usize, seed: u64) -> Result<Alphabet, CliError> {
    if k < nt {
        return Err(field_err("system", "rotated-pair needs K >= Nt"));
    }
    let mut g = rng::stream(seed, 0);
    let s = CMatrix::from_fn(k, nt, |_, _| rng::complex_normal(&mut g))
        .qr()
        .q()
        .columns(0, nt)
        .into_owned();
    let q = CMatrix::from_fn(nt, nt, |_, _| rng::complex_normal(&mut g)).qr().q();
    let sq = &s * &q;
    debug_assert!(linalg::frobenius_sq(&(sq.adjoint() * &sq - linalg::identity(nt))) < 1e-20);
    Ok(Alphabet::new(vec![Codeword::new(s)?, Codeword::new(sq)?])?.normalized())
}

fn resolve_alphabet(a: RawAlphabet, nt: usize, seed: u64, base: &Path) -> Result<AlphabetConfig, CliError> {
    let extra = |present: bool, field: &str| -> Result<(), CliError> {
        if present {
            Err(field_err(&format!("alphabet.{field}"), "not used by this source"))
        } else {
            Ok(())
        }
    };
    let seed = a.seed.unwrap_or(seed);
    let (spec, default_claim) = match a.source {
        AlphabetSource::Energy => {
            extra(a.values.is_some(), "values")?;
            if nt != 1 {
                return Err(field_err("alphabet", "energy constellations need nt = 1"));
            }
            let levels = require(a.levels, "alphabet.levels")?;
            if levels.is_empty() {
                return Err(field_err("alphabet.levels", "needs at least one level"));
            }
            (AlphabetSpec::Energy(levels), StructureClaim::None)
        }
        AlphabetSource::Scalars => {
            extra(a.levels.is_some(), "levels")?;
            if nt != 1 {
                return Err(field_err("alphabet", "scalar alphabets need nt = 1"));
            }
            let values = require(a.values, "alphabet.values")?;
            if values.is_empty() {
                return Err(field_err("alphabet.values", "needs at least one symbol"));
            }
            (
                AlphabetSpec::Scalars(values.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()),
                StructureClaim::None,
            )
        }
        AlphabetSource::Grassmann => (
            AlphabetSpec::Grassmann {
                size: require(a.size, "alphabet.size")?,
                refine_iterations: a.refine_iterations.unwrap_or(0),
                step: positive(a.step.unwrap_or(0.1), "alphabet.step")?,
                seed,
            },
            StructureClaim::Unitary,
        ),
        AlphabetSource::Union => (
            AlphabetSpec::Union {
                sizes: require(a.sizes, "alphabet.sizes")?,
                seed,
            },
            StructureClaim::PartialIsometry,
        ),
        AlphabetSource::RotatedPair => (AlphabetSpec::RotatedPair { seed }, StructureClaim::Unitary),
        AlphabetSource::File => (
            AlphabetSpec::File {
                path: existing(require(a.path, "alphabet.path")?, base, "alphabet.path")?,
                normalize: a.normalize.unwrap_or(true),
            },
            StructureClaim::None,
        ),
    };
    Ok(AlphabetConfig {
        spec,
        structure: a.structure.unwrap_or(default_claim),
    })
}

fn resolve_spectrum(s: &RawSpectrum, section: &str, base: &Path) -> Result<Spectrum, CliError> {
    match s.profile {
        ProfileKind::Isotropic => {
            if s.exponent.is_some() || s.path.is_some() {
                return Err(field_err(section, "isotropic profile takes no exponent or path"));
            }
            Ok(Spectrum::Isotropic)
        }
        ProfileKind::PolynomialDecay => {
            let p = require(s.exponent, &format!("{section}.exponent"))?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(field_err(
                    &format!("{section}.exponent"),
                    "must be finite and nonnegative",
                ));
            }
            Ok(Spectrum::PolynomialDecay(p))
        }
        ProfileKind::File => Ok(Spectrum::File(existing(
            require(s.path.clone(), &format!("{section}.path"))?,
            base,
            &format!("{section}.path"),
        )?)),
    }
}
