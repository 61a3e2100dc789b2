//! The five subcommands. Each returns a [`Verdict`] or an error; file writes
//! happen at the end, tables first, plots last.

use std::fmt::Write as _;
use std::path::Path;

use ncdetect::codebooks::{self, StructureClaim};
use ncdetect::detector::DetectorBank;
use ncdetect::model::{self, linear_to_db, Alphabet, PowerConfig};
use ncdetect::pep::{self, PepEstimate};
use ncdetect::singularity::{self, DivergenceCurve, SingularityReport};
use ncdetect::{divergence, io, rng, Execution};
use serde::Serialize;

use crate::config::{DesignKind, ExperimentConfig, MethodChoice};
use crate::output::{prob, real, write_csv, write_json, write_text};
use crate::plot::{line_plot, Axes, Series};
use crate::{CliError, Verdict};

pub const PEP_HEADER: [&str; 6] = ["snr_db", "pair_a", "pair_b", "pep", "ci95", "method"];
pub const SYMBOL_ERROR_HEADER: [&str; 8] = [
    "snr_db",
    "sym_err",
    "ci95",
    "trials",
    "max_pep",
    "bound_lower",
    "bound_upper",
    "within_bounds",
];
pub const NR_HEADER: [&str; 6] = ["nr", "pair", "jeffreys", "frob_stat", "sigma_min_cring", "sym_err"];
pub const NR_VERDICT_HEADER: [&str; 5] = ["pair", "slope", "j_first", "j_last", "verdict"];
pub const SINGULARITY_HEADER: [&str; 8] = [
    "pair_a",
    "pair_b",
    "rank_a",
    "rank_b",
    "uniquely_identifiable",
    "colsp_distinct",
    "principal_angle",
    "xi_consistent",
];
pub const DESIGN_LOG_HEADER: [&str; 3] = ["iteration", "min_chordal_distance", "step_size"];

fn plot_best_effort(path: &Path, axes: &Axes, series: &[Series]) {
    if let Err(e) = line_plot(path, axes, series) {
        log::warn!("plot {} skipped: {e}", path.display());
    }
}

fn check_pair(alphabet: &Alphabet, (a, b): (usize, usize), field: &str) -> Result<(), CliError> {
    let m = alphabet.len();
    if a >= m || b >= m || a == b {
        return Err(CliError::Config(format!(
            "{field}: pair ({a}, {b}) is not two distinct indices below M = {m}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- singularity

#[derive(Debug, Serialize)]
struct SingularityOutput<'a> {
    m: usize,
    k: usize,
    nt: usize,
    nr: Option<usize>,
    gamma_db: Option<f64>,
    asd: bool,
    xi_consistent: Option<bool>,
    report: &'a SingularityReport,
}

pub fn check_singularity(cfg: &ExperimentConfig, out: &Path) -> Result<Verdict, CliError> {
    let alphabet = cfg.build_alphabet()?;
    let s = &cfg.singularity;
    let mut report = singularity::high_snr_singularity(&alphabet, s.angle_tol)?;
    let mut xi = vec![None; report.pairs.len()];
    if let Some(nr) = cfg.nr {
        let ch = cfg.channel_model(nr)?;
        let nz = cfg.noise_model(nr)?;
        ch.require_full_rank()?;
        let pw = PowerConfig::from_gamma(s.gamma, cfg.pz)?;
        let dims = cfg.dims(nr, alphabet.len())?;
        let flagged = singularity::unique_identifiability(&alphabet, &ch, &nz, &pw, &dims, s.identifiability_tol)?;
        report = report.with_identifiability(&flagged);
        for (slot, p) in xi.iter_mut().zip(&report.pairs) {
            let (xi_eq, s_eq) =
                singularity::colsp_equality_both_ways(alphabet.get(p.a), alphabet.get(p.b), &ch, &nz, nr, s.angle_tol)?;
            *slot = Some(xi_eq == s_eq);
        }
    }
    let xi_consistent = if xi.iter().all(Option::is_some) && cfg.nr.is_some() {
        Some(xi.iter().all(|x| *x == Some(true)))
    } else {
        None
    };

    let rows: Vec<Vec<String>> = report
        .pairs
        .iter()
        .zip(&xi)
        .map(|(p, x)| {
            vec![
                p.a.to_string(),
                p.b.to_string(),
                p.rank_a.to_string(),
                p.rank_b.to_string(),
                opt_bool(p.uniquely_identifiable),
                p.colsp_distinct.to_string(),
                real(p.principal_angle),
                opt_bool(*x),
            ]
        })
        .collect();
    write_csv(&out.join("singularity_pairs.csv"), &SINGULARITY_HEADER, &rows)?;
    write_json(
        &out.join("singularity.json"),
        &SingularityOutput {
            m: alphabet.len(),
            k: cfg.k,
            nt: cfg.nt,
            nr: cfg.nr,
            gamma_db: cfg.nr.map(|_| linear_to_db(s.gamma)),
            asd: report.high_snr_asd,
            xi_consistent,
            report: &report,
        },
    )?;
    let table = singularity_table(&report, &xi);
    write_text(&out.join("singularity.txt"), &table)?;
    print!("{table}");
    Ok(Verdict::from_pass(report.high_snr_asd))
}

fn opt_bool(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

fn singularity_table(r: &SingularityReport, xi: &[Option<bool>]) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:>4} {:>4} {:>6} {:>6} {:>14} {:>14} {:>12}",
        "a", "b", "rank_a", "rank_b", "identifiable", "colsp_distinct", "angle"
    );
    for (p, x) in r.pairs.iter().zip(xi) {
        let _ = writeln!(
            t,
            "{:>4} {:>4} {:>6} {:>6} {:>14} {:>14} {:>12.4e}{}",
            p.a,
            p.b,
            p.rank_a,
            p.rank_b,
            p.uniquely_identifiable.map_or("-".to_string(), |b| b.to_string()),
            p.colsp_distinct,
            p.principal_angle,
            if *x == Some(false) { "  (xi mismatch)" } else { "" }
        );
    }
    let _ = writeln!(
        t,
        "high-SNR verdict: {}",
        if r.high_snr_asd {
            "ASD (every pair spans distinct column spaces)"
        } else {
            "error floor (some pair shares a column space)"
        }
    );
    if let Some(u) = r.uniquely_identifiable {
        let _ = writeln!(t, "uniquely identifiable: {u}");
    }
    t
}

// ---------------------------------------------------------------- SNR sweep

#[derive(Debug, Clone, Serialize)]
pub struct PepRow {
    pub snr_db: f64,
    pub a: usize,
    pub b: usize,
    pub estimate: PepEstimate,
    pub upper_bound_only: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolErrorRow {
    pub snr_db: f64,
    pub gamma: f64,
    pub estimate: pep::SymbolErrorEstimate,
    pub max_pep: f64,
    pub bounds: pep::ErrorBounds,
    pub within_bounds: bool,
}

#[derive(Debug, Serialize)]
struct SnrOutput<'a> {
    nr: usize,
    m: usize,
    snr_gain: f64,
    pep: &'a [PepRow],
    symbol_error: &'a [SymbolErrorRow],
}

pub fn sweep_snr(cfg: &ExperimentConfig, out: &Path) -> Result<Verdict, CliError> {
    let sweep = cfg
        .snr_sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("snr_sweep: section required by sweep-snr".into()))?;
    let alphabet = cfg.build_alphabet()?;
    let nr = cfg.require_nr()?;
    let m = alphabet.len();
    if m < 2 {
        return Err(CliError::Config(
            "alphabet: a sweep needs at least two codewords".into(),
        ));
    }
    let ch = cfg.channel_model(nr)?;
    let nz = cfg.noise_model(nr)?;
    let dims = cfg.dims(nr, m)?;
    let gain = model::snr_gain(&alphabet, &ch, &dims)?;
    if gain <= 0.0 {
        return Err(CliError::Config(
            "alphabet: zero received signal energy, SNR undefined".into(),
        ));
    }
    let pairs = match &sweep.pairs {
        Some(p) => p.clone(),
        None => pep::ordered_pairs(m),
    };
    for &p in &pairs {
        check_pair(&alphabet, p, "snr_sweep.pairs")?;
    }
    let dim = dims.rx_len();
    let quadform_ok = dim <= pep::QUADFORM_MAX_DIM;
    let want_mc = sweep.method != MethodChoice::QuadformCf;
    let want_qf = sweep.method != MethodChoice::MonteCarlo;
    if want_qf && !quadform_ok {
        if sweep.method == MethodChoice::QuadformCf {
            return Err(CliError::Config(format!(
                "snr_sweep.method: quadrature limited to dimension {}, model has {dim}",
                pep::QUADFORM_MAX_DIM
            )));
        }
        log::warn!("dimension {dim} too large for the quadrature; Monte Carlo only");
    }

    let mut pep_rows = Vec::new();
    let mut se_rows = Vec::new();
    for (i, (&snr_db, &snr)) in sweep.snr_db.iter().zip(&sweep.snr).enumerate() {
        let gamma = snr / gain;
        let pw = PowerConfig::from_gamma(gamma, cfg.pz)?;
        let covs = model::conditional_covariances(&alphabet, &ch, &nz, &pw, nr)?;
        let point_seed = rng::derive_seed(cfg.seed, i as u64);
        let mut max_qf: f64 = 0.0;
        let mut max_mc: f64 = 0.0;
        for &(a, b) in &pairs {
            if want_mc {
                let est = pep::pep_monte_carlo(
                    &covs[a],
                    &covs[b],
                    sweep.trials,
                    rng::derive_seed(point_seed, (a * m + b) as u64),
                )?;
                max_mc = max_mc.max(est.value);
                pep_rows.push(PepRow {
                    snr_db,
                    a,
                    b,
                    upper_bound_only: false,
                    estimate: est,
                });
            }
            if want_qf && quadform_ok {
                let est = pep::pep_quadform(&covs[a], &covs[b], sweep.tol)?;
                pep_rows.push(PepRow {
                    snr_db,
                    a,
                    b,
                    upper_bound_only: est.is_upper_bound_only(),
                    estimate: est,
                });
            }
        }
        if sweep.symbol_error_trials > 0 {
            // the bracket needs the largest PEP over every ordered pair
            let max_pep = if quadform_ok {
                for (_, _, e) in pep::pairwise_peps_quadform(&covs, sweep.tol)? {
                    max_qf = max_qf.max(e.value);
                }
                max_qf
            } else {
                max_mc
            };
            let bank = DetectorBank::new(covs)?;
            let trials = sweep.symbol_error_trials.max(m as u64);
            let estimate = pep::symbol_error_bank_with(
                &bank,
                trials,
                rng::derive_seed(point_seed, u64::MAX),
                Execution::default(),
            )?;
            let bounds = pep::error_prob_bounds(max_pep, m)?;
            let within = estimate.upper >= bounds.lower && estimate.lower <= bounds.upper;
            se_rows.push(SymbolErrorRow {
                snr_db,
                gamma,
                max_pep,
                bounds,
                within_bounds: within,
                estimate,
            });
        }
    }

    let rows: Vec<Vec<String>> = pep_rows
        .iter()
        .map(|r| {
            vec![
                real(r.snr_db),
                r.a.to_string(),
                r.b.to_string(),
                prob(r.estimate.value),
                prob(r.estimate.ci95),
                r.estimate.method.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("pep.csv"), &PEP_HEADER, &rows)?;
    let rows: Vec<Vec<String>> = se_rows
        .iter()
        .map(|r| {
            vec![
                real(r.snr_db),
                prob(r.estimate.average),
                prob(r.estimate.ci95),
                r.estimate.trials.to_string(),
                prob(r.max_pep),
                prob(r.bounds.lower),
                prob(r.bounds.upper),
                r.within_bounds.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("symbol_error.csv"), &SYMBOL_ERROR_HEADER, &rows)?;
    write_json(
        &out.join("sweep_snr.json"),
        &SnrOutput {
            nr,
            m,
            snr_gain: gain,
            pep: &pep_rows,
            symbol_error: &se_rows,
        },
    )?;

    let mut series: Vec<Series> = Vec::new();
    for r in &pep_rows {
        let label = format!("{}->{} {}", r.a, r.b, r.estimate.method);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((r.snr_db, r.estimate.value)),
            None => series.push(Series {
                label,
                points: vec![(r.snr_db, r.estimate.value)],
            }),
        }
    }
    // one legend entry per pair and method stays readable up to a handful of pairs
    series.truncate(12);
    plot_best_effort(
        &out.join("pep.svg"),
        &Axes {
            title: "Pairwise error probability",
            x_label: "SNR [dB]",
            y_label: "PEP",
            log_x: false,
            log_y: true,
        },
        &series,
    );
    if !se_rows.is_empty() {
        plot_best_effort(
            &out.join("symbol_error.svg"),
            &Axes {
                title: "Symbol error rate",
                x_label: "SNR [dB]",
                y_label: "P_e",
                log_x: false,
                log_y: true,
            },
            &[
                Series {
                    label: "measured".into(),
                    points: se_rows.iter().map(|r| (r.snr_db, r.estimate.average)).collect(),
                },
                Series {
                    label: "max PEP / M".into(),
                    points: se_rows.iter().map(|r| (r.snr_db, r.bounds.lower)).collect(),
                },
                Series {
                    label: "(M-1) max PEP".into(),
                    points: se_rows.iter().map(|r| (r.snr_db, r.bounds.upper)).collect(),
                },
            ],
        );
    }
    println!(
        "sweep-snr: {} PEP rows over {} SNR points, {} symbol-error rows",
        pep_rows.len(),
        sweep.snr.len(),
        se_rows.len()
    );
    Ok(Verdict::Pass)
}

// ---------------------------------------------------------------- Nr sweep

#[derive(Debug, Clone, Serialize)]
pub struct NrRow {
    pub nr: usize,
    pub jeffreys: f64,
    pub frob_stat: f64,
    pub sigma_min_cring: f64,
    pub symbol_error: pep::SymbolErrorEstimate,
}

#[derive(Debug, Serialize)]
struct NrOutput<'a> {
    pair: (usize, usize),
    gamma_db: f64,
    rows: &'a [NrRow],
    curve: &'a DivergenceCurve,
}

pub fn sweep_nr(cfg: &ExperimentConfig, out: &Path) -> Result<Verdict, CliError> {
    let sweep = cfg
        .nr_sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("nr_sweep: section required by sweep-nr".into()))?;
    let alphabet = cfg.build_alphabet()?;
    check_pair(&alphabet, sweep.pair, "nr_sweep.pair")?;
    let (a, b) = sweep.pair;
    let pw = PowerConfig::from_gamma(sweep.gamma, cfg.pz)?;
    let m = alphabet.len();

    let mut rows = Vec::with_capacity(sweep.nr.len());
    for &nr in &sweep.nr {
        let ch = cfg.channel_model(nr)?;
        let nz = cfg.noise_model(nr)?;
        let covs = model::conditional_covariances(&alphabet, &ch, &nz, &pw, nr)?;
        let jeffreys = divergence::jeffreys_trace(&covs[a], &covs[b])?;
        let (frob_stat, sigma_min_cring) = divergence::equivalent_condition_stats(&covs[a], &covs[b])?;
        let bank = DetectorBank::new(covs)?;
        let symbol_error = pep::symbol_error_bank_with(
            &bank,
            sweep.trials.max(m as u64),
            rng::derive_seed(cfg.seed, nr as u64),
            Execution::default(),
        )?;
        rows.push(NrRow {
            nr,
            jeffreys,
            frob_stat,
            sigma_min_cring,
            symbol_error,
        });
    }
    let curve = DivergenceCurve::from_values(sweep.nr.clone(), rows.iter().map(|r| r.jeffreys).collect())?;

    let pair_label = format!("{a}-{b}");
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.nr.to_string(),
                pair_label.clone(),
                real(r.jeffreys),
                real(r.frob_stat),
                real(r.sigma_min_cring),
                prob(r.symbol_error.average),
            ]
        })
        .collect();
    table.push(vec![
        "verdict".into(),
        pair_label.clone(),
        real(curve.slope),
        String::new(),
        String::new(),
        curve.verdict.to_string(),
    ]);
    write_csv(&out.join("nr_sweep.csv"), &NR_HEADER, &table)?;
    write_csv(
        &out.join("nr_verdicts.csv"),
        &NR_VERDICT_HEADER,
        &[vec![
            pair_label,
            real(curve.slope),
            real(curve.j_values[0]),
            real(*curve.j_values.last().unwrap()),
            curve.verdict.to_string(),
        ]],
    )?;
    write_json(
        &out.join("sweep_nr.json"),
        &NrOutput {
            pair: sweep.pair,
            gamma_db: linear_to_db(sweep.gamma),
            rows: &rows,
            curve: &curve,
        },
    )?;
    let nr_axis = |f: &dyn Fn(&NrRow) -> f64| rows.iter().map(|r| (r.nr as f64, f(r))).collect::<Vec<_>>();
    plot_best_effort(
        &out.join("nr_sweep_jeffreys.svg"),
        &Axes {
            title: "Jeffreys divergence vs array size",
            x_label: "Nr",
            y_label: "J",
            log_x: true,
            log_y: true,
        },
        &[Series {
            label: format!("pair {a}-{b}"),
            points: nr_axis(&|r| r.jeffreys),
        }],
    );
    plot_best_effort(
        &out.join("nr_sweep_symbol_error.svg"),
        &Axes {
            title: "Symbol error rate vs array size",
            x_label: "Nr",
            y_label: "P_e",
            log_x: true,
            log_y: true,
        },
        &[Series {
            label: "measured".into(),
            points: nr_axis(&|r| r.symbol_error.average),
        }],
    );
    println!(
        "sweep-nr: pair {a}-{b}, slope {:.4}, verdict {}",
        curve.slope, curve.verdict
    );
    Ok(Verdict::Pass)
}

// ---------------------------------------------------------------- design

#[derive(Debug, Serialize)]
struct DesignOutput<'a> {
    kind: &'static str,
    m: usize,
    k: usize,
    nt: usize,
    min_chordal_distance: Option<f64>,
    log: Option<&'a codebooks::DesignLog>,
    validation: &'a codebooks::CodebookReport,
    singularity: &'a SingularityReport,
    pass: bool,
}

pub fn design_codebook(cfg: &ExperimentConfig, out: &Path) -> Result<Verdict, CliError> {
    let d = cfg
        .design
        .as_ref()
        .ok_or_else(|| CliError::Config("design: section required by design-codebook".into()))?;
    let (k, nt) = (cfg.k, cfg.nt);
    let (kind, alphabet, log, claim) = match d.kind {
        DesignKind::Grassmann => {
            let cb = codebooks::random_grassmannian(d.size, k, nt, d.seed)?;
            let cb = codebooks::refine_packing(&cb, d.iterations, d.step)?;
            let log = cb.design_log.clone();
            ("grassmann", cb.into_alphabet(), Some(log), StructureClaim::Unitary)
        }
        DesignKind::Union => {
            let u = codebooks::subspace_union_codebook(&d.sizes, k, nt, d.seed)?;
            ("union", u.alphabet, None, StructureClaim::PartialIsometry)
        }
    };
    let validation = codebooks::validate_codebook(&alphabet, claim)?;
    let sing = singularity::high_snr_singularity(&alphabet, cfg.singularity.angle_tol)?;
    let pass = validation.pass && sing.high_snr_asd;

    let mut text = format!(
        "# {kind} codebook: M={} K={k} Nt={nt}, unit average power\n",
        alphabet.len()
    );
    text.push_str(&io::format_matrices(alphabet.codewords().iter().map(|c| c.matrix())));
    write_text(&out.join("codebook.txt"), &text)?;
    let log_rows: Vec<Vec<String>> = match &log {
        Some(l) => l
            .objective
            .iter()
            .enumerate()
            .map(|(i, v)| {
                vec![
                    i.to_string(),
                    real(*v),
                    if i == 0 { real(d.step) } else { real(l.step_size[i - 1]) },
                ]
            })
            .collect(),
        None => vec![vec!["0".into(), real(validation.min_chordal_distance), String::new()]],
    };
    write_csv(&out.join("design_log.csv"), &DESIGN_LOG_HEADER, &log_rows)?;
    let min_d = validation.min_chordal_distance;
    write_json(
        &out.join("design.json"),
        &DesignOutput {
            kind,
            m: alphabet.len(),
            k,
            nt,
            min_chordal_distance: min_d.is_finite().then_some(min_d),
            log: log.as_ref(),
            validation: &validation,
            singularity: &sing,
            pass,
        },
    )?;
    if let Some(l) = &log {
        if l.objective.len() > 1 {
            plot_best_effort(
                &out.join("design_objective.svg"),
                &Axes {
                    title: "Packing refinement",
                    x_label: "iteration",
                    y_label: "min chordal distance",
                    log_x: false,
                    log_y: false,
                },
                &[Series {
                    label: "objective".into(),
                    points: l.objective.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect(),
                }],
            );
        }
    }
    println!(
        "design-codebook: {kind}, M={}, minChordalDistance={}, validation {}, high-SNR {}",
        alphabet.len(),
        real(min_d),
        if validation.pass { "pass" } else { "FAIL" },
        if sing.high_snr_asd { "ASD" } else { "error floor" }
    );
    Ok(Verdict::from_pass(pass))
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Serialize)]
struct ValidateOutput<'a> {
    codebook: &'a codebooks::CodebookReport,
    normalizations: Option<&'a model::NormalizationReport>,
    pass: bool,
}

/// Builds every model object the config describes and checks the codebook's
/// declared structure and, when `nr` is known, the power normalizations.
pub fn validate(cfg: &ExperimentConfig, out: &Path) -> Result<Verdict, CliError> {
    let alphabet = cfg.build_alphabet()?;
    let claim = cfg.alphabet_config()?.structure;
    let codebook = codebooks::validate_codebook(&alphabet, claim)?;
    let norms = match cfg.nr {
        Some(nr) => {
            let dims = cfg.dims(nr, alphabet.len())?;
            Some(model::check_normalizations(
                &alphabet,
                &cfg.channel_model(nr)?,
                &cfg.noise_model(nr)?,
                &dims,
            ))
        }
        None => None,
    };
    let pass = codebook.pass && norms.as_ref().is_none_or(|n| n.all_pass());
    write_json(
        &out.join("validation.json"),
        &ValidateOutput {
            codebook: &codebook,
            normalizations: norms.as_ref(),
            pass,
        },
    )?;
    println!(
        "validate: M={}, power {} ({}), structure {:?} {} (deviation {:.3e}), distinct {}{}",
        codebook.size,
        real(codebook.average_power),
        pass_word(codebook.power_pass),
        claim,
        pass_word(codebook.structure_pass),
        codebook.structure_deviation,
        pass_word(codebook.distinct_pass),
        match &norms {
            Some(n) => format!(
                ", channel trace {} ({}), noise trace {} ({})",
                real(n.channel_power.measured),
                pass_word(n.channel_power.pass),
                real(n.noise_power.measured),
                pass_word(n.noise_power.pass)
            ),
            None => String::new(),
        }
    );
    Ok(Verdict::from_pass(pass))
}

fn pass_word(p: bool) -> &'static str {
    if p {
        "pass"
    } else {
        "FAIL"
    }
}
