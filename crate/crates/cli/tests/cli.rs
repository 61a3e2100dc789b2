use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ncdetect");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn ncdetect")
}

fn run_cfg(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra);
    cmd.output().expect("spawn ncdetect")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_SWEEP: &str = r#"
seed = 9

[system]
k = 1
nt = 1
nr = 2

[alphabet]
source = "energy"
levels = [0.0, 2.0]

[snr_sweep]
snr_db = [0, 10]
method = "both"
trials = 3000
symbol_error_trials = 2000
"#;

#[test]
fn csv_outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let one = dir.path().join("t1");
    let two = dir.path().join("t2");
    assert_eq!(
        run_cfg("sweep-snr", &cfg, &one, &["--threads", "1"]).status.code(),
        Some(0)
    );
    assert_eq!(
        run_cfg("sweep-snr", &cfg, &two, &["--threads", "2"]).status.code(),
        Some(0)
    );
    for f in ["pep.csv", "symbol_error.csv"] {
        let a = std::fs::read(one.join(f)).unwrap();
        let b = std::fs::read(two.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs across thread counts");
    }
}

#[test]
fn seed_override_changes_monte_carlo_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_cfg("sweep-snr", &cfg, &a, &["--seed", "1"]);
    run_cfg("sweep-snr", &cfg, &b, &["--seed", "2"]);
    let rows = |d: &Path| std::fs::read_to_string(d.join("pep.csv")).unwrap();
    let (ra, rb) = (rows(&a), rows(&b));
    let pick = |s: &str, m: &str| {
        s.lines()
            .filter(|l| l.ends_with(m))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(pick(&ra, "quadform-cf"), pick(&rb, "quadform-cf"));
    assert_ne!(pick(&ra, "monte-carlo"), pick(&rb, "monte-carlo"));
}

#[test]
fn csv_headers_and_probability_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let out = dir.path().join("o");
    run_cfg("sweep-snr", &cfg, &out, &[]);
    let pep = std::fs::read_to_string(out.join("pep.csv")).unwrap();
    let mut lines = pep.lines();
    assert_eq!(lines.next(), Some("snr_db,pair_a,pair_b,pep,ci95,method"));
    for line in lines {
        let p = line.split(',').nth(3).unwrap();
        let mantissa = p.split('e').next().unwrap();
        assert!(p.contains('e'), "{p}");
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 6, "{p}");
    }
    assert!(out.join("sweep_snr.json").exists());
}

#[test]
fn singularity_verdicts_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |name: &str| {
        run_cfg("check-singularity", &configs().join(name), dir.path(), &[])
            .status
            .code()
    };
    assert_eq!(code("energy_pair.toml"), Some(0));
    assert_eq!(code("energy_triple.toml"), Some(2));
    assert_eq!(code("rotated_pair.toml"), Some(2));
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let broken = write(d, "broken.toml", "[system]\nk = 1\nnt = [1\n");
    let out = run_cfg("check-singularity", &broken, &d.join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let empty = write(d, "empty.toml", "[system]\nk = 1\nnt = 1\n[snr_sweep]\nsnr_db = []\n");
    let out = run_cfg("sweep-snr", &empty, &d.join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr_sweep.snr_db"));

    let unknown = write(d, "unknown.toml", "[system]\nk = 1\nnt = 1\nbogus = 3\n");
    assert_eq!(run_cfg("validate", &unknown, &d.join("o"), &[]).status.code(), Some(1));

    assert_eq!(
        run(&["check-singularity", "--config", "/nonexistent.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn single_point_grassmannian_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        "[system]\nk = 2\nnt = 2\n\n[design]\nkind = \"grassmann\"\nsize = 2\n",
    );
    let out = run_cfg("design-codebook", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn union_design_has_zero_lines_and_plane() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        run_cfg("design-codebook", &configs().join("design_union.toml"), &out, &[])
            .status
            .code(),
        Some(0)
    );
    let words = ncdetect::io::read_matrices(&out.join("codebook.txt")).unwrap();
    assert_eq!(words.len(), 5);
    let ranks: Vec<usize> = words.iter().map(|w| w.rank(1e-9)).collect();
    assert_eq!(ranks, vec![0, 1, 1, 1, 2]);
}

#[test]
fn grassmann_design_reports_packing_distance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        run_cfg("design-codebook", &configs().join("design_grassmann.toml"), &out, &[])
            .status
            .code(),
        Some(0)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("design.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert!(text.contains("min_chordal_distance"), "{text}");
    let log = std::fs::read_to_string(out.join("design_log.csv")).unwrap();
    assert!(log.starts_with("iteration,min_chordal_distance,step_size"));
    let objective: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(objective.windows(2).all(|w| w[1] >= w[0]));
    assert!(out.join("codebook.txt").exists());
}

#[test]
fn designed_codebook_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_cfg("design-codebook", &configs().join("design_grassmann.toml"), d, &[]);
    let cfg = write(
        d,
        "v.toml",
        "[system]\nk = 4\nnt = 1\nnr = 2\n\n[alphabet]\nsource = \"file\"\npath = \"codebook.txt\"\nstructure = \"unitary\"\n",
    );
    assert_eq!(run_cfg("validate", &cfg, &d.join("v"), &[]).status.code(), Some(0));
    assert!(d.join("v/validation.json").exists());
}

#[test]
fn nr_sweep_writes_curve_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "nr.toml",
        "seed = 2\n[system]\nk = 1\nnt = 1\n[alphabet]\nsource = \"energy\"\nlevels = [0.0, 2.0]\n\
         [nr_sweep]\nnr = [4, 8, 16, 32]\ngamma_db = 0\ntrials = 500\n",
    );
    let out = dir.path().join("o");
    assert_eq!(run_cfg("sweep-nr", &cfg, &out, &[]).status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("nr_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "nr,pair,jeffreys,frob_stat,sigma_min_cring,sym_err");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("verdict,0-1,"), "{}", lines[5]);
    assert!(lines[5].ends_with("bounded-evidence"), "{}", lines[5]);
}
