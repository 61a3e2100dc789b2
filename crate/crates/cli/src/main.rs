use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncdetect_cli::config::ExperimentConfig;
use ncdetect_cli::{commands, CliError, Verdict, EXIT_ERROR};

/// Noncoherent MIMO detection experiments.
///
/// Exit status: 0 on a positive verdict, 2 on a negative one, 1 on any error.
#[derive(Parser)]
#[command(name = "ncdetect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Column-space (high-SNR) and identifiability verdicts for an alphabet.
    CheckSingularity(Common),
    /// Pairwise error probabilities and symbol error rate over an SNR grid.
    SweepSnr(Common),
    /// Jeffreys divergence and error rate over a grid of array sizes.
    SweepNr(Common),
    /// Generate a Grassmannian or subspace-union codebook.
    DesignCodebook(Common),
    /// Check a configured codebook and model against their declared constraints.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the data-parallel loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: the config's `out`, else ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn set_threads(n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the parallel feature; --threads {n} ignored");
    Ok(())
}

fn run(command: Command) -> Result<Verdict, CliError> {
    let (common, f): (Common, fn(&ExperimentConfig, &Path) -> Result<Verdict, CliError>) = match command {
        Command::CheckSingularity(c) => (c, commands::check_singularity),
        Command::SweepSnr(c) => (c, commands::sweep_snr),
        Command::SweepNr(c) => (c, commands::sweep_nr),
        Command::DesignCodebook(c) => (c, commands::design_codebook),
        Command::Validate(c) => (c, commands::validate),
    };
    if let Some(n) = common.threads {
        set_threads(n)?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    let out = common
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out)?;
    f(&cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(v) => ExitCode::from(v.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
