//! Batch experiment driver for `ncdetect`.
//!
//! Each subcommand loads an [`config::ExperimentConfig`], computes, then
//! writes its tables (CSV), a JSON report and best-effort SVG plots into the
//! output directory. Data files are written before any plot is attempted.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ncdetect::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Negative,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Negative
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Negative => 2,
        }
    }
}

/// Exit code for a failed run.
pub const EXIT_ERROR: i32 = 1;
