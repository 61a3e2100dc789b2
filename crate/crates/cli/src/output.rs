//! Table, report and codebook writers.
//!
//! Numbers are formatted without locale: probabilities in scientific notation
//! with six significant digits, other reals in Rust's shortest round-trip form.

use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Six significant digits, scientific notation (`1.23457e-3`).
pub fn prob(p: f64) -> String {
    format!("{p:.5e}")
}

pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_have_six_significant_digits() {
        assert_eq!(prob(0.5), "5.00000e-1");
        assert_eq!(prob(1.234567e-7), "1.23457e-7");
        assert_eq!(prob(0.0), "0.00000e0");
        assert_eq!(prob(1.0), "1.00000e0");
    }

    #[test]
    fn csv_has_exact_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["a", "b"], &[vec!["1".into(), prob(0.25)]]).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "a,b\n1,2.50000e-1\n");
    }
}
