//! Dense complex matrices as text.
//!
//! ```text
//! # optional comment lines
//! complex-matrix 2 2
//! 1,0 0,0
//! 0,0 1,-0.5
//! ```
//!
//! A file may hold several blocks back to back; entries are whitespace
//! separated `re,im` tokens in row-major order and may wrap across lines.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const HEADER: &str = "complex-matrix";

/// Reads every matrix block in `text`.
pub fn parse_matrices(text: &str) -> Result<Vec<CMatrix>> {
    let mut out = Vec::new();
    // (rows, cols, entries so far, header line)
    let mut pending: Option<(usize, usize, Vec<Complex64>, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace().peekable();
        if pending.is_none() {
            if tokens.next() != Some(HEADER) {
                return Err(parse_err(line, format!("expected '{HEADER} rows cols'")));
            }
            let rows = parse_dim(tokens.next(), line, "rows")?;
            let cols = parse_dim(tokens.next(), line, "cols")?;
            if let Some(extra) = tokens.next() {
                return Err(parse_err(line, format!("unexpected token '{extra}' after header")));
            }
            pending = Some((rows, cols, Vec::with_capacity(rows * cols), line));
            if rows * cols == 0 {
                out.push(CMatrix::zeros(rows, cols));
                pending = None;
            }
            continue;
        }
        let (rows, cols, entries, _) = pending.as_mut().unwrap();
        for tok in tokens {
            if entries.len() == *rows * *cols {
                return Err(parse_err(line, format!("too many entries for a {rows}x{cols} matrix")));
            }
            entries.push(parse_entry(tok, line)?);
        }
        if entries.len() == *rows * *cols {
            let (rows, cols, entries, _) = pending.take().unwrap();
            out.push(CMatrix::from_row_iterator(rows, cols, entries));
        }
    }
    if let Some((rows, cols, entries, header)) = pending {
        return Err(parse_err(
            header,
            format!(
                "{rows}x{cols} matrix ends after {} of {} entries",
                entries.len(),
                rows * cols
            ),
        ));
    }
    Ok(out)
}

/// Reads exactly one matrix.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut all = parse_matrices(text)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        n => Err(Error::Parse {
            line: 0,
            msg: format!("expected one matrix, found {n}"),
        }),
    }
}

fn parse_err(line: usize, msg: String) -> Error {
    Error::Parse { line, msg }
}

fn parse_dim(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("{what} must be a nonnegative integer, got '{tok}'")))
}

fn parse_entry(tok: &str, line: usize) -> Result<Complex64> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| parse_err(line, format!("entry '{tok}' is not of the form re,im")))?;
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad number '{s}' in entry '{tok}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(line, format!("non-finite value in entry '{tok}'")))
        }
    };
    Ok(Complex64::new(parse(re)?, parse(im)?))
}

/// Writes one block; `{:e}` with Rust's shortest round-trip digits, so
/// reading the text back yields bit-identical values.
pub fn format_matrix(m: &CMatrix) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e},{:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn format_matrices<'a>(ms: impl IntoIterator<Item = &'a CMatrix>) -> String {
    ms.into_iter().map(format_matrix).collect()
}

pub fn read_matrices(path: &Path) -> Result<Vec<CMatrix>> {
    parse_matrices(&std::fs::read_to_string(path)?)
}

pub fn write_matrices<'a>(path: &Path, ms: impl IntoIterator<Item = &'a CMatrix>) -> Result<()> {
    std::fs::write(path, format_matrices(ms))?;
    Ok(())
}
