//! Plain-text number formatting and whitespace-separated vector files.
//!
//! Every float written by this crate goes through [`fmt_float`]: nine
//! significant digits, `%g` style (fixed notation for moderate magnitudes,
//! scientific otherwise), trailing zeros trimmed. Files use LF line endings.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Significant digits of every serialized float.
pub const SIG_DIGITS: usize = 9;

/// Formats `x` with [`SIG_DIGITS`] significant digits, like C's `%.9g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Let the scientific formatter do the rounding, then read the exponent
    // back so values like 9.999999999 that round up are classified correctly.
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes one vector per line, components separated by single spaces.
pub fn write_vectors<V: AsRef<[f64]>>(path: &Path, rows: &[V]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        let line: Vec<String> = row.as_ref().iter().map(|&v| fmt_float(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a whitespace-separated vector file. Blank lines and lines starting
/// with `#` are skipped; every remaining line must have the same width.
pub fn read_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{}: not a number", path.display(), lineno + 1))?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                bail!(
                    "{}:{}: expected {first} columns, found {}",
                    path.display(),
                    lineno + 1,
                    row.len()
                );
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
