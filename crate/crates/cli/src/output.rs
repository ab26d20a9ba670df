//! Number formatting and file writers for the output directory.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serializing {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("writing CSV {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// Six significant digits, `%g`-style: plain decimals for moderate
/// magnitudes, scientific notation otherwise, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.into(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    std::fs::write(path, text).map_err(|source| OutputError::Io { path: path.into(), source })
}

/// Pretty JSON with a trailing newline; floats keep full precision.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| OutputError::Json { path: path.into(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), OutputError> {
    let err = |source| OutputError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| err(e.into_error().into()))?;
    std::fs::write(path, bytes).map_err(|source| OutputError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.485), "0.485");
        assert_eq!(sig6(std::f64::consts::PI), "3.14159");
        assert_eq!(sig6(-7805.936), "-7805.94");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1.5e-7), "1.5e-7");
        assert_eq!(sig6(f64::NAN), "NaN");
        assert_eq!(opt6(None), "");
    }

    #[test]
    fn significant_digits_preserved() {
        for &x in &[0.123456789, 98765.4321, 2.5e-5, 3.3e8, -0.0061] {
            let back: f64 = sig6(x).parse().unwrap();
            assert!(((back - x) / x).abs() <= 5e-6, "{x} -> {}", sig6(x));
        }
    }
}
