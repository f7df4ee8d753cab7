//! Knot and selection files, matrix triplets and convergence tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use aduals_core::experiments::{kernel_name, ConvergenceRecord};
use aduals_core::{CoarseSelection, KnotError, KnotVector, SparseMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path}: malformed JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Knots { path: String, source: KnotError },
}

/// `{"order": m, "knots": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotFile {
    pub order: usize,
    pub knots: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectEntry {
    pub value: f64,
    pub mult: usize,
}

/// `{"select": [{"value": v, "mult": μ}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectFile {
    pub select: Vec<SelectEntry>,
}

impl KnotFile {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_knot_vector(&self) -> Result<KnotVector, KnotError> {
        KnotVector::new(self.knots.clone(), self.order)
    }
}

impl SelectFile {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn pairs(&self) -> Vec<(f64, usize)> {
        self.select.iter().map(|e| (e.value, e.mult)).collect()
    }

    pub fn to_selection(&self, kv: &KnotVector) -> Result<CoarseSelection, KnotError> {
        kv.select_coarse(&self.pairs())
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

pub fn read_knots(path: &Path) -> Result<KnotVector, IoError> {
    let p = path.display().to_string();
    let file = KnotFile::parse(&read(path)?).map_err(|source| IoError::Json { path: p.clone(), source })?;
    file.to_knot_vector().map_err(|source| IoError::Knots { path: p, source })
}

pub fn read_selection(path: &Path, kv: &KnotVector) -> Result<CoarseSelection, IoError> {
    let p = path.display().to_string();
    let file = SelectFile::parse(&read(path)?).map_err(|source| IoError::Json { path: p.clone(), source })?;
    file.to_selection(kv).map_err(|source| IoError::Knots { path: p, source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Write { path: path.display().to_string(), source })
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `row,col,value` lines with 1-based indices, sorted by row then column.
pub fn triplets_csv(m: &SparseMatrix) -> String {
    let mut entries = m.entries().to_vec();
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = String::from("row,col,value\n");
    for (i, j, v) in entries {
        let _ = writeln!(out, "{},{},{}", i + 1, j + 1, fmt_f64(v));
    }
    out
}

/// Reads triplets written by [`triplets_csv`] back into a matrix.
pub fn parse_triplets(text: &str, rows: usize, cols: usize) -> Option<SparseMatrix> {
    let mut trip = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let mut it = line.split(',');
        let i: usize = it.next()?.parse().ok()?;
        let j: usize = it.next()?.parse().ok()?;
        let v: f64 = it.next()?.parse().ok()?;
        if i == 0 || j == 0 || i > rows || j > cols || it.next().is_some() {
            return None;
        }
        trip.push((i - 1, j - 1, v));
    }
    Some(SparseMatrix::from_triplets(rows, cols, &trip))
}

pub const CONVERGENCE_HEADER: &str = "m,case,kernel,N,h,l2_error,slope";

/// One row per record; the slope column is empty on the first level.
pub fn convergence_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in records {
        let slope = r.slope.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.m,
            r.case.as_str(),
            kernel_name(r.kernel),
            r.n,
            fmt_f64(r.h),
            fmt_f64(r.l2_error),
            slope
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 0.1 + 0.2] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn knot_file_rejects_unknown_fields() {
        assert!(KnotFile::parse(r#"{"order": 2, "knots": [0, 0, 1, 1], "extra": 1}"#).is_err());
        let f = KnotFile::parse(r#"{"order": 2, "knots": [0, 0, 0.5, 1, 1]}"#).unwrap();
        assert_eq!(f.to_knot_vector().unwrap().dim(), 3);
    }

    #[test]
    fn triplets_round_trip() {
        let m = SparseMatrix::from_triplets(3, 4, &[(2, 3, 1.0 / 7.0), (0, 1, -2.0), (1, 0, 1e-17)]);
        let text = triplets_csv(&m);
        assert!(text.starts_with("row,col,value\n1,2,"));
        let back = parse_triplets(&text, 3, 4).unwrap();
        assert_eq!(back.to_dense(), m.to_dense());
        assert!(parse_triplets("row,col,value\n0,1,1.0\n", 3, 4).is_none());
    }
}
