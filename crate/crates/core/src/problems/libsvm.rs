//! LIBSVM sparse text format: `label idx:val idx:val ...` with 1-based indices.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, VrviError};
use crate::point::Point;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    /// +1 or -1.
    pub label: f64,
    /// Strictly increasing 0-based indices.
    pub features: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn to_dense(&self, n: usize) -> Point {
        let mut v = vec![0.0; n];
        for &(i, x) in &self.features {
            v[i] = x;
        }
        Point::from_vec(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseDataset {
    pub rows: Vec<SparseRow>,
    pub n_features: usize,
}

impl SparseDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<Option<SparseRow>> {
    let err = |msg: String| VrviError::Parse { line: line_no, msg };
    let content = line.split('#').next().unwrap_or("");
    let mut tokens = content.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let label: f64 = label_tok.parse().map_err(|_| err(format!("bad label '{label_tok}'")))?;
    if !label.is_finite() {
        return Err(err(format!("bad label '{label_tok}'")));
    }
    let label = if label > 0.0 { 1.0 } else { -1.0 };
    let mut features: Vec<(usize, f64)> = Vec::new();
    for tok in tokens {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed token '{tok}'")))?;
        let idx: usize = i.parse().map_err(|_| err(format!("bad index in '{tok}'")))?;
        if idx == 0 {
            return Err(err(format!("indices are 1-based, got '{tok}'")));
        }
        let val: f64 = v.parse().map_err(|_| err(format!("bad value in '{tok}'")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite value in '{tok}'")));
        }
        if let Some(&(prev, _)) = features.last() {
            if idx - 1 <= prev {
                return Err(err(format!("indices must be strictly ascending at '{tok}'")));
            }
        }
        features.push((idx - 1, val));
    }
    Ok(Some(SparseRow { label, features }))
}

pub fn parse_libsvm_str(text: &str) -> Result<SparseDataset> {
    let mut ds = SparseDataset::default();
    for (k, line) in text.lines().enumerate() {
        if let Some(row) = parse_line(line, k + 1)? {
            if let Some(&(last, _)) = row.features.last() {
                ds.n_features = ds.n_features.max(last + 1);
            }
            ds.rows.push(row);
        }
    }
    Ok(ds)
}

pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<SparseDataset> {
    parse_libsvm_str(&std::fs::read_to_string(path)?)
}

pub fn serialize_libsvm(ds: &SparseDataset) -> String {
    let mut out = String::new();
    for row in &ds.rows {
        out.push_str(if row.label > 0.0 { "1" } else { "-1" });
        for &(i, v) in &row.features {
            let _ = write!(out, " {}:{v:?}", i + 1);
        }
        out.push('\n');
    }
    out
}
