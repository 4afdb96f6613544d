//! Text formats: basis listings and coordinate-format matrices.
//!
//! Both start with a single JSON header line. A basis listing follows with
//! one state per line; a matrix follows with `i j value` lines.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_basis::{Basis, FockState};
use crate::sparse::SparseMatrix;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisHeader {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "Q")]
    pub q: Option<i32>,
    pub dim: usize,
}

pub fn write_basis(out: &mut impl Write, basis: &Basis) -> Result<()> {
    let header = BasisHeader {
        k: basis.k(),
        q: basis.q(),
        dim: basis.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("plain struct"))?;
    for s in basis.states() {
        writeln!(out, "{s}")?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn header_line<T: for<'de> Deserialize<'de>>(text: &str) -> Result<(T, std::iter::Enumerate<std::str::Lines<'_>>)> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "missing header line"))?;
    let header = serde_json::from_str(first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    Ok((header, lines))
}

/// Parses a basis listing, checking the header against the states.
pub fn parse_basis(text: &str) -> Result<Basis> {
    let (header, lines): (BasisHeader, _) = header_line(text)?;
    if header.k < 1 {
        return Err(parse_err(1, "K must be >= 1"));
    }
    let mut states = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let s: FockState = line.parse().map_err(|e| match e {
            Error::Parse { msg, .. } => parse_err(i + 1, msg),
            other => other,
        })?;
        if s.momentum() != header.k {
            return Err(parse_err(i + 1, format!("state momentum {} != K = {}", s.momentum(), header.k)));
        }
        if let Some(q) = header.q {
            if s.charge() != q {
                return Err(parse_err(i + 1, format!("state charge {} != Q = {q}", s.charge())));
            }
        }
        states.push(s);
        if states.len() > header.dim {
            return Err(parse_err(i + 1, "more states than the header's dim"));
        }
    }
    if states.len() != header.dim {
        return Err(parse_err(0, format!("header dim {} but {} states", header.dim, states.len())));
    }
    Basis::from_states(header.k, header.q, states).map_err(|e| match e {
        Error::InvalidArgument(msg) => parse_err(0, msg),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub dim: usize,
    pub nnz: usize,
    pub sparsity: usize,
    pub max_element: f64,
}

/// Writes the matrix with a header; `max_element` is passed in so callers
/// decide its normalization.
pub fn write_matrix(out: &mut impl Write, matrix: &SparseMatrix, max_element: f64) -> Result<()> {
    let header = MatrixHeader {
        dim: matrix.dim(),
        nnz: matrix.nnz(),
        sparsity: matrix.max_row_count(),
        max_element,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("plain struct"))?;
    for (i, j, v) in matrix.triplets() {
        writeln!(out, "{i} {j} {}", fmt_f64(v))?;
    }
    Ok(())
}

/// Parses a coordinate-format matrix. Duplicate positions are rejected.
pub fn parse_matrix(text: &str) -> Result<(MatrixHeader, SparseMatrix)> {
    let (header, lines): (MatrixHeader, _) = header_line(text)?;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let (Some(a), Some(b), Some(c), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(i + 1, "expected `i j value`"));
        };
        let row: usize = a.parse().map_err(|_| parse_err(i + 1, "bad row index"))?;
        let col: usize = b.parse().map_err(|_| parse_err(i + 1, "bad column index"))?;
        let v: f64 = c.parse().map_err(|_| parse_err(i + 1, "bad value"))?;
        if !v.is_finite() {
            return Err(parse_err(i + 1, "non-finite value"));
        }
        if row >= header.dim || col >= header.dim {
            return Err(parse_err(i + 1, format!("index outside dim {}", header.dim)));
        }
        if v == 0.0 {
            return Err(parse_err(i + 1, "explicit zero entry"));
        }
        triplets.push((row, col, v));
        if triplets.len() > header.nnz {
            return Err(parse_err(i + 1, "more entries than the header's nnz"));
        }
    }
    if triplets.len() != header.nnz {
        return Err(parse_err(0, format!("header nnz {} but {} entries", header.nnz, triplets.len())));
    }
    let n = triplets.len();
    let m = SparseMatrix::from_triplets(header.dim, triplets)?;
    if m.nnz() != n {
        return Err(parse_err(0, "duplicate matrix positions"));
    }
    Ok((header, m))
}
