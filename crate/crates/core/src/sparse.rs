//! Row-compressed real matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Entries with magnitude at or below this count as structural zeros.
pub const STRUCTURAL_ZERO: f64 = 1e-14;

/// Compressed sparse row storage. Column indices are sorted and unique
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a square matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed; explicit zeros are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= dim || j >= dim) {
            return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside a {dim}x{dim} matrix")));
        }
        triplets.par_sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            if rows.last() == Some(&i) && indices.last() == Some(&j) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                indices.push(j);
                values.push(v);
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut k = 0;
        for idx in 0..rows.len() {
            if values[idx] != 0.0 {
                indices[k] = indices[idx];
                values[k] = values[idx];
                keep_rows.push(rows[idx]);
                k += 1;
            }
        }
        indices.truncate(k);
        values.truncate(k);
        for &i in &keep_rows {
            indptr[i + 1] += 1;
        }
        for i in 0..dim {
            indptr[i + 1] += indptr[i];
        }
        Ok(SparseMatrix {
            dim,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let triplets = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), triplets).expect("indices in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest number of entries above [`STRUCTURAL_ZERO`] in any row.
    pub fn max_row_count(&self) -> usize {
        (0..self.dim)
            .map(|i| self.row(i).1.iter().filter(|v| v.abs() > STRUCTURAL_ZERO).count())
            .max()
            .unwrap_or(0)
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.dim, triplets).expect("indices in range")
    }

    /// Largest `|A_ij - A_ji|` over all stored positions.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `sum_i c_i A_i` over matrices of equal dimension.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::InvalidArgument("empty linear combination".into()));
        };
        let dim = first.dim;
        if terms.iter().any(|(_, m)| m.dim != dim) {
            return Err(Error::InvalidArgument("dimension mismatch in linear combination".into()));
        }
        let triplets = terms
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .flat_map(|&(c, m)| m.triplets().map(move |(i, j, v)| (i, j, c * v)))
            .collect();
        Self::from_triplets(dim, triplets)
    }

    /// `y = A x`, rows processed in parallel.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length must match matrix dimension");
        (0..self.dim)
            .into_par_iter()
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}
