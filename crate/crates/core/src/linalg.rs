//! Sparse matrices assembled from triplets and solved by sparse LU.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) outside a {n}x{n} matrix")]
    OutOfRange { row: usize, col: usize, n: usize },
    #[error("sparse matrix construction failed: {0}")]
    Build(String),
    #[error("LU factorization failed: {0}")]
    Factorization(String),
    #[error("solution has non-finite entries")]
    NonFinite,
}

/// Square matrix in coordinate form. Duplicate entries are summed.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        self.entries.push((row, col, val));
    }

    /// Entries sorted by `(col, row)` with duplicates summed in insertion order.
    pub fn merged(&self) -> Result<Vec<(usize, usize, f64)>, LinalgError> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        for &(row, col, _) in &self.entries {
            if row >= self.n || col >= self.n {
                return Err(LinalgError::OutOfRange { row, col, n: self.n });
            }
        }
        // stable, so the summation order is the insertion order
        idx.sort_by_key(|&i| (self.entries[i].1, self.entries[i].0));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(idx.len());
        for i in idx {
            let (r, c, v) = self.entries[i];
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for &(r, c, v) in &self.entries {
            a[r][c] += v;
        }
        a
    }

    /// Solves `A x = b` by sparse LU with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        assert_eq!(b.len(), self.n);
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let triplets: Vec<Triplet<usize, usize, f64>> = self
            .merged()?
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| LinalgError::Build(format!("{e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = lu.solve(&rhs);
        let x: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(x)
    }
}

/// Dense LU solve, used for small Newton systems.
pub fn solve_dense(a: Vec<Vec<f64>>, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let x = m
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(b))
        .ok_or_else(|| LinalgError::Factorization("singular matrix".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(x.iter().copied().collect())
}
