use std::ops::Deref;

use crate::error::{Error, Result};

/// Raw classifier outputs: `N` samples by `K` classes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl LogitsMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows < 1 {
            return Err(Error::invalid("logits matrix needs at least one row"));
        }
        if n_cols < 2 {
            return Err(Error::invalid(format!(
                "logits matrix needs at least two classes, got {n_cols}"
            )));
        }
        if n_rows.checked_mul(n_cols) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "logits buffer of length {} does not match shape {n_rows}x{n_cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite logit {} at row {}, column {}",
                data[i],
                i / n_cols,
                i % n_cols
            )));
        }
        Ok(Self { data, n_rows, n_cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, rows.len(), n_cols)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::new(vec![0.0; n_rows * n_cols], n_rows, n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Index of the largest logit per row, lowest index on ties.
    pub fn argmax_rows(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Row-stochastic matrix of normalized predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl ProbMatrix {
    pub const ROW_SUM_TOL: f64 = 1e-9;

    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows < 1 || n_cols < 1 || n_rows.checked_mul(n_cols) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "probability buffer of length {} does not match shape {n_rows}x{n_cols}",
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact(n_cols).enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::invalid(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self { data, n_rows, n_cols })
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Self {
        debug_assert_eq!(data.len(), n_rows * n_cols);
        Self { data, n_rows, n_cols }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("probability vector is empty"));
        }
        if let Some(i) = data.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid(format!(
                "probability entry {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        let s: f64 = data.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::invalid(format!("probability vector sums to {s}, not 1")));
        }
        Ok(Self(data))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution over zero outcomes");
        Self(vec![1.0 / k as f64; k])
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
