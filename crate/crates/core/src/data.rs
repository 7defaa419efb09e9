use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// One observed pair `(x, y)`, borrowed from a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// `n` feature rows in `ℝᵏ` with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DenseMatrix,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        if x.cols() == 0 {
            return Err(Error::DimensionMismatch("features must have at least one column".into()));
        }
        if !x.as_slice().iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("dataset contains non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], y: Vec<f64>) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Feature dimension `k`.
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample { x: self.x.row(i), y: self.y[i] }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Sample<'_>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    /// Contiguous rows `range`, in order.
    pub fn slice(&self, range: Range<usize>) -> Dataset {
        let k = self.dim();
        let data = self.x.as_slice()[range.start * k..range.end * k].to_vec();
        Dataset {
            x: DenseMatrix::from_row_major(range.len(), k, data),
            y: self.y[range].to_vec(),
        }
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let k = self.dim();
        let mut data = Vec::with_capacity(indices.len() * k);
        for &i in indices {
            data.extend_from_slice(self.x.row(i));
        }
        Dataset {
            x: DenseMatrix::from_row_major(indices.len(), k, data),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}
