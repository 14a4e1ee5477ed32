//! Dense row-major token embedding matrices.

use crate::error::{Error, Result};

/// An `rows × dim` float32 matrix, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl TokenMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != rows * dim {
            return Err(Error::InvalidArgument(format!(
                "matrix of {rows}x{dim} needs {} values, got {}",
                rows * dim,
                values.len()
            )));
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyMatrix)?;
        let dim = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// First `(row, col)` holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.dim, i % self.dim))
    }

    /// Copy of the matrix with every row scaled to unit ℓ2 norm.
    ///
    /// Fails on the first zero-norm row.
    pub fn normalized(&self) -> std::result::Result<TokenMatrix, usize> {
        let mut values = Vec::with_capacity(self.values.len());
        for (i, row) in self.iter_rows().enumerate() {
            values.extend(unit(row).ok_or(i)?);
        }
        Ok(TokenMatrix {
            rows: self.rows,
            dim: self.dim,
            values,
        })
    }
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Unit-length copy of `v`, or `None` for a zero (or non-finite) norm.
pub(crate) fn unit(v: &[f32]) -> Option<Vec<f32>> {
    let n = norm(v);
    if !(n > 0.0 && n.is_finite()) {
        return None;
    }
    Some(v.iter().map(|&x| (x as f64 / n) as f32).collect())
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}
