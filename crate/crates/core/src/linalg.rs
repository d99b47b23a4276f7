//! Dense vectors and row-major matrices for the small synthetic problems.
//!
//! Dimensions here are tiny (a handful of entries), so everything is a plain
//! `Vec<f64>` and every loop runs in a fixed order. That ordering is part of
//! the reproducibility contract: the same inputs always round the same way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Checked constructor: at least one entry, all finite.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("vector must have at least one entry".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("vector entries must be finite".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_vec(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|v| c * v).collect())
    }

    /// `self + c * dir`
    pub fn add_scaled(&self, c: f64, dir: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), dir.dim());
        Vector(self.0.iter().zip(&dir.0).map(|(a, d)| a + c * d).collect())
    }

    /// `self - c * dir`, the descent form. Kept separate from `add_scaled`
    /// so that `x - eta * g` rounds identically in every optimizer.
    pub fn sub_scaled(&self, c: f64, dir: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), dir.dim());
        Vector(self.0.iter().zip(&dir.0).map(|(a, d)| a - c * d).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Serialized as a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("matrix dimensions must be positive".into()));
        }
        if rows * cols != data.len() {
            return Err(Error::Config(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in entries.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Config("ragged matrix rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Outer product `x y^T`.
    pub fn outer(x: &Vector, y: &Vector) -> Self {
        let (rows, cols) = (x.dim(), y.dim());
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(x[i] * y[j]);
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `M v`
    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.cols, v.dim());
        Vector::from_vec(
            self.data
                .chunks(self.cols)
                .map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `M^T v`
    pub fn tr_mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.rows, v.dim());
        let mut out = vec![0.0; self.cols];
        for (i, row) in self.data.chunks(self.cols).enumerate() {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * v[i];
            }
        }
        Vector::from_vec(out)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale_rows(&mut self, factors: &[f64]) {
        for (row, f) in self.data.chunks_mut(self.cols).zip(factors) {
            row.iter_mut().for_each(|v| *v *= f);
        }
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_and_products_agree() {
        let x = Vector::from_vec(vec![1.0, 2.0]);
        let y = Vector::from_vec(vec![3.0, -1.0, 0.5]);
        let m = Matrix::outer(&x, &y);
        assert_eq!(m.to_rows(), vec![vec![3.0, -1.0, 0.5], vec![6.0, -2.0, 1.0]]);
        // (x y^T) y = x |y|^2 and (x y^T)^T x = y |x|^2
        assert_eq!(m.mul_vec(&y), x.scaled(y.norm_sq()));
        assert_eq!(m.tr_mul_vec(&x), y.scaled(x.norm_sq()));
        assert!((m.frobenius_sq() - x.norm_sq() * y.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn constructors_validate() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![f64::NAN]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert_eq!(Matrix::identity(2).to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }
}
