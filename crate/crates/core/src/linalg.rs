// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense kernels for `q × q` symmetric systems, `q` in the low hundreds.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::LengthMismatch { left: row.len(), right: n });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|v| v * factor).collect() }
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self[(i, i)] += value;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Copies the upper triangle onto the lower one so `self == selfᵀ` bitwise.
    pub fn symmetrize_from_upper(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                self.data[i * self.n + j] = self.data[j * self.n + i];
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    min_pivot: f64,
    max_pivot: f64,
}

impl Cholesky {
    /// Factors a symmetric matrix, failing when a pivot is not safely positive.
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.dim();
        let mut lower = vec![0.0; n * n];
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
        let floor = scale * n as f64 * f64::EPSILON;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0_f64;
        for j in 0..n {
            let row_j = j * n;
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= lower[row_j + k] * lower[row_j + k];
            }
            if !(diag > floor) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let pivot = diag.sqrt();
            min_pivot = min_pivot.min(pivot);
            max_pivot = max_pivot.max(pivot);
            lower[row_j + j] = pivot;
            for i in (j + 1)..n {
                let row_i = i * n;
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= lower[row_i + k] * lower[row_j + k];
                }
                lower[row_i + j] = s / pivot;
            }
        }
        if n == 0 {
            min_pivot = 1.0;
            max_pivot = 1.0;
        }
        Ok(Self { n, lower, min_pivot, max_pivot })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Rough condition estimate from the pivot spread.
    pub fn condition_estimate(&self) -> f64 {
        (self.max_pivot / self.min_pivot).powi(2)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s = y[i] - dot(row, &y[..i]);
            y[i] = s / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        y
    }
}

/// Pivot-based condition estimate used in error reports when factoring fails.
pub fn diagonal_condition(a: &Matrix) -> f64 {
    let diag: Vec<f64> = (0..a.dim()).map(|i| a[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0_f64, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
