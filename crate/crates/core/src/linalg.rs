//! Small dense matrices and the gate algebra shared by the scalar and
//! state-tracking code paths.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// Row-major dense `f64` matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec: {rows}x{cols} needs {} values", rows * cols);
        Self { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · rhs`, accumulated in ascending inner-index order.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul: {}x{} · {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Product of a non-empty chain of matrices, evaluated left to right.
    pub fn chain(factors: &[&Mat]) -> Mat {
        let (first, rest) = factors.split_first().expect("empty matrix chain");
        rest.iter().fold((*first).clone(), |acc, m| acc.matmul(m))
    }

    pub fn add_assign(&mut self, rhs: &Mat) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// Writes `block` into `self` with its top-left corner at `(row0, col0)`.
    pub fn set_block(&mut self, row0: usize, col0: usize, block: &Mat) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(row0 + i, col0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Algebra of gate values: plain scalars, or small matrices in the
/// state-tracking extension where a Source is `J_S×J_T`, a Transition
/// `J_T×J_T` and a Mark `J_T×J_M`.
///
/// Path products are formed left to right (`source · transition · … · mark`).
pub trait Gate: Clone + fmt::Debug + Send + Sync {
    fn zeros(rows: usize, cols: usize) -> Self;
    fn dims(&self) -> (usize, usize);
    /// `self · next`.
    fn compose(&self, next: &Self) -> Self;
    fn accumulate(&mut self, other: &Self);
}

impl Gate for f64 {
    #[inline]
    fn zeros(_: usize, _: usize) -> Self {
        0.0
    }
    #[inline]
    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }
    #[inline]
    fn compose(&self, next: &Self) -> Self {
        self * next
    }
    #[inline]
    fn accumulate(&mut self, other: &Self) {
        *self += other;
    }
}

impl Gate for Mat {
    fn zeros(rows: usize, cols: usize) -> Self {
        Mat::zeros(rows, cols)
    }
    fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn compose(&self, next: &Self) -> Self {
        self.matmul(next)
    }
    fn accumulate(&mut self, other: &Self) {
        self.add_assign(other)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest singular value via power iteration on `MᵀM`.
pub fn spectral_norm(m: &Mat, iters: usize) -> f64 {
    let n = m.cols();
    if n == 0 || m.rows() == 0 {
        return 0.0;
    }
    let mtm = m.transpose().matmul(m);
    // Start off-axis so the iteration is not trapped in an invariant subspace.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let norm = dot(&x, &x).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let y: Vec<f64> = (0..n).map(|i| dot(mtm.row(i), &x)).collect();
        lambda = dot(&x, &y);
        x = y;
    }
    lambda.max(0.0).sqrt()
}
