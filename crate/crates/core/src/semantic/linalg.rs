//! Just enough dense and sparse linear algebra for truncated SVD.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::SparseVector;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Standard normal entries from a seeded generator.
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(rows, cols);
        let mut spare: Option<f64> = None;
        for x in &mut m.data {
            *x = match spare.take() {
                Some(z) => z,
                None => {
                    // Box-Muller
                    let u1: f64 = 1.0 - rng.random::<f64>();
                    let u2: f64 = rng.random::<f64>();
                    let r = libm::sqrt(-2.0 * libm::log(u1));
                    let theta = 2.0 * core::f64::consts::PI * u2;
                    spare = Some(r * libm::sin(theta));
                    r * libm::cos(theta)
                }
            };
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&mut self, k: usize) {
        self.cols = self.cols.min(k);
        self.data.truncate(self.rows * self.cols);
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == 0.0 {
                    continue;
                }
                let a = self.col(k);
                for (o, &x) in out.col_mut(j).iter_mut().zip(a) {
                    *o += x * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| if x.abs() > m { x.abs() } else { m })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sparse matrix stored by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    rows: usize,
    columns: Vec<SparseVector>,
}

impl CscMatrix {
    pub fn from_columns(rows: usize, columns: Vec<SparseVector>) -> Self {
        debug_assert!(columns.iter().all(|c| c.iter().all(|(i, _)| i < rows)));
        Self { rows, columns }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let columns = (0..m.cols())
            .map(|j| SparseVector(m.col(j).iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, &x)| (i, x)).collect()))
            .collect();
        Self { rows: m.rows(), columns }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.columns.len());
        for (j, c) in self.columns.iter().enumerate() {
            for (i, x) in c.iter() {
                m[(i, j)] = x;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &SparseVector {
        &self.columns[j]
    }

    /// `self * x` for dense `x` with `cols()` rows.
    pub fn mul_dense(&self, x: &Matrix) -> Matrix {
        assert_eq!(self.cols(), x.rows());
        let mut out = Matrix::zeros(self.rows, x.cols());
        for t in 0..x.cols() {
            let xt = x.col(t);
            let o = out.col_mut(t);
            for (j, c) in self.columns.iter().enumerate() {
                let s = xt[j];
                if s == 0.0 {
                    continue;
                }
                for (i, v) in c.iter() {
                    o[i] += v * s;
                }
            }
        }
        out
    }

    /// `self^T * y` for dense `y` with `rows()` rows.
    pub fn tmul_dense(&self, y: &Matrix) -> Matrix {
        assert_eq!(self.rows, y.rows());
        Matrix::from_fn(self.cols(), y.cols(), |j, t| self.columns[j].dot_dense(y.col(t)))
    }
}

/// Modified Gram-Schmidt with one reorthogonalisation pass. Columns that are
/// numerically dependent on earlier ones become zero.
pub fn orthonormalize_columns(m: &mut Matrix) {
    let rows = m.rows();
    for j in 0..m.cols() {
        let original = libm::sqrt(dot(m.col(j), m.col(j)));
        if original == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for i in 0..j {
                let (head, tail) = m.data.split_at_mut(j * rows);
                let qi = &head[i * rows..(i + 1) * rows];
                let aj = &mut tail[..rows];
                let r = dot(qi, aj);
                if r != 0.0 {
                    for (a, q) in aj.iter_mut().zip(qi) {
                        *a -= r * q;
                    }
                }
            }
        }
        let norm = libm::sqrt(dot(m.col(j), m.col(j)));
        let col = m.col_mut(j);
        if norm <= 1e-12 * original {
            col.iter_mut().for_each(|x| *x = 0.0);
        } else {
            col.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Thin SVD `m = u * diag(sigma) * v^T` of a tall matrix (`rows >= cols`) by
/// one-sided Jacobi rotations. Singular values come out sorted descending.
pub fn jacobi_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let n = m.cols();
    let rows = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(a.col(i), a.col(i));
                let beta = dot(a.col(j), a.col(j));
                let gamma = dot(a.col(i), a.col(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut a, i, j, c, s, rows);
                rotate(&mut v, i, j, c, s, n);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| libm::sqrt(dot(a.col(j), a.col(j)))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
    let u = Matrix::from_fn(rows, n, |r, c| {
        let src = order[c];
        if sigma[src] > 0.0 {
            a[(r, src)] / sigma[src]
        } else {
            0.0
        }
    });
    let v_sorted = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    sigma = order.iter().map(|&j| sigma[j]).collect();
    (u, sigma, v_sorted)
}

fn rotate(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64, rows: usize) {
    let (head, tail) = m.data.split_at_mut(j * rows);
    let ci = &mut head[i * rows..(i + 1) * rows];
    let cj = &mut tail[..rows];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}
