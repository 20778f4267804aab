//! Small dense matrices: just what the kernels and checks need.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Mat::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, &w) in out.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.add(&other.scale(-1.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(math::abs(v)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Gauss–Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Mismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if math::abs(a[(r, col)]) > math::abs(a[(pivot, col)]) {
                    pivot = r;
                }
            }
            let p = a[(pivot, col)];
            if math::abs(p) < 1e-300 {
                return Err(Error::Numeric("singular matrix".into()));
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot * n + j);
                    inv.data.swap(col * n + j, pivot * n + j);
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)];
                if factor == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] -= factor * a[(col, j)];
                    inv[(r, j)] -= factor * inv[(col, j)];
                }
            }
        }
        Ok(inv)
    }

    /// Matrix exponential by scaling and squaring with a plain Taylor sum.
    ///
    /// The argument is halved until its Frobenius norm is below 1/2, the
    /// series is summed until the term norm drops under 1e-15 of the running
    /// sum (tail < 1e-14 by the ratio bound), then the result is squared back.
    pub fn expm(&self) -> Mat {
        assert!(self.is_square(), "expm of a non-square matrix");
        let n = self.rows;
        let norm = self.frobenius_norm();
        let mut squarings = 0u32;
        let mut scale = 1.0;
        while norm * scale > 0.5 {
            scale *= 0.5;
            squarings += 1;
        }
        let a = self.scale(scale);
        let mut sum = Mat::identity(n);
        let mut term = Mat::identity(n);
        for k in 1..=60u32 {
            term = term.matmul(&a).scale(1.0 / k as f64);
            sum = sum.add(&term);
            if term.frobenius_norm() <= 1e-15 * sum.frobenius_norm().max(1.0) {
                break;
            }
        }
        let mut result = sum;
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }

    /// Lower Cholesky factor of a symmetric PSD matrix.
    ///
    /// Pivots within `tol` of zero are treated as exactly zero so that
    /// semidefinite matrices (e.g. a Gram row pinned at the origin) factor;
    /// a pivot below `-tol` reports failure.
    pub fn cholesky_psd(&self, tol: f64) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Mismatch("cholesky of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d > tol {
                let root = math::sqrt(d);
                l[(j, j)] = root;
                for i in j + 1..n {
                    let mut s = self[(i, j)];
                    for k in 0..j {
                        s -= l[(i, k)] * l[(j, k)];
                    }
                    l[(i, j)] = s / root;
                }
            } else if d >= -tol {
                // Zero pivot: column stays zero (semidefinite direction).
                l[(j, j)] = 0.0;
            } else {
                return Err(Error::Numeric("matrix is not positive semidefinite".into()));
            }
        }
        Ok(l)
    }

    /// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations,
    /// ascending order.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            let scale = a.frobenius_norm().max(1e-300);
            if off <= 1e-28 * scale * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if math::abs(apq) < 1e-300 {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + math::sqrt(1.0 + theta * theta))
                    } else {
                        -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                    };
                    let c = 1.0 / math::sqrt(1.0 + t * t);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}
