//! Small dense square matrices for p×p information and covariance work.
//!
//! `p` is the covariate dimension (single digits to a few dozen), so
//! everything here is a straightforward row-major implementation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from `dim * dim` row-major entries.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    /// `a aᵀ`.
    pub fn outer(a: &[f64]) -> Self {
        let mut m = Matrix::zeros(a.len());
        m.add_outer(1.0, a);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_row_major(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `self += scale * a aᵀ`
    #[inline]
    pub fn add_outer(&mut self, scale: f64, a: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let ai = scale * a[i];
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, aj) in row.iter_mut().zip(a) {
                *r += ai * aj;
            }
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Matrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * scale).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        (0..self.dim)
            .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol * scale))
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Cholesky factor of a symmetric positive-definite matrix.
    ///
    /// A pivot is rejected when it is not larger than `rel_tol` times the
    /// matching entry of `scale` (or the original diagonal when `scale` is
    /// `None`).
    pub fn cholesky(&self, rel_tol: f64, scale: Option<&[f64]>) -> Result<Cholesky> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut pivot = self[(j, j)];
            for k in 0..j {
                pivot -= l[j * d + k] * l[j * d + k];
            }
            let reference = scale.map_or(self[(j, j)].abs(), |s| s[j].abs());
            if !(pivot > rel_tol * reference) || !pivot.is_finite() || pivot <= 0.0 {
                return Err(Error::Singular { column: j, pivot });
            }
            let ljj = libm::sqrt(pivot);
            l[j * d + j] = ljj;
            for i in j + 1..d {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Ok(Cholesky { dim: d, lower: l })
    }

    /// Symmetric eigenvalues by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = self.clone();
        a.symmetrize();
        for _sweep in 0..100 {
            let off: f64 = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
            if off <= 1e-30 * scale * scale {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev = a.diag();
        ev.sort_by(|x, y| x.total_cmp(y));
        ev
    }

    /// True when the smallest eigenvalue is at least `-tol * max(1, trace)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let ev = self.symmetric_eigenvalues();
        let floor = -tol * self.trace().abs().max(1.0);
        ev.first().map_or(true, |m| *m >= floor)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Row-major lower-triangular factor.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= l[k * d + i] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        y
    }

    /// `A⁻¹ B`, column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        let mut col = vec![0.0; d];
        for j in 0..d {
            for i in 0..d {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..d {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// `A⁻¹ B A⁻¹` for symmetric `B`, symmetrized.
    pub fn sandwich(&self, meat: &Matrix) -> Matrix {
        let left = self.solve_matrix(meat);
        let mut out = self.solve_matrix(&left.transpose());
        out.symmetrize();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Matrix::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let ch = a.cholesky(1e-12, None).unwrap();
        let x = ch.solve(&[1.0, 2.0]);
        // exact: (1/11, 7/11)
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        assert!(matches!(
            a.cholesky(1e-12, None),
            Err(Error::Singular { column: 1, .. })
        ));
        assert!(Matrix::zeros(2).cholesky(1e-12, None).is_err());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = Matrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]).unwrap();
        let ev = a.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        assert!((ev[2] - 5.0).abs() < 1e-12);
        let indefinite = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(!indefinite.is_psd(1e-10));
    }

    #[test]
    fn sandwich_scalar() {
        let psi = Matrix::from_rows(&[&[2.0]]).unwrap();
        let gamma = Matrix::from_rows(&[&[1.0]]).unwrap();
        let out = psi.cholesky(1e-12, None).unwrap().sandwich(&gamma);
        assert!((out[(0, 0)] - 0.25).abs() < 1e-15);
    }
}
