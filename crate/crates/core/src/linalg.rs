//! Small dense linear algebra: a row-major matrix, a cyclic Jacobi
//! eigensolver for symmetric matrices, and Gram-Schmidt completion.
//!
//! Dimensions in this crate are a few hundred at most, so everything here is
//! plain `O(K^3)` code without blocking.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Components with magnitude at or below this are treated as zero when
/// choosing an eigenvector's sign.
pub const SIGN_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors. Returns `None` if the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Builds a square-or-not matrix whose `j`th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<T>]) -> Option<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return None;
        }
        Some(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn diagonal(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mat_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v`.
    pub fn transpose_mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "transpose_mat_vec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthonormality_residual(&self) -> T {
        let gram = self.transpose().matmul(self);
        gram.sub(&Self::identity(self.cols)).frobenius_norm()
    }

    /// `‖M − Mᵀ‖_F`.
    pub fn symmetry_residual(&self) -> T {
        self.sub(&self.transpose()).frobenius_norm()
    }

    /// `M diag(d) Mᵀ`.
    pub fn congruence_diag(&self, d: &[T]) -> Self {
        assert_eq!(self.cols, d.len());
        let scaled = Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[j]);
        scaled.matmul(&self.transpose())
    }

    /// Reverses the column order.
    pub fn reversed_columns(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, self.cols - 1 - j)])
    }

    /// Makes the first component with `|x| > 1e-12` of every column positive.
    pub fn normalize_column_signs(&mut self) {
        let zero = T::lit(SIGN_ZERO);
        for j in 0..self.cols {
            let lead = (0..self.rows)
                .map(|i| self[(i, j)])
                .find(|x| x.abs() > zero);
            if matches!(lead, Some(x) if x < T::zero()) {
                for i in 0..self.rows {
                    self[(i, j)] = -self[(i, j)];
                }
            }
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in descending order.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors as columns, in the order of `values`, with
    /// column signs normalized.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// `max |λ| / min |λ|`, infinite for singular input.
    pub fn condition_number(&self) -> T {
        let (lo, hi) = self
            .values
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), &v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
        if lo == T::zero() {
            T::infinity()
        } else {
            hi / lo
        }
    }

    /// `Q diag(1/λ) Qᵀ`. Caller checks definiteness.
    pub fn inverse(&self) -> Matrix<T> {
        let inv: Vec<T> = self.values.iter().map(|&v| T::one() / v).collect();
        self.vectors.congruence_diag(&inv)
    }
}

/// Cyclic Jacobi eigensolver. Only the upper triangle's symmetric part matters;
/// the input is symmetrized first.
pub fn symmetric_eigen<T: Scalar>(m: &Matrix<T>) -> SymmetricEigen<T> {
    assert!(m.is_square(), "symmetric_eigen needs a square matrix");
    let n = m.rows();
    let half = T::lit(0.5);
    let mut a = Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) * half);
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    if scale > T::zero() {
        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a[(p, q)] * a[(p, q)];
                }
            }
            if off.sqrt() <= T::epsilon() * scale * T::lit(0.1) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
                    let t = {
                        let r = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                        if theta < T::zero() {
                            -r
                        } else {
                            r
                        }
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
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
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep their original order
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .partial_cmp(&a[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    vectors.normalize_column_signs();
    SymmetricEigen { values, vectors }
}

/// Orthonormalizes `seeds` in order (two passes of modified Gram-Schmidt) and
/// completes the result to an orthonormal basis of `R^dim` using standard basis
/// vectors `e_1, e_2, …` in order, skipping those already in the span.
///
/// Returns the index of the first seed that is (numerically) dependent on its
/// predecessors as the error.
pub fn gram_schmidt_complete<T: Scalar>(seeds: &[Vec<T>], dim: usize) -> Result<Matrix<T>, usize> {
    let dependent = T::lit(1e-8);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(dim);
    for (idx, s) in seeds.iter().enumerate() {
        match orthogonalize(s, &basis, dependent) {
            Some(u) => basis.push(u),
            None => return Err(idx),
        }
    }
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut candidate = vec![T::zero(); dim];
        candidate[e] = T::one();
        if let Some(u) = orthogonalize(&candidate, &basis, T::lit(1e-6)) {
            basis.push(u);
        }
    }
    Ok(Matrix::from_columns(&basis).expect("equal-length basis vectors"))
}

fn orthogonalize<T: Scalar>(v: &[T], basis: &[Vec<T>], dependent: T) -> Option<Vec<T>> {
    let n0 = norm(v);
    if n0 == T::zero() {
        return None;
    }
    let mut u: Vec<T> = v.iter().map(|&x| x / n0).collect();
    for _ in 0..2 {
        for b in basis {
            let p = dot(&u, b);
            for (ui, &bi) in u.iter_mut().zip(b) {
                *ui = *ui - p * bi;
            }
        }
    }
    let nu = norm(&u);
    if nu <= dependent {
        return None;
    }
    Some(u.into_iter().map(|x| x / nu).collect())
}
