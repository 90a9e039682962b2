//! Small dense linear algebra: minors, compound matrices, singular values,
//! symmetric eigenproblems and damped least squares.
//!
//! Matrices here are tiny (at most a handful of rows, a dozen columns), so
//! everything is written for clarity and accuracy rather than blocking.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
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

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
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

    pub fn scaled(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// Gram matrix `A A^T`.
    pub fn gram_rows(&self) -> Mat {
        let mut g = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Submatrix on the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        let mut m = Mat::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled to avoid overflow and underflow.
pub fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * libm::sqrt(s)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Determinant by cofactor expansion for `k <= 3`, partial-pivot elimination above.
pub fn det(m: &Mat) -> f64 {
    assert_eq!(m.rows, m.cols);
    match m.rows {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        n => {
            let mut a = m.clone();
            let mut d = 1.0;
            for c in 0..n {
                let piv = (c..n)
                    .max_by(|&i, &j| a[(i, c)].abs().partial_cmp(&a[(j, c)].abs()).unwrap())
                    .unwrap();
                if a[(piv, c)] == 0.0 {
                    return 0.0;
                }
                if piv != c {
                    for j in 0..n {
                        let t = a[(c, j)];
                        a[(c, j)] = a[(piv, j)];
                        a[(piv, j)] = t;
                    }
                    d = -d;
                }
                d *= a[(c, c)];
                for i in c + 1..n {
                    let f = a[(i, c)] / a[(c, c)];
                    for j in c..n {
                        a[(i, j)] -= f * a[(c, j)];
                    }
                }
            }
            d
        }
    }
}

/// Maximal minors of a `k x n` matrix (`k <= n`), one per column subset, in
/// lexicographic order of the subsets.
pub fn maximal_minors(a: &Mat) -> Vec<f64> {
    let rows: Vec<usize> = (0..a.rows).collect();
    combinations(a.cols, a.rows).iter().map(|cols| det(&a.select(&rows, cols))).collect()
}

/// The `(k-1)`-st compound of a `k x n` matrix restricted to maximal row sets:
/// row `j` lists the `(k-1)`-minors of `a` with row `j` deleted.
pub fn deleted_row_minors(a: &Mat) -> Mat {
    let k = a.rows;
    assert!(k >= 1);
    let cols = combinations(a.cols, k - 1);
    let mut out = Mat::zeros(k, cols.len());
    for j in 0..k {
        let rows: Vec<usize> = (0..k).filter(|&i| i != j).collect();
        for (c, set) in cols.iter().enumerate() {
            out[(j, c)] = det(&a.select(&rows, set));
        }
    }
    out
}

/// Largest eigenvalue and vector routines for symmetric matrices (cyclic Jacobi).
/// Returns eigenvalues in ascending order together with the eigenvectors as
/// columns of the returned matrix.
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(core::cmp::Ordering::Equal));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, c)] = v[(k, i)];
        }
    }
    (vals, vecs)
}

/// Largest singular value, through the eigenvalues of the smaller Gram matrix.
pub fn sigma_max(a: &Mat) -> f64 {
    if a.rows == 0 || a.cols == 0 {
        return 0.0;
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let s = a.scaled(1.0 / scale);
    let g = if s.rows <= s.cols { s.gram_rows() } else { s.transpose().gram_rows() };
    let (vals, _) = sym_eigen(&g);
    scale * libm::sqrt(vals.last().copied().unwrap_or(0.0).max(0.0))
}

/// Smallest of the `k` singular values of a `k x n` matrix with `k <= n`.
///
/// Computed as `|C_k(A)| / sigma_max(C_{k-1}(A))`, where `C_j` is the `j`-th
/// compound matrix; the numerator is the product of all singular values and the
/// denominator the product of the largest `k - 1`. This keeps full relative
/// accuracy on graded matrices where Gram-based methods lose the small value,
/// and it is exactly zero whenever every maximal minor is.
pub fn sigma_min(a: &Mat) -> Result<f64> {
    if a.rows > a.cols {
        return Err(Error::TooManyRows { rows: a.rows, cols: a.cols });
    }
    if a.rows == 0 {
        return Ok(0.0);
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s = a.scaled(1.0 / scale);
    let top = norm(&maximal_minors(&s));
    if top == 0.0 {
        return Ok(0.0);
    }
    if s.rows == 1 {
        return Ok(scale * top);
    }
    let lower = sigma_max(&deleted_row_minors(&s));
    if lower == 0.0 {
        return Ok(0.0);
    }
    Ok(scale * top / lower)
}

/// Unit vector `phi` attaining `min |A^T phi|`: eigenvector of the smallest
/// eigenvalue of `A A^T`. The sign is chosen to agree with `prev` when given.
pub fn min_left_singular_vector(a: &Mat, prev: Option<&[f64]>) -> Vec<f64> {
    let k = a.rows;
    let scale = a.max_abs();
    let mut phi = if scale == 0.0 {
        let mut e = vec![0.0; k];
        e[0] = 1.0;
        e
    } else {
        let (_, vecs) = sym_eigen(&a.scaled(1.0 / scale).gram_rows());
        (0..k).map(|i| vecs[(i, 0)]).collect::<Vec<_>>()
    };
    if let Some(p) = prev {
        if dot(p, &phi) < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
    }
    phi
}

/// All singular values (descending) by one-sided Jacobi on the rows.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let mut m = if a.rows <= a.cols { a.clone() } else { a.transpose() };
    let k = m.rows;
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = dot(m.row(i), m.row(i));
                let beta = dot(m.row(j), m.row(j));
                let gamma = dot(m.row(i), m.row(j));
                if gamma == 0.0 || gamma.abs() <= 1e-300 + f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for col in 0..m.cols {
                    let a_ = m[(i, col)];
                    let b_ = m[(j, col)];
                    m[(i, col)] = c * a_ - s * b_;
                    m[(j, col)] = s * a_ + c * b_;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = (0..k).map(|i| norm(m.row(i))).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

/// Orthonormal basis of the complement of the unit vector `u`, as the columns
/// of an `n x (n-1)` matrix. Built from the Householder reflector that maps `u`
/// to `e_n`.
pub fn complement_basis(u: &[f64]) -> Mat {
    let n = u.len();
    let h = householder_to_last(u);
    // H is symmetric and H u = e_n, so the first n-1 columns of H span u^perp.
    let mut b = Mat::zeros(n, n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n - 1 {
            b[(i, j)] = h[(i, j)];
        }
    }
    b
}

/// Householder reflector `H` with `H u = e_n` for a unit vector `u`.
pub fn householder_to_last(u: &[f64]) -> Mat {
    let n = u.len();
    let mut w: Vec<f64> = u.to_vec();
    w[n - 1] -= 1.0;
    let ww = dot(&w, &w);
    let mut h = Mat::identity(n);
    if ww <= 1e-30 {
        return h;
    }
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] -= 2.0 * w[i] * w[j] / ww;
        }
    }
    h
}

/// Solves `min |J d + r|^2 + |D d|^2` for diagonal `D` by Householder QR of the
/// stacked matrix `[J; D]`. Returns `d`, or `None` if the system is singular.
pub fn damped_least_squares(j: &Mat, r: &[f64], diag: &[f64]) -> Option<Vec<f64>> {
    let m = j.rows;
    let n = j.cols;
    let rows = m + n;
    let mut a = Mat::zeros(rows, n);
    let mut b = vec![0.0; rows];
    for i in 0..m {
        a.row_mut(i).copy_from_slice(j.row(i));
        b[i] = -r[i];
    }
    for k in 0..n {
        a[(m + k, k)] = diag[k];
    }
    least_squares_in_place(&mut a, &mut b)
}

/// Minimum-residual solution of `A x = b` for a tall or square `A` via
/// Householder QR with column norms checked for rank deficiency.
pub fn least_squares(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let mut a = a.clone();
    let mut b = b.to_vec();
    least_squares_in_place(&mut a, &mut b)
}

fn least_squares_in_place(a: &mut Mat, b: &mut [f64]) -> Option<Vec<f64>> {
    let rows = a.rows;
    let n = a.cols;
    let scale = a.max_abs();
    if scale == 0.0 || rows < n {
        return None;
    }
    for k in 0..n {
        let col: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
        let alpha = norm(&col);
        if alpha == 0.0 {
            continue;
        }
        let alpha = if a[(k, k)] > 0.0 { -alpha } else { alpha };
        let mut v = col;
        v[0] -= alpha;
        let vv = dot(&v, &v);
        if vv == 0.0 {
            continue;
        }
        for c in k..n {
            let s: f64 = (k..rows).map(|i| v[i - k] * a[(i, c)]).sum::<f64>() * 2.0 / vv;
            for i in k..rows {
                a[(i, c)] -= s * v[i - k];
            }
        }
        let s: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vv;
        for i in k..rows {
            b[i] -= s * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let d = a[(k, k)];
        if d.abs() <= 1e-300 || d.abs() <= f64::EPSILON * 1e-3 * scale {
            return None;
        }
        let s: f64 = (k + 1..n).map(|c| a[(k, c)] * x[c]).sum();
        x[k] = (b[k] - s) / d;
    }
    Some(x)
}

/// Minimum-norm solution of an underdetermined or square system `A x = b`
/// (rows <= cols) through `x = A^T (A A^T)^{-1} b` solved by QR of `A^T`.
pub fn min_norm_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let at = a.transpose();
    // A^T = Q R  =>  A = R^T Q^T, x = Q R^{-T} b
    let m = a.rows;
    let n = a.cols;
    if m > n {
        return least_squares(a, b);
    }
    let mut q = at.clone();
    // modified Gram-Schmidt twice for stability on these tiny systems
    let mut r = Mat::zeros(m, m);
    for k in 0..m {
        for _pass in 0..2 {
            for j in 0..k {
                let s: f64 = (0..n).map(|i| q[(i, j)] * q[(i, k)]).sum();
                r[(j, k)] += s;
                for i in 0..n {
                    q[(i, k)] -= s * q[(i, j)];
                }
            }
        }
        let col: Vec<f64> = (0..n).map(|i| q[(i, k)]).collect();
        let nk = norm(&col);
        if nk <= 1e-300 {
            return None;
        }
        r[(k, k)] = nk;
        for i in 0..n {
            q[(i, k)] /= nk;
        }
    }
    // solve R^T z = b (forward substitution)
    let mut z = vec![0.0; m];
    for k in 0..m {
        let s: f64 = (0..k).map(|j| r[(j, k)] * z[j]).sum();
        z[k] = (b[k] - s) / r[(k, k)];
    }
    Some((0..n).map(|i| (0..m).map(|k| q[(i, k)] * z[k]).sum()).collect())
}
