//! Dense real matrices, row-major, sized for the SDP solver's blocks and Schur
//! complements.

use std::ops::{Index, IndexMut};

use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Dot product with four independent accumulators so the loop pipelines.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Mat { rows, cols, data }
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

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != T::zero() {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        out
    }

    /// `self * other^T`, cache friendly for row-major storage.
    pub fn matmul_t(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "inner dimensions differ");
        Self::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, s: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(s, &other.data, &mut self.data);
    }

    fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Frobenius inner product `tr(A^T B)`.
    pub fn inner(&self, other: &Self) -> T {
        dot(&self.data, &other.data)
    }

    pub fn norm_fro(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &x| if x.abs() > m { x.abs() } else { m })
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `(A + A^T) / 2`
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * T::half()
        })
    }

    pub fn symmetrize_in_place(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (self[(i, j)] + self[(j, i)]) * T::half();
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Lower Cholesky factor `L` with `A = L L^T`; `None` unless positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        assert!(self.is_square(), "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = self[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = b` for a lower Cholesky factor `self`.
    pub fn cholesky_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.row(i)[..i], &y[..i]);
            y[i] = s / self[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self[(k, i)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        y
    }

    /// Inverse of a lower triangular matrix.
    pub fn lower_inverse(&self) -> Self {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = T::one() / self[(j, j)];
            for i in (j + 1)..n {
                let mut s = T::zero();
                for k in j..i {
                    s += self[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = -s / self[(i, i)];
            }
        }
        inv
    }

    /// Inverse of `L L^T` given its lower Cholesky factor `self`.
    pub fn cholesky_inverse(&self) -> Self {
        let linv = self.lower_inverse();
        // (L L^T)^{-1} = L^{-T} L^{-1}
        let lt = linv.transpose();
        lt.matmul_t(&lt)
    }

    /// Eigenvalues of a symmetric matrix in ascending order.
    pub fn sym_eigenvalues(&self) -> Vec<T> {
        sym_eigen(self, false).0
    }

    /// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
    /// matrix whose columns are the matching orthonormal eigenvectors.
    pub fn sym_eigen(&self) -> (Vec<T>, Self) {
        let (vals, vecs) = sym_eigen(self, true);
        (vals, vecs.expect("vectors requested"))
    }

    pub fn min_eigenvalue(&self) -> T {
        self.sym_eigenvalues()
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder tridiagonalisation followed by implicit QL (the classic
/// tred2/tql2 pair).
fn sym_eigen<T: Real>(a: &Mat<T>, want_vectors: bool) -> (Vec<T>, Option<Mat<T>>) {
    assert!(a.is_square(), "eigenvalues need a square matrix");
    let n = a.rows();
    if n == 0 {
        return (Vec::new(), want_vectors.then(|| Mat::zeros(0, 0)));
    }
    // v holds the working matrix; its columns become eigenvectors.
    let mut v = a.symmetrized();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();

    // QL iterations on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::two() * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter > 60 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }

    // Sort ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let vals: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let vecs = want_vectors.then(|| Mat::from_fn(n, n, |r, c| v[(r, order[c])]));
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Mat<f64> {
        let b = Mat::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + (i == j) as u8 as f64);
        b.matmul_t(&b).add(&Mat::identity(n))
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let a = spd(6);
        let l = a.cholesky().unwrap();
        let back = l.matmul_t(&l);
        assert!(back.sub(&a).max_abs() < 1e-12);
        let b: Vec<f64> = (0..6).map(|i| i as f64 + 1.0).collect();
        let x = l.cholesky_solve(&b);
        let ax: Vec<f64> = (0..6).map(|i| dot(a.row(i), &x)).collect();
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let inv = l.cholesky_inverse();
        assert!(inv.matmul(&a).sub(&Mat::identity(6)).max_abs() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn eigen_of_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = Mat::from_rows(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let ev: Vec<f64> = a.sym_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_decomposition_reconstructs() {
        let a = spd(7).sub(&Mat::scaled_identity(7, 10.0));
        let (vals, vecs) = a.sym_eigen();
        let d = Mat::from_fn(7, 7, |i, j| if i == j { vals[i] } else { 0.0 });
        let back = vecs.matmul(&d).matmul_t(&vecs);
        assert!(back.sub(&a).max_abs() < 1e-10);
        assert!(vecs.transpose().matmul(&vecs).sub(&Mat::identity(7)).max_abs() < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!((vals.iter().sum::<f64>() - a.trace()).abs() < 1e-10);
    }

    #[test]
    fn eigen_handles_diagonal_and_tiny() {
        let a = Mat::from_rows(3, 3, vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(a.sym_eigenvalues(), vec![-1.0, 2.0, 3.0]);
        let one = Mat::from_rows(1, 1, vec![5.0f32]);
        assert_eq!(one.sym_eigenvalues(), vec![5.0]);
    }
}
