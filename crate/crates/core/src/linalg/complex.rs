//! Small dense complex matrices for states and measurement effects.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use super::dense::Mat;
use crate::real::Real;

#[derive(Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: fmt::Debug> fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = &self.data[i * self.cols + j];
                write!(f, " ({:?}, {:?})", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds from row-major entries; the entry count must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Option<Self> {
        (data.len() == rows * cols).then_some(CMatrix { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        CMatrix {
            rows,
            cols,
            data: data.iter().map(|&x| Complex::new(T::of(x), T::zero())).collect(),
        }
    }

    pub fn diagonal(diag: &[Complex<T>]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// `|v><w|`
    pub fn outer(v: &[Complex<T>], w: &[Complex<T>]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
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

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex<T> {
        assert_eq!((self.cols, self.rows), (other.rows, other.cols));
        let mut s = Complex::zero();
        for i in 0..self.rows {
            for k in 0..self.cols {
                s = s + self[(i, k)] * other[(k, i)];
            }
        }
        s
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other[(k, j)];
                    out[(i, j)] = out[(i, j)] + a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Tensor (Kronecker) product.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.is_square()
            && self
                .adjoint()
                .matmul(self)
                .max_abs_diff(&Self::identity(self.rows))
                <= tol
    }

    /// Hermitian, idempotent.
    pub fn is_projector(&self, tol: T) -> bool {
        self.is_hermitian(tol) && self.matmul(self).max_abs_diff(self) <= tol
    }

    pub fn is_psd(&self, tol: T) -> bool {
        self.is_hermitian(tol)
            && self
                .hermitian_eigenvalues()
                .first()
                .map_or(true, |&l| l >= -tol)
    }

    /// Real symmetric embedding `[[Re, -Im], [Im, Re]]`.
    pub fn real_embedding(&self) -> Mat<T> {
        let n = self.rows;
        let m = self.cols;
        Mat::from_fn(2 * n, 2 * m, |i, j| {
            let z = self[(i % n, j % m)];
            match (i < n, j < m) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Computed on the real
    /// embedding, where each eigenvalue appears twice.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let doubled = self.real_embedding().sym_eigenvalues();
        doubled.into_iter().step_by(2).collect()
    }

    /// `exp(i H)` for Hermitian `H`, by scaling and squaring a Taylor series.
    pub fn exp_i_hermitian(&self) -> Self {
        let n = self.rows;
        let norm = self.max_abs() * T::of_usize(n);
        let mut squarings = 0u32;
        let mut s = T::one();
        while norm * s > T::half() {
            s = s * T::half();
            squarings += 1;
        }
        let a = self.scale(Complex::new(T::zero(), s));
        let mut term = Self::identity(n);
        let mut sum = Self::identity(n);
        for k in 1..=18 {
            term = term.matmul(&a).scale_real(T::one() / T::of_usize(k));
            sum = &sum + &term;
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<'a, T: Real> Add for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<'a, T: Real> Sub for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<'a, T: Real> Mul for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        self.matmul(rhs)
    }
}

/// Tensor product of two matrices.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kron(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sx() -> CMatrix<f64> {
        CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }
    fn sz() -> CMatrix<f64> {
        CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    #[test]
    fn kron_identities() {
        let i2 = CMatrix::<f64>::identity(2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4));
        let zz = kron(&sz(), &sz());
        let diag: Vec<f64> = (0..4).map(|i| zz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(zz.max_abs_diff(&CMatrix::diagonal(&zz_diag())), 0.0);
    }

    fn zz_diag() -> Vec<Complex<f64>> {
        [1.0, -1.0, -1.0, 1.0].iter().map(|&x| Complex::new(x, 0.0)).collect()
    }

    #[test]
    fn kron_block_entry() {
        // sigma_x (x) sigma_z: the upper-right 2x2 block is sigma_z, so entry (0,2) = 1.
        let m = kron(&sx(), &sz());
        assert_eq!(m[(0, 2)], Complex::new(1.0, 0.0));
        assert_eq!(m[(1, 3)], Complex::new(-1.0, 0.0));
        assert_eq!(m[(0, 0)], Complex::new(0.0, 0.0));
    }

    #[test]
    fn predicates() {
        let p = CMatrix::<f64>::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(p.is_projector(1e-10));
        assert!(p.is_psd(1e-10));
        assert!(sx().is_unitary(1e-10));
        assert!(!sz().is_psd(1e-10));
        let y = CMatrix::from_vec(
            2,
            2,
            vec![
                Complex::new(0.0, 0.0),
                Complex::new(0.0, -1.0),
                Complex::new(0.0, 1.0),
                Complex::new(0.0, 0.0),
            ],
        )
        .unwrap();
        assert!(y.is_hermitian(1e-12));
        let ev: Vec<f64> = y.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_of_pauli() {
        // exp(i t X) = cos t I + i sin t X
        let t = 0.7;
        let u = sx().scale_real(t).exp_i_hermitian();
        assert!(u.is_unitary(1e-12));
        assert!((u[(0, 0)].re - t.cos()).abs() < 1e-13);
        assert!((u[(0, 1)].im - t.sin()).abs() < 1e-13);
    }
}
