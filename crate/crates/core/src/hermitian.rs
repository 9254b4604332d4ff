//! Dense Hermitian matrices.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::scalar::Scalar;

/// Rows at or above this size are multiplied in parallel.
const PAR_MATVEC_MIN: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> HermitianMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    /// Row-major data; the upper triangle is mirrored into the lower one and
    /// the diagonal made real, so the result is Hermitian bit-for-bit.
    pub fn from_upper(n: usize, mut data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != n * n {
            return Err(LabError::Dimension {
                expected: n * n,
                got: data.len(),
            });
        }
        for i in 0..n {
            data[i * n + i].im = T::zero();
            for j in (i + 1)..n {
                data[j * n + i] = data[i * n + j].conj();
            }
        }
        Ok(HermitianMatrix { n, data })
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex::new(d, T::zero());
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.n).all(|i| (i..self.n).all(|j| self.get(i, j) == self.get(j, i).conj()))
    }

    /// `y = A x`. Each row is an independent serial dot product, so the result
    /// does not depend on the parallel schedule.
    pub fn matvec(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let row_dot = |row: &[Complex<T>]| {
            row.iter()
                .zip(x)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
        };
        if self.n >= PAR_MATVEC_MIN {
            y.par_iter_mut()
                .zip(self.data.par_chunks_exact(self.n))
                .for_each(|(yi, row)| *yi = row_dot(row));
        } else {
            for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.n)) {
                *yi = row_dot(row);
            }
        }
    }

    /// `x* A x` (real for Hermitian `A`).
    pub fn quadratic_form(&self, x: &[Complex<T>]) -> T {
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.n];
        self.matvec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Entrywise multiply by `scale` (real).
    pub fn scaled(&self, scale: T) -> Self {
        HermitianMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * scale).collect(),
        }
    }
}
