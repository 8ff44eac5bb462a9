use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::{LchsError, Result};
use crate::scalar::{real, Cplx, Real};

/// Dense square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T: Real> {
    dim: usize,
    entries: Vec<Cplx<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = real(T::one());
        }
        m
    }

    /// Builds a matrix from a row-major entry list; fails unless `entries.len() == dim²`.
    pub fn from_entries(dim: usize, entries: Vec<Cplx<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(LchsError::Dimension("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(LchsError::Dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    /// Builds a matrix from rows; every row must have as many entries as there are rows.
    pub fn from_rows(rows: Vec<Vec<Cplx<T>>>) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(LchsError::Dimension(format!(
                "non-square input: {dim} rows but a row of length {}",
                bad.len()
            )));
        }
        Self::from_entries(dim, rows.into_iter().flatten().collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| real(T::lit(x))).collect())
                .collect(),
        )
    }

    pub fn from_diagonal(diag: &[Cplx<T>]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let d: Vec<_> = diag.iter().map(|&x| real(x)).collect();
        Self::from_diagonal(&d)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entries(&self) -> &[Cplx<T>] {
        &self.entries
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<Cplx<T>> {
        self.entries
    }

    pub fn row(&self, i: usize) -> &[Cplx<T>] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<Cplx<T>> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn map(&self, f: impl Fn(Cplx<T>) -> Cplx<T>) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, c: Cplx<T>) -> Self {
        self.map(|z| z * c)
    }

    pub fn scale_real(&self, c: T) -> Self {
        self.map(|z| z * c)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Cplx<T>, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a += c * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == zero {
                    continue;
                }
                let b_row = &other.entries[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self { dim: n, entries: out }
    }

    pub fn mul_vec(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(self.dim, v.len(), "mul_vec dimension mismatch");
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &x)| acc + a * x)
            })
            .collect()
    }

    pub fn trace(&self) -> Cplx<T> {
        (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Largest entrywise deviation from Hermitian symmetry, `max |M − M†|`.
    pub fn hermitian_defect(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> T {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).fold(T::zero(), |s, i| s + self[(i, j)].norm()))
            .fold(T::zero(), T::max)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).iter().fold(T::zero(), |s, z| s + z.norm()))
            .fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
    }

    /// Largest singular value, from the top eigenvalue of `M†M`.
    pub fn spectral_norm(&self) -> T {
        let gram = self.adjoint().matmul(self);
        let top = super::eigen::hermitian_eigenvalues(&gram)
            .last()
            .copied()
            .unwrap_or_else(T::zero);
        top.max(T::zero()).sqrt()
    }

    /// Hermitian part `(M + M†)/2`, forced exactly Hermitian.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * half;
            }
        }
        out
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Cplx<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cplx<T> {
        &self.entries[i * self.dim + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cplx<T> {
        &mut self.entries[i * self.dim + j]
    }
}

impl<'a, T: Real> Add<&'a ComplexMatrix<T>> for &'a ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn add(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<'a, T: Real> Sub<&'a ComplexMatrix<T>> for &'a ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn sub(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<'a, T: Real> Mul<&'a ComplexMatrix<T>> for &'a ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn mul(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Neg for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn neg(self) -> ComplexMatrix<T> {
        self.map(|z| -z)
    }
}

/// Euclidean norm of a complex vector.
pub fn vec_norm<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
}

/// `⟨a|b⟩`, conjugate-linear in the first argument.
pub fn vec_dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |s, (&x, &y)| s + x.conj() * y)
}

pub fn vec_sub<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Vec<Cplx<T>> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn vec_distance<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> T {
    vec_norm(&vec_sub(a, b))
}
