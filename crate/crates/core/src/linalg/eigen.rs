//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.

use num_complex::Complex;

use super::matrix::ComplexMatrix;
use crate::scalar::{real, Cplx, Real};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with unit eigenvectors as matching columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: ComplexMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(T) -> Cplx<T>) -> ComplexMatrix<T> {
        let diag: Vec<Cplx<T>> = self.values.iter().map(|&x| f(x)).collect();
        self.reconstruct_with(&diag)
    }

    /// `V diag(d) V†`.
    pub fn reconstruct_with(&self, diag: &[Cplx<T>]) -> ComplexMatrix<T> {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex::new(T::zero(), T::zero());
                for (k, &d) in diag.iter().enumerate() {
                    s += v[(i, k)] * d * v[(j, k)].conj();
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Residual `max |A V − V Λ|` against the matrix that was decomposed.
    pub fn residual(&self, a: &ComplexMatrix<T>) -> T {
        let n = self.values.len();
        let av = a.matmul(&self.vectors);
        let mut worst = T::zero();
        for i in 0..n {
            for k in 0..n {
                let d = av[(i, k)] - self.vectors[(i, k)] * self.values[k];
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

fn off_diagonal_norm<T: Real>(a: &ComplexMatrix<T>) -> T {
    let n = a.dim();
    let mut s = T::zero();
    for p in 0..n {
        for q in (p + 1)..n {
            s += a[(p, q)].norm_sqr();
        }
    }
    (s + s).sqrt()
}

fn jacobi<T: Real>(m: &ComplexMatrix<T>, want_vectors: bool) -> (Vec<T>, Option<ComplexMatrix<T>>) {
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = want_vectors.then(|| ComplexMatrix::identity(n));
    let scale = a.frobenius_norm();
    if scale == T::zero() {
        return (vec![T::zero(); n], v);
    }
    let threshold = T::epsilon() * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= T::min_positive_value() {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (r + r);
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let phase_c = phase.conj();

                // columns: A ← A G
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - phase_c * akq * s;
                    a[(k, q)] = akp * s + phase_c * akq * c;
                }
                // rows: A ← G† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - phase * aqk * s;
                    a[(q, k)] = apk * s + phase * aqk * c;
                }
                a[(p, q)] = Complex::new(T::zero(), T::zero());
                a[(q, p)] = Complex::new(T::zero(), T::zero());
                a[(p, p)] = real(a[(p, p)].re);
                a[(q, q)] = real(a[(q, q)].re);

                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c - phase_c * vkq * s;
                        v[(k, q)] = vkp * s + phase_c * vkq * c;
                    }
                }
            }
        }
    }

    let values: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    (values, v)
}

/// Full eigendecomposition of a Hermitian matrix (the anti-Hermitian part is ignored).
pub fn hermitian_eigen<T: Real>(m: &ComplexMatrix<T>) -> HermitianEigen<T> {
    let n = m.dim();
    let (values, vectors) = jacobi(m, true);
    let vectors = vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite eigenvalues"));
    let mut sorted = ComplexMatrix::zeros(n);
    for (new, &old) in order.iter().enumerate() {
        for i in 0..n {
            sorted[(i, new)] = vectors[(i, old)];
        }
    }
    HermitianEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: sorted,
    }
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &ComplexMatrix<T>) -> Vec<T> {
    let (mut values, _) = jacobi(m, false);
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn sample() -> ComplexMatrix<f64> {
        ComplexMatrix::from_rows(vec![
            vec![real(2.0), cplx(1.0, -1.0), cplx(0.0, 0.5)],
            vec![cplx(1.0, 1.0), real(-1.0), cplx(0.25, 0.0)],
            vec![cplx(0.0, -0.5), cplx(0.25, 0.0), real(0.5)],
        ])
        .unwrap()
    }

    #[test]
    fn decomposition_reconstructs_input() {
        let a = sample();
        let e = hermitian_eigen(&a);
        assert!(e.residual(&a) < 1e-13);
        let back = e.apply_fn(real);
        assert!(back.max_abs_diff(&a) < 1e-13);
        let vv = e.vectors.adjoint().matmul(&e.vectors);
        assert!(vv.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-13);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_and_determinant_invariants() {
        let a = sample();
        let vals = hermitian_eigenvalues(&a);
        let tr: f64 = vals.iter().sum();
        assert!((tr - a.trace().re).abs() < 1e-13);
    }

    #[test]
    fn degenerate_spectrum() {
        let a = ComplexMatrix::<f64>::identity(4).scale_real(3.0);
        let e = hermitian_eigen(&a);
        assert!(e.values.iter().all(|&x| (x - 3.0).abs() < 1e-15));
    }
}
