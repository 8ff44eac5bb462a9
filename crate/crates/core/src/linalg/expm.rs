//! Matrix exponential by scaling and squaring with a diagonal Padé approximant.

use num_complex::Complex;

use super::matrix::ComplexMatrix;
use crate::error::{LchsError, Result};
use crate::scalar::{Cplx, Real};

/// Scaled norm target before the Padé step.
const SCALED_NORM: f64 = 0.5;

/// Smallest diagonal Padé order whose truncation bound at `‖X‖ ≤ 0.5` is below `eps/8`.
fn pade_order<T: Real>() -> usize {
    let target = T::epsilon() / T::lit(8.0);
    let half = T::lit(SCALED_NORM);
    // (q!)² / ((2q)! (2q+1)!) · 0.5^{2q+1}
    let mut q = 1usize;
    loop {
        let mut bound = half.powi(2 * q as i32 + 1);
        for j in 1..=q {
            bound *= T::from_usize_lossy(j) * T::from_usize_lossy(j);
        }
        for j in 1..=(2 * q) {
            bound /= T::from_usize_lossy(j);
        }
        for j in 1..=(2 * q + 1) {
            bound /= T::from_usize_lossy(j);
        }
        if bound <= target || q >= 20 {
            return q;
        }
        q += 1;
    }
}

fn pade_coefficients<T: Real>(q: usize) -> Vec<T> {
    let mut c = vec![T::one()];
    for j in 0..q {
        let next = c[j] * T::from_usize_lossy(q - j) / (T::from_usize_lossy(j + 1) * T::from_usize_lossy(2 * q - j));
        c.push(next);
    }
    c
}

/// Solves `D X = N` by LU with partial pivoting.
pub(crate) fn solve<T: Real>(d: &ComplexMatrix<T>, rhs: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let n = d.dim();
    let mut a = d.clone();
    let mut b = rhs.clone();
    for col in 0..n {
        let (pivot, best) = (col..n)
            .map(|r| (r, a[(r, col)].norm()))
            .fold((col, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == T::zero() || !best.is_finite() {
            return Err(LchsError::Numeric("singular Padé denominator".into()));
        }
        if pivot != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = t;
                let t = b[(col, j)];
                b[(col, j)] = b[(pivot, j)];
                b[(pivot, j)] = t;
            }
        }
        let inv = Complex::new(T::one(), T::zero()) / a[(col, col)];
        for r in (col + 1)..n {
            let factor = a[(r, col)] * inv;
            if factor.norm() == T::zero() {
                continue;
            }
            for j in col..n {
                let v = a[(col, j)];
                a[(r, j)] -= factor * v;
            }
            for j in 0..n {
                let v = b[(col, j)];
                b[(r, j)] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = Complex::new(T::one(), T::zero()) / a[(col, col)];
        for j in 0..n {
            let mut s = b[(col, j)];
            for k in (col + 1)..n {
                s -= a[(col, k)] * b[(k, j)];
            }
            b[(col, j)] = s * inv;
        }
    }
    Ok(b)
}

/// `e^M` with relative error near machine precision for moderate `‖M‖`.
pub fn expm<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if !m.is_finite() {
        return Err(LchsError::Numeric("expm input has non-finite entries".into()));
    }
    let n = m.dim();
    let norm = m.one_norm().max(m.inf_norm());
    let mut squarings = 0u32;
    let half = T::lit(SCALED_NORM);
    let mut scaled_norm = norm;
    while scaled_norm > half {
        scaled_norm /= T::lit(2.0);
        squarings += 1;
    }
    let x = m.scale_real(T::lit(2.0).powi(-(squarings as i32)));

    let q = pade_order::<T>();
    let c = pade_coefficients::<T>(q);
    let mut num = ComplexMatrix::identity(n);
    let mut den = ComplexMatrix::identity(n);
    let mut power = ComplexMatrix::identity(n);
    for (j, &cj) in c.iter().enumerate().skip(1) {
        power = power.matmul(&x);
        let coef: Cplx<T> = Complex::new(cj, T::zero());
        num.add_scaled(coef, &power);
        let sign = if j % 2 == 0 { coef } else { -coef };
        den.add_scaled(sign, &power);
    }
    let mut r = solve(&den, &num)?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    if !r.is_finite() {
        return Err(LchsError::Numeric("expm overflowed".into()));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen::hermitian_eigen;
    use crate::scalar::{cplx, real};

    #[test]
    fn zero_gives_identity() {
        let e = expm(&ComplexMatrix::<f64>::zeros(2)).unwrap();
        assert_eq!(e, ComplexMatrix::identity(2));
    }

    #[test]
    fn scalar_decay() {
        let e = expm(&ComplexMatrix::<f64>::from_real_rows(&[&[-1.0]]).unwrap()).unwrap();
        assert!((e[(0, 0)].re - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn diagonal_phase() {
        let m = ComplexMatrix::from_diagonal(&[cplx(0.0, std::f64::consts::PI), real(0.0)]);
        let e = expm(&m).unwrap();
        assert!((e[(0, 0)] - real(-1.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - real(1.0)).norm() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let m = ComplexMatrix::<f64>::from_real_rows(&[&[f64::NAN]]).unwrap();
        assert!(matches!(expm(&m), Err(LchsError::Numeric(_))));
    }

    #[test]
    fn hermitian_matches_eigen_path_at_large_norm() {
        let h = ComplexMatrix::<f64>::from_rows(vec![
            vec![real(10.0), cplx(3.0, -4.0), real(1.0)],
            vec![cplx(3.0, 4.0), real(-20.0), cplx(0.0, 2.0)],
            vec![real(1.0), cplx(0.0, -2.0), real(15.0)],
        ])
        .unwrap();
        let m = h.scale(cplx(0.0, -1.0));
        let direct = expm(&m).unwrap();
        let eig = hermitian_eigen(&h);
        let spectral = eig.apply_fn(|x| crate::scalar::cis(-x));
        assert!(direct.max_abs_diff(&spectral) < 1e-12);

        let decay = expm(&h.scale_real(-1.0)).unwrap();
        let exact = eig.apply_fn(|x| real((-x).exp()));
        let rel = decay.max_abs_diff(&exact) / exact.max_abs();
        assert!(rel < 1e-12, "relative error {rel}");
    }

    #[test]
    fn pade_order_grows_with_precision() {
        assert!(pade_order::<f32>() < pade_order::<f64>());
    }
}
