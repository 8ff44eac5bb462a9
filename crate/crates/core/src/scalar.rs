//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar the numerics are generic over.
///
/// Implemented for `f32`, `f64` and, with the `quad` feature, for the
/// 128-bit [`f128::f128`].
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
}

/// Complex scalar over a [`Real`] component type.
pub type Cplx<T> = Complex<T>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn real<T: Real>(re: T) -> Cplx<T> {
    Complex::new(re, T::zero())
}

/// `exp(i·theta)`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Principal power `z^p` with the argument taken in `(−π, π]`.
pub fn principal_pow<T: Real>(z: Cplx<T>, p: T) -> Cplx<T> {
    let r = z.norm();
    if r == T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let theta = z.im.atan2(z.re);
    cis(p * theta) * r.powf(p)
}

/// Principal logarithm.
pub fn principal_ln<T: Real>(z: Cplx<T>) -> Cplx<T> {
    Complex::new(z.norm().ln(), z.im.atan2(z.re))
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<T: Real> {
    sum: Cplx<T>,
    carry: Cplx<T>,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: Complex::new(T::zero(), T::zero()),
            carry: Complex::new(T::zero(), T::zero()),
        }
    }
}

#[inline]
fn two_sum<T: Real>(sum: T, carry: T, x: T) -> (T, T) {
    let t = sum + x;
    let c = if sum.abs() >= x.abs() {
        (sum - t) + x
    } else {
        (x - t) + sum
    };
    (t, carry + c)
}

impl<T: Real> CompensatedSum<T> {
    #[inline]
    pub fn add(&mut self, x: Cplx<T>) {
        let (re, cre) = two_sum(self.sum.re, self.carry.re, x.re);
        let (im, cim) = two_sum(self.sum.im, self.carry.im, x.im);
        self.sum = Complex::new(re, im);
        self.carry = Complex::new(cre, cim);
    }

    #[inline]
    pub fn value(&self) -> Cplx<T> {
        self.sum + self.carry
    }
}

/// Compensated sum of a complex sequence, in iteration order.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = Cplx<T>>>(items: I) -> Cplx<T> {
    let mut acc = CompensatedSum::default();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_pow_matches_polar_form() {
        let z = cplx(1.0_f64, -3.0);
        let w = principal_pow(z, 0.5);
        assert!((w * w - z).norm() < 1e-14);
        assert!(w.re > 0.0);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let xs = [real(1e16_f64), real(1.0), real(-1e16)];
        assert_eq!(compensated_sum(xs).re, 1.0);
    }

    #[test]
    fn generic_over_f32() {
        let w = principal_pow(cplx(0.0_f32, 1.0), 2.0);
        assert!((w - cplx(-1.0, 0.0)).norm() < 1e-6);
    }
}
