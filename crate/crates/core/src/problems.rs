//! Seeded test problems: random Hermitian pairs and smooth time-dependent ODEs.
//!
//! Every generator draws from ChaCha8 so a seed pins the output on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{
    hermitian_eigenvalues, vec_norm, ComplexMatrix, HermitianPair, OdeProblem, TimeDependentMatrix, TimeDependentVector,
};
use crate::scalar::{cplx, real, Cplx, Real};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<T: Real>(rng: &mut ChaCha8Rng) -> T {
    let x: f64 = StandardNormal.sample(rng);
    T::lit(x)
}

/// Gaussian entries, symmetrized as `(X + X†)/2`.
pub fn random_hermitian<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix<T> {
    let mut x = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] = cplx(normal(rng), normal(rng));
        }
    }
    x.hermitian_part()
}

/// Random Hermitian with unit spectral norm.
pub fn unit_hermitian<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix<T> {
    let h = random_hermitian::<T>(n, rng);
    let norm = h.spectral_norm();
    h.scale_real(T::one() / norm)
}

/// Random PSD matrix with `λ_min = 0` and unit spectral norm.
pub fn unit_psd<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix<T> {
    let h = random_hermitian::<T>(n, rng);
    let lo = hermitian_eigenvalues(&h)[0];
    let mut l = h;
    for i in 0..n {
        l[(i, i)] -= real(lo);
    }
    let norm = l.spectral_norm();
    let mut l = l.scale_real(T::one() / norm);
    // restore exact Hermiticity after the shift
    l = l.hermitian_part();
    l
}

/// `(L, H)` with `‖L‖ = ‖H‖ = 1` and `λ_min(L) = 0`.
pub fn normalized_pair<T: Real>(n: usize, seed: u64) -> HermitianPair<T> {
    let mut r = rng(seed);
    let l = unit_psd(n, &mut r);
    let h = unit_hermitian(n, &mut r);
    HermitianPair { l, h }
}

pub fn random_unit_vector<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<Cplx<T>> {
    let v: Vec<Cplx<T>> = (0..n).map(|_| cplx(normal(rng), normal(rng))).collect();
    let norm = vec_norm(&v);
    v.into_iter().map(|z| z / norm).collect()
}

/// Smooth time-dependent generator on a seeded basis.
///
/// `L(t) = L₀ + (1 + sin t)/4 · P` with `L₀, P ⪰ 0` of unit norm, so `L(t) ⪰ 0`
/// for all `t`, and `H(t) = H₀ + (cos t)/4 · H₁`.
pub fn smooth_generator<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> TimeDependentMatrix<T> {
    let l0 = unit_psd::<T>(n, rng);
    let p = unit_psd::<T>(n, rng);
    let h0 = unit_hermitian::<T>(n, rng);
    let h1 = unit_hermitian::<T>(n, rng);
    let quarter = T::lit(0.25);
    let i = cplx(T::zero(), T::one());
    TimeDependentMatrix::new(n, move |t: T| {
        let mut a = l0.clone();
        a.add_scaled(real((T::one() + t.sin()) * quarter), &p);
        a.add_scaled(i, &h0);
        a.add_scaled(i * (t.cos() * quarter), &h1);
        a
    })
    .with_smoothness("entire in t")
}

/// `b(t) = cos(t)·b₀ + e^{−t}·b₁` with seeded unit `b₀, b₁`.
pub fn smooth_source<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> TimeDependentVector<T> {
    let b0 = random_unit_vector::<T>(n, rng);
    let b1 = random_unit_vector::<T>(n, rng);
    TimeDependentVector::new(n, move |t: T| {
        let (c, e) = (t.cos(), (-t).exp());
        b0.iter().zip(&b1).map(|(&x, &y)| x * c + y * e).collect()
    })
    .with_smoothness("entire in t")
}

/// Homogeneous problem with [`smooth_generator`] and a random unit `u₀`.
pub fn time_dependent_homogeneous<T: Real>(n: usize, seed: u64, horizon: T) -> Result<OdeProblem<T>> {
    let mut r = rng(seed);
    let a = smooth_generator(n, &mut r);
    let u0 = random_unit_vector(n, &mut r);
    OdeProblem::homogeneous(a, u0, horizon)
}

/// Inhomogeneous problem with [`smooth_generator`] and [`smooth_source`].
pub fn time_dependent_inhomogeneous<T: Real>(n: usize, seed: u64, horizon: T) -> Result<OdeProblem<T>> {
    let mut r = rng(seed);
    let a = smooth_generator(n, &mut r);
    let u0 = random_unit_vector(n, &mut r);
    let b = smooth_source(n, &mut r);
    OdeProblem::new(a, Some(b), u0, horizon)
}

/// Constant problem `A = L + iH` from [`normalized_pair`] with a random unit `u₀`.
pub fn constant_homogeneous<T: Real>(n: usize, seed: u64, horizon: T) -> Result<OdeProblem<T>> {
    let pair = normalized_pair::<T>(n, seed);
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let u0 = random_unit_vector(n, &mut r);
    OdeProblem::homogeneous(TimeDependentMatrix::constant(pair.reconstruct()), u0, horizon)
}
