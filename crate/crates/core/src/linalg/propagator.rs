//! Time-dependent coefficients, the Cartesian split, and the brute-force propagator oracles.

use std::fmt;
use std::sync::Arc;

use super::eigen::hermitian_eigenvalues;
use super::expm::expm;
use super::matrix::{vec_distance, vec_norm, ComplexMatrix};
use crate::error::{LchsError, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::{cplx, Cplx, Real};

/// Step-count cap for the step-doubling oracles.
pub const DEFAULT_STEP_CAP: usize = 1 << 22;

/// Number of uniformly spaced times used for sampled checks on `[0, T]`.
pub const SAMPLE_POINTS: usize = 257;

/// Default slack for the positive semi-definiteness check of `L(t)`.
pub const DEFAULT_TOL_PSD: f64 = 1e-10;

type MatrixFn<T> = Arc<dyn Fn(T) -> ComplexMatrix<T> + Send + Sync>;
type VectorFn<T> = Arc<dyn Fn(T) -> Vec<Cplx<T>> + Send + Sync>;

/// Deterministic map `t ↦ A(t)`.
#[derive(Clone)]
pub struct TimeDependentMatrix<T: Real> {
    dim: usize,
    eval: MatrixFn<T>,
    constant: bool,
    smoothness: String,
}

impl<T: Real> TimeDependentMatrix<T> {
    pub fn new(dim: usize, f: impl Fn(T) -> ComplexMatrix<T> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(f),
            constant: false,
            smoothness: "smooth".into(),
        }
    }

    pub fn constant(m: ComplexMatrix<T>) -> Self {
        let dim = m.dim();
        Self {
            dim,
            eval: Arc::new(move |_| m.clone()),
            constant: true,
            smoothness: "constant".into(),
        }
    }

    pub fn with_smoothness(mut self, note: impl Into<String>) -> Self {
        self.smoothness = note.into();
        self
    }

    #[inline]
    pub fn at(&self, t: T) -> ComplexMatrix<T> {
        (self.eval)(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn smoothness(&self) -> &str {
        &self.smoothness
    }
}

impl<T: Real> fmt::Debug for TimeDependentMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentMatrix")
            .field("dim", &self.dim)
            .field("constant", &self.constant)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

/// Deterministic map `t ↦ b(t)` into column vectors.
#[derive(Clone)]
pub struct TimeDependentVector<T: Real> {
    dim: usize,
    eval: VectorFn<T>,
    constant: bool,
    smoothness: String,
}

impl<T: Real> TimeDependentVector<T> {
    pub fn new(dim: usize, f: impl Fn(T) -> Vec<Cplx<T>> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(f),
            constant: false,
            smoothness: "smooth".into(),
        }
    }

    pub fn constant(v: Vec<Cplx<T>>) -> Self {
        let dim = v.len();
        Self {
            dim,
            eval: Arc::new(move |_| v.clone()),
            constant: true,
            smoothness: "constant".into(),
        }
    }

    pub fn with_smoothness(mut self, note: impl Into<String>) -> Self {
        self.smoothness = note.into();
        self
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec<Cplx<T>> {
        (self.eval)(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn smoothness(&self) -> &str {
        &self.smoothness
    }
}

impl<T: Real> fmt::Debug for TimeDependentVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentVector")
            .field("dim", &self.dim)
            .field("constant", &self.constant)
            .finish()
    }
}

/// Hermitian real and imaginary parts with `A = L + iH`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianPair<T: Real> {
    pub l: ComplexMatrix<T>,
    pub h: ComplexMatrix<T>,
}

impl<T: Real> HermitianPair<T> {
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let mut a = self.l.clone();
        a.add_scaled(cplx(T::zero(), T::one()), &self.h);
        a
    }

    /// `kL + H`.
    pub fn generator(&self, k: T) -> ComplexMatrix<T> {
        let mut g = self.h.clone();
        g.add_scaled(cplx(k, T::zero()), &self.l);
        g
    }
}

/// `L = (A + A†)/2`, `H = (A − A†)/(2i)`.
pub fn cartesian_split<T: Real>(a: &ComplexMatrix<T>) -> HermitianPair<T> {
    let n = a.dim();
    let half = T::lit(0.5);
    let mut l = ComplexMatrix::zeros(n);
    let mut h = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = a[(j, i)].conj();
            l[(i, j)] = (x + y) * half;
            // (x − y)/(2i) = −i(x − y)/2
            let d = (x - y) * half;
            h[(i, j)] = cplx(d.im, -d.re);
        }
    }
    HermitianPair { l, h }
}

/// Time-dependent Cartesian split `t ↦ (L(t), H(t))` of a coefficient matrix.
#[derive(Clone, Debug)]
pub struct TimeDependentPair<T: Real> {
    a: TimeDependentMatrix<T>,
}

impl<T: Real> TimeDependentPair<T> {
    pub fn new(a: TimeDependentMatrix<T>) -> Self {
        Self { a }
    }

    pub fn from_constant(pair: HermitianPair<T>) -> Self {
        Self::new(TimeDependentMatrix::constant(pair.reconstruct()))
    }

    pub fn at(&self, t: T) -> HermitianPair<T> {
        cartesian_split(&self.a.at(t))
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn is_constant(&self) -> bool {
        self.a.is_constant()
    }
}

/// Problem `du/dt = −A(t)u + b(t)`, `u(0) = u₀`, on `[0, T]`.
#[derive(Clone, Debug)]
pub struct OdeProblem<T: Real> {
    pub a: TimeDependentMatrix<T>,
    pub b: Option<TimeDependentVector<T>>,
    pub u0: Vec<Cplx<T>>,
    pub horizon: T,
}

impl<T: Real> OdeProblem<T> {
    /// Builds a problem after checking dimensions at every sampled time.
    pub fn new(
        a: TimeDependentMatrix<T>,
        b: Option<TimeDependentVector<T>>,
        u0: Vec<Cplx<T>>,
        horizon: T,
    ) -> Result<Self> {
        if !(horizon >= T::zero()) || !horizon.is_finite() {
            return Err(LchsError::Domain(format!(
                "horizon must be finite and ≥ 0, got {horizon}"
            )));
        }
        let p = Self { a, b, u0, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn homogeneous(a: TimeDependentMatrix<T>, u0: Vec<Cplx<T>>, horizon: T) -> Result<Self> {
        Self::new(a, None, u0, horizon)
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn pair(&self) -> TimeDependentPair<T> {
        TimeDependentPair::new(self.a.clone())
    }

    /// `SAMPLE_POINTS` uniform times on `[0, T]`.
    pub fn sample_times(&self) -> Vec<T> {
        let last = T::from_usize_lossy(SAMPLE_POINTS - 1);
        (0..SAMPLE_POINTS)
            .map(|i| self.horizon * T::from_usize_lossy(i) / last)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.u0.len();
        if n == 0 {
            return Err(LchsError::Dimension("u0 is empty".into()));
        }
        if self.a.dim() != n {
            return Err(LchsError::Dimension(format!(
                "A has dim {} but u0 has length {n}",
                self.a.dim()
            )));
        }
        if let Some(b) = &self.b {
            if b.dim() != n {
                return Err(LchsError::Dimension(format!(
                    "b has dim {} but u0 has length {n}",
                    b.dim()
                )));
            }
        }
        for t in self.sample_times() {
            let a = self.a.at(t);
            if a.dim() != n {
                return Err(LchsError::Dimension(format!(
                    "A({t}) has dim {}, expected {n}",
                    a.dim()
                )));
            }
            if !a.is_finite() {
                return Err(LchsError::Numeric(format!("A({t}) has non-finite entries")));
            }
            if let Some(b) = &self.b {
                let v = b.at(t);
                if v.len() != n {
                    return Err(LchsError::Dimension(format!(
                        "b({t}) has length {}, expected {n}",
                        v.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fails with the first sampled time where `λ_min(L(t)) < −tol_psd`.
    pub fn psd_check(&self, tol_psd: T) -> Result<()> {
        for t in self.sample_times() {
            let l = cartesian_split(&self.a.at(t)).l;
            let lo = hermitian_eigenvalues(&l)[0];
            if lo < -tol_psd {
                return Err(LchsError::NotPositiveSemidefinite {
                    t: t.to_f64_lossy(),
                    eigenvalue: lo.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// `max_t ‖L(t)‖` over the sampled times.
    pub fn max_norm_l(&self) -> T {
        self.sample_times()
            .into_iter()
            .map(|t| cartesian_split(&self.a.at(t)).l.spectral_norm())
            .fold(T::zero(), T::max)
    }

    /// `∫₀ᵀ ‖b(s)‖ ds` by composite Gauss quadrature, zero when `b` is absent.
    pub fn b_l1_norm(&self) -> T {
        let Some(b) = &self.b else { return T::zero() };
        let rule = gauss_legendre::<T>(16).expect("order 16 rule");
        let panels = 64;
        let h = self.horizon / T::from_usize_lossy(panels);
        let half = h * T::lit(0.5);
        let mut s = T::zero();
        for m in 0..panels {
            let mid = h * (T::from_usize_lossy(m) + T::lit(0.5));
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                s += half * *w * vec_norm(&b.at(mid + half * *x));
            }
        }
        s
    }
}

/// Ordered product `E(t_{n−1}) ⋯ E(t₀)` of per-step factors over `n` equal steps.
fn midpoint_product<T: Real>(
    dim: usize,
    t0: T,
    t1: T,
    n: usize,
    step: &impl Fn(T, T) -> Result<ComplexMatrix<T>>,
) -> Result<ComplexMatrix<T>> {
    let h = (t1 - t0) / T::from_usize_lossy(n);
    let mut u = ComplexMatrix::identity(dim);
    for i in 0..n {
        let mid = t0 + h * (T::from_usize_lossy(i) + T::lit(0.5));
        u = step(mid, h)?.matmul(&u);
    }
    Ok(u)
}

fn step_doubling<T: Real>(
    dim: usize,
    t0: T,
    t1: T,
    tol: T,
    cap: usize,
    step: impl Fn(T, T) -> Result<ComplexMatrix<T>>,
) -> Result<ComplexMatrix<T>> {
    if !(tol > T::zero()) {
        return Err(LchsError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(t0 <= t1) {
        return Err(LchsError::Domain(format!("need t0 ≤ t1, got [{t0}, {t1}]")));
    }
    if t0 == t1 {
        return Ok(ComplexMatrix::identity(dim));
    }
    let mut n = 1usize;
    let mut prev = midpoint_product(dim, t0, t1, n, &step)?;
    loop {
        if n * 2 > cap {
            let distance = midpoint_product(dim, t0, t1, n / 2, &step)
                .map(|p| (&p - &prev).spectral_norm().to_f64_lossy())
                .unwrap_or(f64::NAN);
            return Err(LchsError::Convergence { steps: n, distance });
        }
        n *= 2;
        let next = midpoint_product(dim, t0, t1, n, &step)?;
        let diff = (&next - &prev).spectral_norm();
        if diff < tol {
            return Ok(next);
        }
        prev = next;
    }
}

/// Oracle for `T e^{−∫_{t0}^{t1} A(s) ds}` by step-doubled midpoint exponentials.
pub fn time_ordered_propagator<T: Real>(a: &TimeDependentMatrix<T>, t0: T, t1: T, tol: T) -> Result<ComplexMatrix<T>> {
    time_ordered_propagator_capped(a, t0, t1, tol, DEFAULT_STEP_CAP)
}

pub fn time_ordered_propagator_capped<T: Real>(
    a: &TimeDependentMatrix<T>,
    t0: T,
    t1: T,
    tol: T,
    cap: usize,
) -> Result<ComplexMatrix<T>> {
    step_doubling(a.dim(), t0, t1, tol, cap, |mid, h| expm(&a.at(mid).scale_real(-h)))
}

/// Oracle for `T e^{−i∫_s^{t_end} (kL(s′) + H(s′)) ds′}`.
pub fn unitary_evolution<T: Real>(
    pair: &TimeDependentPair<T>,
    k: T,
    s: T,
    t_end: T,
    tol: T,
) -> Result<ComplexMatrix<T>> {
    step_doubling(pair.dim(), s, t_end, tol, DEFAULT_STEP_CAP, |mid, h| {
        expm(&pair.at(mid).generator(k).scale(cplx(T::zero(), -h)))
    })
}

/// Oracle for `u(T)` from the variation-of-constants formula.
pub fn reference_solution<T: Real>(p: &OdeProblem<T>, tol: T) -> Result<Vec<Cplx<T>>> {
    let t_end = p.horizon;
    let prop = time_ordered_propagator(&p.a, T::zero(), t_end, tol)?;
    let mut u = prop.mul_vec(&p.u0);
    let Some(b) = &p.b else { return Ok(u) };
    if t_end == T::zero() {
        return Ok(u);
    }

    let rule = gauss_legendre::<T>(8)?;
    let bmax = p
        .sample_times()
        .into_iter()
        .map(|t| vec_norm(&b.at(t)))
        .fold(T::zero(), T::max);
    let node_tol = tol / (T::lit(4.0) * (T::one() + t_end * bmax));
    let integral = |panels: usize| -> Result<Vec<Cplx<T>>> {
        let h = t_end / T::from_usize_lossy(panels);
        let half = h * T::lit(0.5);
        let mut acc = vec![cplx(T::zero(), T::zero()); p.dim()];
        for m in 0..panels {
            let mid = h * (T::from_usize_lossy(m) + T::lit(0.5));
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = mid + half * *x;
                let prop = time_ordered_propagator(&p.a, s, t_end, node_tol)?;
                let v = prop.mul_vec(&b.at(s));
                for (a, y) in acc.iter_mut().zip(v) {
                    *a += y * (half * *w);
                }
            }
        }
        Ok(acc)
    };

    let mut panels = 1usize;
    let mut prev = integral(panels)?;
    loop {
        panels *= 2;
        let next = integral(panels)?;
        let diff = vec_distance(&next, &prev);
        if diff < tol / T::lit(2.0) {
            for (x, y) in u.iter_mut().zip(next) {
                *x += y;
            }
            return Ok(u);
        }
        if panels >= 1 << 12 {
            return Err(LchsError::Convergence {
                steps: panels,
                distance: diff.to_f64_lossy(),
            });
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::real;

    fn scalar(x: f64) -> ComplexMatrix<f64> {
        ComplexMatrix::from_real_rows(&[&[x]]).unwrap()
    }

    #[test]
    fn cartesian_split_examples() {
        let p = cartesian_split(&scalar(1.0));
        assert_eq!(p.l, scalar(1.0));
        assert_eq!(p.h, scalar(0.0));

        let p = cartesian_split(&ComplexMatrix::from_diagonal(&[cplx(0.0, 1.0)]));
        assert_eq!(p.l, scalar(0.0));
        assert_eq!(p.h, scalar(1.0));

        let a = ComplexMatrix::from_rows(vec![vec![cplx(1.0, 1.0), real(2.0)], vec![real(0.0), real(3.0)]]).unwrap();
        let p = cartesian_split(&a);
        let l = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 3.0]]).unwrap();
        let h =
            ComplexMatrix::from_rows(vec![vec![real(1.0), cplx(0.0, -1.0)], vec![cplx(0.0, 1.0), real(0.0)]]).unwrap();
        assert!(p.l.max_abs_diff(&l) < 1e-15);
        assert!(p.h.max_abs_diff(&h) < 1e-15);
        assert!(p.reconstruct().max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn constant_propagator_matches_expm() {
        let a =
            ComplexMatrix::from_rows(vec![vec![cplx(1.0, 0.5), real(0.3)], vec![real(-0.2), cplx(0.4, -1.0)]]).unwrap();
        let td = TimeDependentMatrix::constant(a.clone());
        let p = time_ordered_propagator(&td, 0.0, 1.5, 1e-10).unwrap();
        let e = expm(&a.scale_real(-1.5)).unwrap();
        assert!(p.max_abs_diff(&e) < 1e-10);
    }

    #[test]
    fn scalar_linear_coefficient() {
        let td = TimeDependentMatrix::new(1, |t: f64| scalar(t));
        let p = time_ordered_propagator(&td, 0.0, 1.0, 1e-10).unwrap();
        assert!((p[(0, 0)].re - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn step_cap_reports_convergence_error() {
        let td = TimeDependentMatrix::new(1, |t: f64| scalar(t * t));
        let err = time_ordered_propagator_capped(&td, 0.0, 1.0, 1e-14, 8).unwrap_err();
        assert!(matches!(err, LchsError::Convergence { .. }));
    }

    #[test]
    fn unitary_evolution_examples() {
        let pair = TimeDependentPair::from_constant(HermitianPair {
            l: scalar(1.0),
            h: scalar(0.0),
        });
        let u = unitary_evolution(&pair, 2.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((u[(0, 0)] - crate::scalar::cis(-2.0)).norm() < 1e-12);
        let id = unitary_evolution(&pair, 0.0, 0.0, 1.0, 1e-12).unwrap();
        assert!(id.max_abs_diff(&ComplexMatrix::identity(1)) < 1e-15);
    }

    #[test]
    fn reference_solution_examples() {
        let p = OdeProblem::homogeneous(TimeDependentMatrix::constant(scalar(1.0)), vec![real(1.0)], 1.0).unwrap();
        let u = reference_solution(&p, 1e-10).unwrap();
        assert!((u[0].re - (-1.0f64).exp()).abs() < 1e-10);

        let p = OdeProblem::new(
            TimeDependentMatrix::constant(scalar(0.0)),
            Some(TimeDependentVector::constant(vec![real(1.0)])),
            vec![real(0.0)],
            2.0,
        )
        .unwrap();
        assert!((reference_solution(&p, 1e-10).unwrap()[0].re - 2.0).abs() < 1e-10);

        let p = OdeProblem::new(
            TimeDependentMatrix::constant(scalar(1.0)),
            Some(TimeDependentVector::constant(vec![real(1.0)])),
            vec![real(0.0)],
            1.0,
        )
        .unwrap();
        let u = reference_solution(&p, 1e-10).unwrap();
        assert!((u[0].re - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = OdeProblem::homogeneous(
            TimeDependentMatrix::constant(ComplexMatrix::<f64>::identity(2)),
            vec![real(1.0)],
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, LchsError::Dimension(_)));
    }

    #[test]
    fn psd_check_names_offending_time() {
        let td = TimeDependentMatrix::new(1, |t: f64| scalar(0.5 - t));
        let p = OdeProblem::homogeneous(td, vec![real(1.0)], 1.0).unwrap();
        match p.psd_check(1e-10) {
            Err(LchsError::NotPositiveSemidefinite { t, eigenvalue }) => {
                assert!(t > 0.5 && eigenvalue < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
