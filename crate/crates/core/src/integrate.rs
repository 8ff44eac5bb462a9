//! Adaptive composite Gauss integration on graded panels, used as an oracle.

use crate::error::{LchsError, Result};
use crate::quadrature::{gauss_legendre, GaussLegendreRule};
use crate::scalar::{CompensatedSum, Cplx, Real};

const ORACLE_ORDER: usize = 16;
const MAX_REFINEMENTS: usize = 8;

/// Panel boundaries on `[0, end]` whose widths grow geometrically from `first`
/// but never exceed `cap`.
pub fn graded_breaks<T: Real>(end: T, first: T, growth: T, cap: T) -> Vec<T> {
    let mut breaks = vec![T::zero()];
    let mut a = T::zero();
    while a < end {
        let width = (a * (growth - T::one())).max(first).min(cap);
        a = (a + width).min(end);
        breaks.push(a);
    }
    breaks
}

fn panel_sum<T: Real>(rule: &GaussLegendreRule<T>, breaks: &[T], splits: usize, f: &impl Fn(T) -> Cplx<T>) -> Cplx<T> {
    let mut acc = CompensatedSum::default();
    let parts = T::from_usize_lossy(splits);
    for w in breaks.windows(2) {
        let step = (w[1] - w[0]) / parts;
        for s in 0..splits {
            let a = w[0] + step * T::from_usize_lossy(s);
            let half = step * T::lit(0.5);
            let mid = a + half;
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                acc.add(f(mid + half * *x) * (half * *wt));
            }
        }
    }
    acc.value()
}

/// Integrates `f` over the panels given by `breaks`, halving every panel until
/// two successive estimates differ by less than `tol/10`.
pub fn integrate_panels<T: Real>(breaks: &[T], tol: T, f: impl Fn(T) -> Cplx<T>) -> Result<Cplx<T>> {
    let rule = gauss_legendre::<T>(ORACLE_ORDER)?;
    let mut splits = 1usize;
    let mut prev = panel_sum(&rule, breaks, splits, &f);
    for _ in 0..MAX_REFINEMENTS {
        splits *= 2;
        let next = panel_sum(&rule, breaks, splits, &f);
        let change = (next - prev).norm();
        if change < tol / T::lit(10.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(LchsError::Numeric(format!(
        "adaptive quadrature did not reach tolerance {tol} after {MAX_REFINEMENTS} refinements"
    )))
}

/// `∫_{−end}^{end} f` on mirrored graded panels.
pub fn integrate_symmetric<T: Real>(end: T, cap: T, tol: T, f: impl Fn(T) -> Cplx<T>) -> Result<Cplx<T>> {
    let breaks = graded_breaks(end, T::lit(0.5), T::lit(1.25), cap);
    let half_tol = tol / T::lit(2.0);
    let right = integrate_panels(&breaks, half_tol, &f)?;
    let left = integrate_panels(&breaks, half_tol, |k| f(-k))?;
    Ok(right + left)
}

/// `∫_a^∞ h` for a nonnegative integrand that decays at least like `1/k²`.
///
/// Integrates over geometric panels up to `a·2⁴⁰` and adds `h(end)·end` for the rest.
pub fn tail_integral<T: Real>(a: T, h: impl Fn(T) -> T) -> T {
    let rule = gauss_legendre::<T>(ORACLE_ORDER).expect("oracle rule");
    let start = a.max(T::lit(1e-3));
    let mut lo = a;
    let mut hi = start * T::lit(1.25);
    let end = start * T::lit(2.0).powi(40);
    let mut acc = T::zero();
    while lo < end {
        let half = (hi - lo) * T::lit(0.5);
        let mid = lo + half;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += h(mid + half * *x) * half * *w;
        }
        lo = hi;
        hi *= T::lit(1.25);
    }
    acc + h(end) * end
}
