//! Gauss–Legendre rules, truncation and step selection, and the composite LCHS grid.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LchsError, Result};
use crate::kernels::{c_beta, g_unchecked, tail_mass, KernelSpec};
use crate::scalar::{cis, compensated_sum, Cplx, Real};

/// Orders above this are replaced by a halved panel width.
pub const MAX_ORDER: usize = 64;

const NEWTON_ITERATIONS: usize = 100;

/// Gauss–Legendre rule on `[−1, 1]` with ascending nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendreRule<T: Real> {
    pub order: usize,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendreRule<T> {
    /// `∫_a^b f` with the rule mapped affinely onto `[a, b]`.
    pub fn integrate(&self, a: T, b: T, f: impl Fn(T) -> T) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = a + half;
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |s, (x, w)| s + *w * f(mid + half * *x))
            * half
    }
}

/// `(P_n(x), P_n′(x))` by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for j in 2..=n {
        let jj = T::from_usize_lossy(j);
        let p2 = ((jj + jj - T::one()) * x * p1 - (jj - T::one()) * p0) / jj;
        p0 = p1;
        p1 = p2;
    }
    let nn = T::from_usize_lossy(n);
    let dp = nn * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// Legendre roots by Newton iteration from Chebyshev-like guesses, with
/// weights `2/((1 − x²) P_Q′(x)²)`.
pub fn gauss_legendre<T: Real>(order: usize) -> Result<GaussLegendreRule<T>> {
    if order == 0 {
        return Err(LchsError::Domain("Gauss–Legendre order must be at least 1".into()));
    }
    if order == 1 {
        return Ok(GaussLegendreRule {
            order,
            nodes: vec![T::zero()],
            weights: vec![T::lit(2.0)],
        });
    }
    let q = T::from_usize_lossy(order);
    let tol = T::epsilon() * T::lit(4.0);
    let mut nodes = vec![T::zero(); order];
    let mut weights = vec![T::zero(); order];
    let half = order / 2;
    for i in 0..half {
        let mut x = (T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (q + T::lit(0.5))).cos();
        let mut converged = false;
        for _ in 0..NEWTON_ITERATIONS {
            let (p, dp) = legendre(order, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LchsError::Numeric(format!(
                "Newton iteration for P_{order} root {i} did not converge"
            )));
        }
        let (_, dp) = legendre(order, x);
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[order - 1 - i] = x;
        nodes[i] = -x;
        weights[order - 1 - i] = w;
        weights[i] = w;
    }
    if order % 2 == 1 {
        let (_, dp) = legendre(order, T::zero());
        nodes[half] = T::zero();
        weights[half] = T::lit(2.0) / (dp * dp);
    }
    Ok(GaussLegendreRule { order, nodes, weights })
}

/// Explicit truncation bound `2^{B+1} B! / (C_β cos(βπ/2)^B) · e^{−K^β cos(βπ/2)/2} / K`, `B = ⌈1/β⌉`.
pub fn truncation_bound<T: Real>(beta: T, big_k: T) -> Result<T> {
    let c = c_beta(beta)?;
    let b = (T::one() / beta).ceil().to_usize().expect("finite 1/beta");
    let cos = (beta * T::FRAC_PI_2()).cos();
    let mut fact = T::one();
    for j in 2..=b {
        fact *= T::from_usize_lossy(j);
    }
    let lead = T::lit(2.0).powi(b as i32 + 1) * fact / (c * cos.powi(b as i32));
    Ok(lead / big_k * (-(big_k.powf(beta) * cos / T::lit(2.0))).exp())
}

/// How the truncation `K` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    /// Bisection on the explicit analytic bound.
    #[default]
    Analytic,
    /// Bisection on the numerically integrated tail `∫_{|k|>K} |g|`.
    TailIntegral,
}

fn bisect_decreasing<T: Real>(eps: T, bound: impl Fn(T) -> T) -> Result<T> {
    let mut hi = T::one();
    if bound(hi) <= eps {
        return Ok(hi);
    }
    let mut lo = hi;
    for _ in 0..200 {
        lo = hi;
        hi *= T::lit(2.0);
        if bound(hi) <= eps {
            break;
        }
    }
    if bound(hi) > eps {
        return Err(LchsError::Numeric(format!("no truncation K reaches {eps}")));
    }
    while hi - lo > hi * T::lit(1e-3) {
        let mid = (lo + hi) * T::lit(0.5);
        if bound(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Smallest `K ≥ 1`, to three significant digits, with the explicit bound `≤ eps`.
#[allow(non_snake_case)]
pub fn select_truncation_K<T: Real>(beta: T, eps: T) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(LchsError::Domain(format!("eps must be positive, got {eps}")));
    }
    c_beta(beta)?;
    bisect_decreasing(eps, |k| truncation_bound(beta, k).expect("beta validated"))
}

/// Truncation `K` under the given rule; the tail rule accepts any kernel.
pub fn select_truncation<T: Real>(spec: &KernelSpec, eps: T, rule: TruncationRule) -> Result<T> {
    spec.validate()?;
    match rule {
        TruncationRule::Analytic => {
            let beta = spec.beta().ok_or_else(|| {
                LchsError::Precondition("the analytic truncation bound exists only for the beta family".into())
            })?;
            select_truncation_K(T::lit(beta), eps)
        }
        TruncationRule::TailIntegral => {
            if !(eps > T::zero()) {
                return Err(LchsError::Domain(format!("eps must be positive, got {eps}")));
            }
            bisect_decreasing(eps, |k| tail_mass(spec, k))
        }
    }
}

/// Quadrature bound `(8/(3C_β)) K h₁^{2Q} (eT maxL/2)^{2Q}`.
pub fn discretization_bound<T: Real>(beta: T, big_k: T, h1: T, order: usize, horizon: T, max_norm_l: T) -> Result<T> {
    let c = c_beta(beta)?;
    let r = h1 * T::E() * horizon * max_norm_l / T::lit(2.0);
    Ok(T::lit(8.0) / (T::lit(3.0) * c) * big_k * r.powi(2 * order as i32))
}

/// `(h₁, Q)` with `h₁ = 1/(eT maxL)` and `Q = ⌈log(8K/(3C_β ε))/log 4⌉`.
///
/// `h₁ = K` when `T·maxL = 0`. Orders above [`MAX_ORDER`] halve `h₁` instead.
pub fn select_quadrature_params<T: Real>(horizon: T, max_norm_l: T, big_k: T, beta: T, eps: T) -> Result<(T, usize)> {
    if !(eps > T::zero()) {
        return Err(LchsError::Domain(format!("eps must be positive, got {eps}")));
    }
    if !(big_k > T::zero()) || horizon < T::zero() || max_norm_l < T::zero() {
        return Err(LchsError::Domain("K must be positive and T, max‖L‖ nonnegative".into()));
    }
    let c = c_beta(beta)?;
    let log_arg = (T::lit(8.0) * big_k / (T::lit(3.0) * c * eps)).ln();
    let order_for = |rate: T| -> usize {
        let q = (log_arg / rate).ceil();
        q.to_usize().unwrap_or(usize::MAX).max(1)
    };
    let scale = horizon * max_norm_l;
    if scale == T::zero() {
        return Ok((big_k, order_for(T::lit(4.0).ln())));
    }
    let mut h1 = T::one() / (T::E() * scale);
    let mut order = order_for(T::lit(4.0).ln());
    while order > MAX_ORDER {
        h1 /= T::lit(2.0);
        // per-unit-Q decay of the bound is (2/(h₁ e T maxL))²
        let rate = T::lit(2.0) * (T::lit(2.0) / (h1 * T::E() * scale)).ln();
        order = order_for(rate);
    }
    Ok((h1, order))
}

/// Discrete LCHS grid `{k_j, c_j}` over `[−K, K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid<T: Real> {
    pub spec: KernelSpec,
    /// Truncation after stretching to a whole number of panels.
    pub trunc_k: T,
    pub step_h1: T,
    pub order_q: usize,
    pub panels_per_side: usize,
    pub nodes: Vec<T>,
    pub coeffs: Vec<Cplx<T>>,
}

impl<T: Real> QuadratureGrid<T> {
    pub fn total_m(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ_j c_j`.
    pub fn coefficient_sum(&self) -> Cplx<T> {
        compensated_sum(self.coeffs.iter().copied())
    }

    /// `Σ_j c_j e^{−ik_j x}`, which approximates `e^{−x}` for `x ≥ 0`.
    pub fn scalar_reconstruction(&self, x: T) -> Cplx<T> {
        compensated_sum(self.nodes.iter().zip(&self.coeffs).map(|(&k, &c)| c * cis(-k * x)))
    }

    /// CSV with a `#` metadata line and columns `index,k,re_c,im_c`.
    pub fn to_csv(&self) -> String {
        let beta = self.spec.beta().map_or_else(|| "none".to_string(), |b| b.to_string());
        let mut out = format!(
            "# kernel={} K={} h1={} Q={} beta={} M={}\nindex,k,re_c,im_c\n",
            self.spec.label(),
            self.trunc_k,
            self.step_h1,
            self.order_q,
            beta,
            self.total_m()
        );
        for (i, (k, c)) in self.nodes.iter().zip(&self.coeffs).enumerate() {
            let _ = writeln!(out, "{i},{k},{},{}", c.re, c.im);
        }
        out
    }
}

/// Composite Gauss grid with `⌈K/h₁⌉` panels per side and `c = (h₁/2) w_q g(k)`.
pub fn build_grid<T: Real>(spec: &KernelSpec, big_k: T, h1: T, order: usize) -> Result<QuadratureGrid<T>> {
    spec.validate()?;
    if !(big_k > T::zero()) || !(h1 > T::zero()) {
        return Err(LchsError::Domain("K and h1 must be positive".into()));
    }
    let rule = gauss_legendre::<T>(order)?;
    let ratio = big_k / h1 * (T::one() - T::lit(1e-12));
    let panels = ratio.ceil().to_usize().unwrap_or(1).max(1);
    let half = h1 * T::lit(0.5);
    let mut nodes = Vec::with_capacity(2 * panels * order);
    let mut coeffs = Vec::with_capacity(2 * panels * order);
    let p = panels as i64;
    for m in -p..p {
        let mid = h1 * (T::from_i64(m).expect("panel index") + T::lit(0.5));
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let k = mid + half * *x;
            nodes.push(k);
            coeffs.push(g_unchecked(spec, k) * (half * *w));
        }
    }
    Ok(QuadratureGrid {
        spec: *spec,
        trunc_k: h1 * T::from_usize_lossy(panels),
        step_h1: h1,
        order_q: order,
        panels_per_side: panels,
        nodes,
        coeffs,
    })
}

/// `Σ_j |c_j|`.
pub fn coefficient_one_norm<T: Real>(grid: &QuadratureGrid<T>) -> T {
    let mut s = T::zero();
    let mut carry = T::zero();
    for c in &grid.coeffs {
        let x = c.norm();
        let t = s + x;
        carry += if s.abs() >= x { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + carry
}

/// Grid parameters chosen for a target accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridChoice<T: Real> {
    pub trunc_k: T,
    pub step_h1: T,
    pub order_q: usize,
}

/// `K` from `rule` at `eps_k`, then `(h₁, Q)` from the quadrature selector at `eps_q`.
pub fn choose_grid<T: Real>(
    spec: &KernelSpec,
    rule: TruncationRule,
    eps_k: T,
    eps_q: T,
    horizon: T,
    max_norm_l: T,
) -> Result<GridChoice<T>> {
    let beta = spec
        .beta()
        .ok_or_else(|| LchsError::Precondition("grid selection is defined for the beta family only".into()))?;
    let trunc_k = select_truncation(spec, eps_k, rule)?;
    let (step_h1, order_q) = select_quadrature_params(horizon, max_norm_l, trunc_k, T::lit(beta), eps_q)?;
    Ok(GridChoice {
        trunc_k,
        step_h1,
        order_q,
    })
}

impl<T: Real> GridChoice<T> {
    pub fn build(&self, spec: &KernelSpec) -> Result<QuadratureGrid<T>> {
        build_grid(spec, self.trunc_k, self.step_h1, self.order_q)
    }
}

/// Whether the nodes are symmetric about zero, `k_j = −k_{M−1−j}`.
pub fn mirrored<T: Real>(grid: &QuadratureGrid<T>) -> bool {
    let n = grid.nodes.len();
    (0..n / 2).all(|i| {
        let a = grid.nodes[i];
        let b = grid.nodes[n - 1 - i];
        (a + b).abs() <= T::epsilon() * T::lit(64.0) * b.abs().max(T::one())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::abs_integral;
    use crate::scalar::cplx;
    use proptest::prelude::*;

    #[test]
    fn low_order_rules() {
        let r = gauss_legendre::<f64>(1).unwrap();
        assert_eq!((r.nodes.clone(), r.weights.clone()), (vec![0.0], vec![2.0]));
        let r = gauss_legendre::<f64>(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + s).abs() < 1e-15 && (r.nodes[1] - s).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
        let r = gauss_legendre::<f64>(5).unwrap();
        assert!((r.integrate(-1.0, 1.0, |x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-12);
        assert!(gauss_legendre::<f64>(0).is_err());
    }

    #[test]
    fn weights_sum_to_two() {
        for q in 1..=80 {
            let r = gauss_legendre::<f64>(q).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "Q={q}: {s}");
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn monomial_exactness() {
        for q in 1..=20usize {
            let r = gauss_legendre::<f64>(q).unwrap();
            for d in 0..2 * q {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                let v = r.integrate(-1.0, 1.0, |x| x.powi(d as i32));
                assert!((v - exact).abs() <= 1e-12 * exact.abs().max(1.0), "Q={q} d={d}");
            }
        }
    }

    proptest! {
        #[test]
        fn random_polynomials_integrate_exactly(q in 1usize..24, seed in proptest::collection::vec(-1.0f64..1.0, 48)) {
            let r = gauss_legendre::<f64>(q).unwrap();
            let deg = 2 * q - 1;
            let coef = &seed[..=deg];
            let poly = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let exact: f64 = coef.iter().enumerate()
                .map(|(d, c)| if d % 2 == 1 { 0.0 } else { 2.0 * c / (d as f64 + 1.0) })
                .sum();
            let scale: f64 = coef.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
            let v = r.integrate(-1.0, 1.0, poly);
            prop_assert!((v - exact).abs() <= 1e-11 * scale);
        }

        #[test]
        fn halving_eps_adds_at_most_one_order(k in 1.0f64..500.0, eps in 1e-12f64..1e-1, beta in 0.1f64..0.95) {
            let (_, q1) = select_quadrature_params(1.0, 1.0, k, beta, eps).unwrap();
            let (_, q2) = select_quadrature_params(1.0, 1.0, k, beta, eps / 2.0).unwrap();
            prop_assert!(q2 >= q1 && q2 <= q1 + 1);
        }
    }

    #[test]
    fn truncation_selection() {
        let k6 = select_truncation_K(0.75_f64, 1e-6).unwrap();
        let k2 = select_truncation_K(0.75_f64, 1e-2).unwrap();
        assert!(k6 > k2);
        assert!(truncation_bound(0.75, k6).unwrap() <= 1e-6);
        assert!(truncation_bound(0.75, k6 * 0.998).unwrap() > 1e-6);
        assert_eq!(select_truncation_K(0.75_f64, 1e6).unwrap(), 1.0);
        assert!(select_truncation_K(1.2_f64, 1e-3).is_err());
    }

    #[test]
    fn truncation_crosschecked_against_tail_integral() {
        let spec = KernelSpec::BetaExponential { beta: 0.75 };
        let k = select_truncation_K(0.75_f64, 1e-3).unwrap();
        assert!(tail_mass(&spec, k) <= 1e-3);
        let k_tail = select_truncation(&spec, 1e-3_f64, TruncationRule::TailIntegral).unwrap();
        assert!(k_tail < k);
    }

    #[test]
    fn truncation_scaling_exponent() {
        // slope of log K against log log(1/ε) approaches 1/β
        for beta in [0.5_f64, 0.75, 0.9] {
            let pts: Vec<(f64, f64)> = (2..=10)
                .map(|e| {
                    let eps = 10f64.powi(-e);
                    let k = select_truncation_K(beta, eps).unwrap();
                    ((1.0 / eps).ln().ln(), k.ln())
                })
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            assert!((slope * beta - 1.0).abs() <= 0.25, "beta {beta}: slope {slope}");
        }
    }

    #[test]
    fn quadrature_param_examples() {
        let (h1, _) = select_quadrature_params(1.0_f64, 1.0, 10.0, 0.75, 1e-4).unwrap();
        assert!((h1 - (-1.0f64).exp()).abs() < 1e-15);
        let c = 2.0 * std::f64::consts::PI * (-(2f64.powf(0.75))).exp();
        let expect = ((8.0 * 10.0 / (3.0 * c * 1e-4)).ln() / 4f64.ln()).ceil() as usize;
        let (_, q) = select_quadrature_params(1.0_f64, 1.0, 10.0, 0.75, 1e-4).unwrap();
        assert_eq!(q, expect);
        let (h1, _) = select_quadrature_params(0.0_f64, 1.0, 10.0, 0.75, 1e-4).unwrap();
        assert_eq!(h1, 10.0);
        assert!(matches!(
            select_quadrature_params(1.0_f64, 1.0, 10.0, 0.75, 0.0),
            Err(LchsError::Domain(_))
        ));
    }

    #[test]
    fn order_cap_halves_step() {
        let (h1, q) = select_quadrature_params(1.0_f64, 1.0, 10.0, 0.75, 1e-300).unwrap();
        assert!(q <= MAX_ORDER);
        assert!(h1 < (-1.0f64).exp());
    }

    #[test]
    fn grid_structure() {
        let spec = KernelSpec::BetaExponential { beta: 0.75 };
        let g = build_grid(&spec, 10.0_f64, (-1.0f64).exp(), 6).unwrap();
        assert_eq!(g.panels_per_side, 28);
        assert_eq!(g.total_m(), 2 * 28 * 6);
        assert!(g.trunc_k >= 10.0);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(mirrored(&g));
        let tail = truncation_bound(0.75, 10.0).unwrap();
        assert!((g.coefficient_sum() - cplx(1.0, 0.0)).norm() <= tail);
        assert!(coefficient_one_norm(&g) >= g.coefficient_sum().norm());
    }

    #[test]
    fn exact_panel_multiple_is_not_stretched() {
        let g = build_grid(&KernelSpec::Cauchy, 4.0_f64, 0.5, 3).unwrap();
        assert_eq!(g.panels_per_side, 8);
        assert_eq!(g.trunc_k, 4.0);
    }

    #[test]
    fn one_norm_matches_abs_integral_for_cauchy() {
        let g = build_grid(&KernelSpec::Cauchy, 200.0_f64, 0.5, 8).unwrap();
        let oracle = abs_integral(&KernelSpec::Cauchy, g.trunc_k, 1e-10_f64).unwrap();
        assert!((coefficient_one_norm(&g) - oracle).abs() < 1e-6);
    }

    #[test]
    fn one_norm_below_abs_integral_plus_margin() {
        for beta in [0.3, 0.5, 0.75, 0.9] {
            let spec = KernelSpec::BetaExponential { beta };
            let total = crate::kernels::abs_integral_total(&spec, 1e-8_f64).unwrap();
            for q in 4..=8 {
                let g = build_grid(&spec, 30.0_f64, (-1.0f64).exp(), q).unwrap();
                assert!(coefficient_one_norm(&g) <= total + 0.01);
            }
        }
    }

    #[test]
    fn csv_dump_has_metadata() {
        let g = build_grid(&KernelSpec::BetaExponential { beta: 0.5 }, 1.0_f64, 0.5, 2).unwrap();
        let csv = g.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# kernel=beta=0.5 K=1 h1=0.5 Q=2 beta=0.5 M=8");
        assert_eq!(lines.next().unwrap(), "index,k,re_c,im_c");
        assert_eq!(lines.count(), 8);
    }
}
