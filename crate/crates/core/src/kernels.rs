//! Kernel functions `f(z)`, the integrand `g(k) = f(k)/(1 − ik)`, and their checks.
//!
//! Every kernel is analytic on the closed lower half plane and normalized so
//! that `∫ g(k) dk = 2π f(−i) = 1`. The β-exponential family requires
//! `0 < β < 1`: the `β → 1` limit cannot satisfy the decay and analyticity
//! conditions at the same time.

use serde::{Deserialize, Serialize};

use crate::error::{LchsError, Result};
use crate::integrate::{integrate_symmetric, tail_integral};
use crate::scalar::{cis, cplx, principal_ln, principal_pow, Cplx, Real};

/// Which kernel `f(z)` weights the Hamiltonian simulations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", try_from = "RawKernelSpec")]
pub enum KernelSpec {
    /// `f(z) = 1/(C_β e^{(1+iz)^β})`.
    BetaExponential { beta: f64 },
    /// `f(z) = 1/(π(1+iz))`.
    Cauchy,
    /// `f(z) = 2^{p−1}/(π(1+iz)^p)`.
    PolyPower { p: u32 },
    /// `f(z) = 1/(2π e^{−(ln 2)^p} e^{(ln(1+iz))^p})`.
    LogPower { p: u32 },
}

/// Flat wire form, so that stray keys are rejected for every variant.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelSpec {
    variant: String,
    beta: Option<f64>,
    p: Option<u32>,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = LchsError;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        let spec = match (raw.variant.as_str(), raw.beta, raw.p) {
            ("beta_exponential", Some(beta), None) => Self::BetaExponential { beta },
            ("cauchy", None, None) => Self::Cauchy,
            ("poly_power", None, Some(p)) => Self::PolyPower { p },
            ("log_power", None, Some(p)) => Self::LogPower { p },
            (v, _, _) => {
                return Err(LchsError::Format(format!(
                    "kernel variant `{v}` with the given parameters is not recognized"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl KernelSpec {
    pub fn beta_exponential(beta: f64) -> Result<Self> {
        let spec = Self::BetaExponential { beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::BetaExponential { beta } if !(beta > 0.0 && beta < 1.0) => Err(LchsError::Domain(format!(
                "beta must lie strictly inside (0, 1), got {beta}"
            ))),
            Self::PolyPower { p } | Self::LogPower { p } if p == 0 => {
                Err(LchsError::Domain("kernel power p must be a positive integer".into()))
            }
            _ => Ok(()),
        }
    }

    /// β of the exponential family, `None` for the other variants.
    pub fn beta(&self) -> Option<f64> {
        match *self {
            Self::BetaExponential { beta } => Some(beta),
            _ => None,
        }
    }

    /// Short label used in CSV output, e.g. `beta=0.75` or `cauchy`.
    pub fn label(&self) -> String {
        match *self {
            Self::BetaExponential { beta } => format!("beta={beta}"),
            Self::Cauchy => "cauchy".into(),
            Self::PolyPower { p } => format!("poly_power={p}"),
            Self::LogPower { p } => format!("log_power={p}"),
        }
    }
}

/// `C_β = 2π e^{−2^β}`.
pub fn c_beta<T: Real>(beta: T) -> Result<T> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(LchsError::Domain(format!(
            "beta must lie strictly inside (0, 1), got {beta}"
        )));
    }
    Ok(T::TAU() * (-(T::lit(2.0).powf(beta))).exp())
}

/// `f(z)` for `Im z ≤ 0`.
pub fn f_eval<T: Real>(spec: &KernelSpec, z: Cplx<T>) -> Result<Cplx<T>> {
    spec.validate()?;
    if z.im > T::zero() {
        return Err(LchsError::Domain(format!(
            "kernel evaluated at Im z = {} > 0, outside its analyticity region",
            z.im
        )));
    }
    Ok(f_unchecked(spec, z))
}

fn f_unchecked<T: Real>(spec: &KernelSpec, z: Cplx<T>) -> Cplx<T> {
    let one = T::one();
    let w = cplx(one - z.im, z.re);
    match *spec {
        KernelSpec::BetaExponential { beta } => {
            let beta = T::lit(beta);
            // e^{−w^β − ln 2π + 2^β}
            let e = -principal_pow(w, beta) + cplx(T::lit(2.0).powf(beta) - T::TAU().ln(), T::zero());
            e.exp()
        }
        KernelSpec::Cauchy => (w * T::PI()).inv(),
        KernelSpec::PolyPower { p } => {
            let scale = T::lit(2.0).powi(p as i32 - 1) / T::PI();
            w.powi(p as i32).inv() * scale
        }
        KernelSpec::LogPower { p } => {
            let lw = principal_ln(w);
            let ln2 = T::LN_2();
            let e = -lw.powi(p as i32) + cplx(ln2.powi(p as i32) - T::TAU().ln(), T::zero());
            e.exp()
        }
    }
}

/// `df/dz` on the real axis, used for integration-by-parts tail bounds.
fn f_prime<T: Real>(spec: &KernelSpec, k: T) -> Cplx<T> {
    let w = cplx(T::one(), k);
    let i = cplx(T::zero(), T::one());
    let f = f_unchecked(spec, cplx(k, T::zero()));
    match *spec {
        KernelSpec::BetaExponential { beta } => {
            let beta = T::lit(beta);
            -i * principal_pow(w, beta - T::one()) * f * beta
        }
        KernelSpec::Cauchy => -i * (w * w * T::PI()).inv(),
        KernelSpec::PolyPower { p } => -i * f * T::from_usize_lossy(p as usize) / w,
        KernelSpec::LogPower { p } => {
            let lw = principal_ln(w);
            -i * lw.powi(p as i32 - 1) * f * T::from_usize_lossy(p as usize) / w
        }
    }
}

/// `g(k) = f(k)/(1 − ik)` on the real axis.
pub fn g_eval<T: Real>(spec: &KernelSpec, k: T) -> Result<Cplx<T>> {
    spec.validate()?;
    if !k.is_finite() {
        return Err(LchsError::Domain(format!("g evaluated at non-finite k = {k}")));
    }
    Ok(g_unchecked(spec, k))
}

#[inline]
pub(crate) fn g_unchecked<T: Real>(spec: &KernelSpec, k: T) -> Cplx<T> {
    f_unchecked(spec, cplx(k, T::zero())) / cplx(T::one(), -k)
}

fn g_prime<T: Real>(spec: &KernelSpec, k: T) -> Cplx<T> {
    let d = cplx(T::one(), -k);
    let i = cplx(T::zero(), T::one());
    f_prime(spec, k) / d + i * f_unchecked(spec, cplx(k, T::zero())) / (d * d)
}

/// `|g(k)| = 1/(C_β √(k²+1) e^{(k²+1)^{β/2} cos(β arctan k)})` for the β family.
pub fn g_abs_bound<T: Real>(beta: T, k: T) -> T {
    let r2 = k * k + T::one();
    let c = T::TAU() * (-(T::lit(2.0).powf(beta))).exp();
    let expo = r2.powf(beta / T::lit(2.0)) * (beta * k.atan()).cos();
    (-expo).exp() / (c * r2.sqrt())
}

/// `|g(k)|` for any variant; equals [`g_abs_bound`] on the β family.
pub fn g_abs<T: Real>(spec: &KernelSpec, k: T) -> T {
    match *spec {
        KernelSpec::BetaExponential { beta } => g_abs_bound(T::lit(beta), k),
        _ => g_unchecked(spec, k).norm(),
    }
}

/// `∫_{|k|>K} |g(k)| dk`.
pub fn tail_mass<T: Real>(spec: &KernelSpec, big_k: T) -> T {
    tail_integral(big_k, |k| g_abs(spec, k)) + tail_integral(big_k, |k| g_abs(spec, -k))
}

/// Bound on `|∫_{|k|>K} g(k) e^{−ikx} dk|`.
///
/// For `x ≠ 0` this is the smaller of the modulus tail and the
/// integration-by-parts bound `(|g(±K)| + ∫|g′|)/|x|`.
pub fn tail_bound<T: Real>(spec: &KernelSpec, x: T, big_k: T) -> T {
    let modulus = tail_mass(spec, big_k);
    if x == T::zero() {
        return modulus;
    }
    let parts = g_abs(spec, big_k)
        + g_abs(spec, -big_k)
        + tail_integral(big_k, |k| g_prime(spec, k).norm())
        + tail_integral(big_k, |k| g_prime(spec, -k).norm());
    modulus.min(parts / x.abs())
}

/// Smallest power-of-two-bracketed `K` (refined by bisection) with `tail_bound ≤ budget`.
pub fn tail_cutoff<T: Real>(spec: &KernelSpec, x: T, budget: T) -> Result<T> {
    spec.validate()?;
    let mut hi = T::one();
    let mut guard = 0;
    while tail_bound(spec, x, hi) > budget {
        hi *= T::lit(2.0);
        guard += 1;
        if guard > 60 {
            return Err(LchsError::Numeric(format!("no tail cutoff reaches budget {budget}")));
        }
    }
    let mut lo = hi / T::lit(2.0);
    if guard == 0 {
        return Ok(hi);
    }
    for _ in 0..40 {
        let mid = (lo + hi) * T::lit(0.5);
        if tail_bound(spec, x, mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= hi * T::lit(1e-3) {
            break;
        }
    }
    Ok(hi)
}

/// `∫ g(k) e^{−ikx} dk` over `[−k_max, k_max]` on graded panels.
fn oscillatory_integral<T: Real>(spec: &KernelSpec, x: T, k_max: T, tol: T) -> Result<Cplx<T>> {
    let cap = if x == T::zero() {
        T::max_value()
    } else {
        T::PI() / x.abs()
    };
    integrate_symmetric(k_max, cap, tol, |k| g_unchecked(spec, k) * cis(-k * x))
}

/// `|∫_{−k_max}^{k_max} g − 1|`; fails if `k_max` leaves a tail above `tol/2`.
pub fn verify_normalization<T: Real>(spec: &KernelSpec, k_max: T, tol: T) -> Result<T> {
    spec.validate()?;
    let tail = tail_mass(spec, k_max);
    if tail >= tol / T::lit(2.0) {
        return Err(LchsError::Precondition(format!(
            "k_max = {k_max} leaves tail mass {tail} ≥ tol/2"
        )));
    }
    let v = oscillatory_integral(spec, T::zero(), k_max, tol / T::lit(2.0))?;
    Ok((v - cplx(T::one(), T::zero())).norm())
}

/// Normalization residual with `k_max` picked from the tail majorant.
pub fn normalization_residual<T: Real>(spec: &KernelSpec, tol: T) -> Result<T> {
    let k_max = tail_cutoff(spec, T::zero(), tol / T::lit(4.0))?;
    verify_normalization(spec, k_max, tol)
}

/// `∫ g(k) e^{−ikx} dk` to within `tol`; equals `e^{−x}` for `x ≥ 0`.
pub fn fourier_check<T: Real>(spec: &KernelSpec, x: T, tol: T) -> Result<Cplx<T>> {
    spec.validate()?;
    if !x.is_finite() {
        return Err(LchsError::Domain(format!("x must be finite, got {x}")));
    }
    let k_max = tail_cutoff(spec, x, tol / T::lit(4.0))?;
    oscillatory_integral(spec, x, k_max, tol / T::lit(2.0))
}

/// `∫_{−K}^{K} |g(k)| dk`.
pub fn abs_integral<T: Real>(spec: &KernelSpec, big_k: T, tol: T) -> Result<T> {
    let v = integrate_symmetric(big_k, T::max_value(), tol, |k| cplx(g_abs(spec, k), T::zero()))?;
    Ok(v.re)
}

/// `∫_{−∞}^{∞} |g(k)| dk`.
pub fn abs_integral_total<T: Real>(spec: &KernelSpec, tol: T) -> Result<T> {
    let k_max = tail_cutoff(spec, T::zero(), tol / T::lit(4.0))?;
    Ok(abs_integral(spec, k_max, tol / T::lit(2.0))? + tail_mass(spec, k_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::real;

    const BETA_FAMILY: [f64; 5] = [0.3, 0.5, 0.7, 0.8, 0.9];

    #[test]
    fn c_beta_closed_form() {
        assert!((c_beta(1e-12_f64).unwrap() - 2.0 * std::f64::consts::PI * (-1.0f64).exp()).abs() < 1e-10);
        assert!((c_beta(0.5_f64).unwrap() - 1.527_547_493_726_536).abs() < 1e-14);
        assert!(c_beta(0.2_f64).unwrap() > c_beta(0.8).unwrap());
        assert!(matches!(c_beta(1.0_f64), Err(LchsError::Domain(_))));
        assert!(c_beta(0.0_f64).is_err());
    }

    #[test]
    fn f_at_origin() {
        let v = f_eval(&KernelSpec::Cauchy, real(0.0_f64)).unwrap();
        assert!((v.re - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        let v = f_eval(&KernelSpec::BetaExponential { beta: 0.5 }, real(0.0_f64)).unwrap();
        let expect = (2f64.sqrt() - 1.0).exp() / (2.0 * std::f64::consts::PI);
        assert!((v.re - expect).abs() < 1e-15 && v.im.abs() < 1e-15);
        assert!((v.re - 0.240_83).abs() < 1e-5);
    }

    #[test]
    fn upper_half_plane_rejected() {
        let err = f_eval(&KernelSpec::Cauchy, cplx(0.0_f64, 0.1)).unwrap_err();
        assert!(matches!(err, LchsError::Domain(_)));
        assert!(f_eval(&KernelSpec::Cauchy, cplx(0.0_f64, -0.1)).is_ok());
    }

    #[test]
    fn invalid_beta_rejected() {
        assert!(KernelSpec::beta_exponential(1.0).is_err());
        assert!(g_eval(&KernelSpec::BetaExponential { beta: 0.0 }, 1.0_f64).is_err());
    }

    #[test]
    fn g_examples() {
        for spec in [KernelSpec::Cauchy, KernelSpec::BetaExponential { beta: 0.6 }] {
            let g0: Cplx<f64> = g_eval(&spec, 0.0).unwrap();
            let f0 = f_eval(&spec, real(0.0)).unwrap();
            assert_eq!(g0, f0);
        }
        let g1: Cplx<f64> = g_eval(&KernelSpec::Cauchy, 1.0).unwrap();
        assert!((g1 - real(1.0 / (2.0 * std::f64::consts::PI))).norm() < 1e-15);
        // the β-kernel's heavier core gives way to its faster decay between k = 20 and k = 30
        let beta = KernelSpec::BetaExponential { beta: 0.75 };
        let abs = |spec: &KernelSpec, k: f64| g_eval(spec, k).unwrap().norm();
        assert!((abs(&beta, 10.0) - 0.006_690_317_914_130_785).abs() < 1e-15);
        assert!((abs(&KernelSpec::Cauchy, 10.0) - 0.003_151_583_031_522_68).abs() < 1e-15);
        for k in [30.0, 50.0, 100.0] {
            assert!(abs(&beta, k) < abs(&KernelSpec::Cauchy, k));
        }
    }

    #[test]
    fn modulus_formula_matches_evaluation() {
        for beta in [0.2, 0.5, 0.75, 0.95] {
            let spec = KernelSpec::BetaExponential { beta };
            for i in -40..=40 {
                let k = i as f64 * 0.73;
                let direct: Cplx<f64> = g_eval(&spec, k).unwrap();
                let bound: f64 = g_abs_bound(beta, k);
                assert!(
                    (direct.norm() - bound).abs() <= 1e-13 * bound.max(1e-300),
                    "beta {beta} k {k}"
                );
            }
        }
    }

    #[test]
    fn modulus_majorant_for_large_k() {
        for beta in [0.3_f64, 0.75, 0.9] {
            let c = c_beta(beta).unwrap();
            for i in 0..40 {
                let k = 10f64.powf(i as f64 * 0.075);
                let m = 1.0 / (c * k * (k.powf(beta) * (beta * std::f64::consts::FRAC_PI_2).cos()).exp());
                assert!(g_abs_bound(beta, k) <= m * (1.0 + 1e-14));
                assert!(g_abs_bound(beta, -k) <= m * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn f_decay_bound_on_log_grid() {
        for beta in BETA_FAMILY {
            let spec = KernelSpec::BetaExponential { beta };
            let damp = (beta * std::f64::consts::FRAC_PI_2).cos();
            for i in 0..=60 {
                let k = 10f64.powf(i as f64 / 20.0);
                for s in [k, -k] {
                    let f: Cplx<f64> = f_eval(&spec, real(s)).unwrap();
                    assert!(f.norm() <= (-damp * k.powf(beta)).exp());
                }
            }
        }
    }

    #[test]
    fn normalization_examples() {
        assert!(normalization_residual(&KernelSpec::Cauchy, 1e-8_f64).unwrap() < 1e-8);
        let spec = KernelSpec::BetaExponential { beta: 0.5 };
        assert!(normalization_residual(&spec, 1e-8_f64).unwrap() < 1e-8);
        let spec = KernelSpec::BetaExponential { beta: 0.9 };
        assert!(normalization_residual(&spec, 1e-6_f64).unwrap() < 1e-6);
    }

    #[test]
    fn normalization_family() {
        for beta in BETA_FAMILY {
            let spec = KernelSpec::BetaExponential { beta };
            let r = normalization_residual(&spec, 1e-8_f64).unwrap();
            assert!(r < 1e-8, "beta {beta}: {r}");
        }
    }

    #[test]
    fn verify_normalization_rejects_short_window() {
        let err = verify_normalization(&KernelSpec::Cauchy, 10.0_f64, 1e-8).unwrap_err();
        assert!(matches!(err, LchsError::Precondition(_)));
    }

    #[test]
    fn alternate_variants_are_normalized() {
        for spec in [
            KernelSpec::PolyPower { p: 2 },
            KernelSpec::PolyPower { p: 3 },
            KernelSpec::LogPower { p: 2 },
            KernelSpec::LogPower { p: 3 },
        ] {
            let r = normalization_residual(&spec, 1e-8_f64).unwrap();
            assert!(r < 1e-8, "{spec:?}: {r}");
        }
    }

    #[test]
    fn fourier_examples() {
        let one: Cplx<f64> = fourier_check(&KernelSpec::Cauchy, 0.0, 1e-8).unwrap();
        assert!((one - real(1.0)).norm() < 1e-8);
        let e1 = (-1.0f64).exp();
        let v: Cplx<f64> = fourier_check(&KernelSpec::Cauchy, 1.0, 1e-8).unwrap();
        assert!((v - real(e1)).norm() < 1e-8);
        let v: Cplx<f64> = fourier_check(&KernelSpec::Cauchy, -1.0, 1e-8).unwrap();
        assert!((v - real(e1)).norm() < 1e-8);
    }

    #[test]
    fn fourier_spec_independence() {
        let specs = [
            KernelSpec::Cauchy,
            KernelSpec::BetaExponential { beta: 0.3 },
            KernelSpec::BetaExponential { beta: 0.75 },
            KernelSpec::BetaExponential { beta: 0.9 },
            KernelSpec::PolyPower { p: 2 },
            KernelSpec::LogPower { p: 2 },
        ];
        for spec in specs {
            for x in [0.0, 0.5, 1.0, 2.0, 5.0] {
                let v: Cplx<f64> = fourier_check(&spec, x, 1e-8).unwrap();
                assert!((v - real((-x).exp())).norm() < 1e-6, "{spec:?} x={x}: {v}");
                assert!(v.im.abs() < 1e-8, "{spec:?} x={x}: {v}");
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let s: KernelSpec = serde_json::from_str(r#"{"variant": "beta_exponential", "beta": 0.75}"#).unwrap();
        assert_eq!(s, KernelSpec::BetaExponential { beta: 0.75 });
        let c: KernelSpec = serde_json::from_str(r#"{"variant": "cauchy"}"#).unwrap();
        assert_eq!(c, KernelSpec::Cauchy);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"variant":"cauchy"}"#);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"variant": "cauchy", "beta": 1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"variant": "beta_exponential", "beta": 1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"variant": "poly_power", "p": 2, "q": 1}"#).is_err());
        let back: KernelSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
