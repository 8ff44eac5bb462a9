//! Importance-sampling estimator of `u(T)* O u(T)` over coefficient pairs.
//!
//! Inner products are evaluated exactly; an optional Gaussian channel of
//! user-set width stands in for measurement shot noise.

use std::cell::OnceCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{LchsError, Result};
use crate::linalg::{cartesian_split, hermitian_eigen, unitary_evolution, ComplexMatrix, OdeProblem};
use crate::quadrature::QuadratureGrid;
use crate::scalar::{cis, cplx, real, CompensatedSum, Cplx, Real};

/// Stream ids carved out of one seed.
const RE_STREAM: u64 = 0;
const IM_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Pairs `(l, j)` in lexicographic order, index `l·M + j`, with the
/// decomposition `c̄_l c_j = Σ|Re|·(sign, prob) + i Σ|Im|·(sign, prob)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan<T: Real> {
    pub node_count: usize,
    pub pair_count: usize,
    pub re_probs: Vec<T>,
    pub im_probs: Vec<T>,
    pub re_signs: Vec<i8>,
    pub im_signs: Vec<i8>,
    pub re_mass: T,
    pub im_mass: T,
    re_cdf: Vec<T>,
    im_cdf: Vec<T>,
}

impl<T: Real> SamplingPlan<T> {
    pub fn pair(&self, index: usize) -> (usize, usize) {
        (index / self.node_count, index % self.node_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObservableEstimate {
    pub value_re: f64,
    pub value_im: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl ObservableEstimate {
    pub fn value(&self) -> Cplx<f64> {
        cplx(self.value_re, self.value_im)
    }
}

fn sign_of<T: Real>(x: T) -> i8 {
    if x < T::zero() {
        -1
    } else {
        1
    }
}

fn normalize<T: Real>(weights: &[T]) -> (T, Vec<T>, Vec<T>) {
    let mass = weights.iter().fold(CompensatedSum::default(), |mut s, &w| {
        s.add(real(w));
        s
    });
    let mass = mass.value().re;
    if mass == T::zero() {
        return (mass, vec![T::zero(); weights.len()], vec![T::zero(); weights.len()]);
    }
    let probs: Vec<T> = weights.iter().map(|&w| w / mass).collect();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = T::zero();
    for &p in &probs {
        acc += p;
        cdf.push(acc);
    }
    (mass, probs, cdf)
}

pub fn build_plan<T: Real>(grid: &QuadratureGrid<T>) -> Result<SamplingPlan<T>> {
    let m = grid.coeffs.len();
    if m == 0 {
        return Err(LchsError::Precondition("sampling plan needs a nonempty grid".into()));
    }
    let mut re_w = Vec::with_capacity(m * m);
    let mut im_w = Vec::with_capacity(m * m);
    let mut re_signs = Vec::with_capacity(m * m);
    let mut im_signs = Vec::with_capacity(m * m);
    for cl in &grid.coeffs {
        for cj in &grid.coeffs {
            let p = cl.conj() * cj;
            re_w.push(p.re.abs());
            im_w.push(p.im.abs());
            re_signs.push(sign_of(p.re));
            im_signs.push(sign_of(p.im));
        }
    }
    let (re_mass, re_probs, re_cdf) = normalize(&re_w);
    let (im_mass, im_probs, im_cdf) = normalize(&im_w);
    Ok(SamplingPlan {
        node_count: m,
        pair_count: m * m,
        re_probs,
        im_probs,
        re_signs,
        im_signs,
        re_mass,
        im_mass,
        re_cdf,
        im_cdf,
    })
}

/// `⟨u₀| U_l† O U_j |u₀⟩`.
pub fn exact_inner<T: Real>(
    u0: &[Cplx<T>],
    obs: &ComplexMatrix<T>,
    u_l: &ComplexMatrix<T>,
    u_j: &ComplexMatrix<T>,
) -> Result<Cplx<T>> {
    let n = u0.len();
    if obs.dim() != n || u_l.dim() != n || u_j.dim() != n {
        return Err(LchsError::Dimension(
            "u0, O and the unitaries must share one dimension".into(),
        ));
    }
    Ok(inner_vectors(&u_l.mul_vec(u0), obs, &u_j.mul_vec(u0)))
}

/// `⟨x| O |y⟩`.
fn inner_vectors<T: Real>(x: &[Cplx<T>], obs: &ComplexMatrix<T>, y: &[Cplx<T>]) -> Cplx<T> {
    x.iter()
        .zip(obs.mul_vec(y))
        .fold(real(T::zero()), |s, (a, b)| s + a.conj() * b)
}

/// Homogeneous problem plus grid with a per-node cache of `U(T, k_j)|u₀⟩`.
pub struct EvolutionCache<'a, T: Real> {
    problem: &'a OdeProblem<T>,
    grid: &'a QuadratureGrid<T>,
    ham_tol: T,
    states: Vec<OnceCell<Vec<Cplx<T>>>>,
}

impl<'a, T: Real> EvolutionCache<'a, T> {
    pub fn new(problem: &'a OdeProblem<T>, grid: &'a QuadratureGrid<T>, ham_tol: T) -> Result<Self> {
        if problem.b.is_some() {
            return Err(LchsError::Precondition(
                "the hybrid estimator covers homogeneous problems only".into(),
            ));
        }
        problem.psd_check(T::lit(crate::linalg::DEFAULT_TOL_PSD))?;
        Ok(Self {
            problem,
            grid,
            ham_tol,
            states: (0..grid.nodes.len()).map(|_| OnceCell::new()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// `U(T, k_j)|u₀⟩`, computed on first use.
    pub fn state(&self, j: usize) -> Result<&[Cplx<T>]> {
        if let Some(v) = self.states[j].get() {
            return Ok(v);
        }
        let k = self.grid.nodes[j];
        let p = self.problem;
        let v = if p.a.is_constant() {
            let pair = cartesian_split(&p.a.at(T::zero()));
            let eig = hermitian_eigen(&pair.generator(k));
            eig.apply_fn(|x| cis(-x * p.horizon)).mul_vec(&p.u0)
        } else {
            unitary_evolution(&p.pair(), k, T::zero(), p.horizon, self.ham_tol)?.mul_vec(&p.u0)
        };
        Ok(self.states[j].get_or_init(|| v))
    }

    fn inner(&self, l: usize, j: usize, obs: &ComplexMatrix<T>) -> Result<Cplx<T>> {
        Ok(inner_vectors(self.state(l)?, obs, self.state(j)?))
    }
}

/// How [`estimate_observable`] draws pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EstimatorOptions {
    /// Probability-weighted sum over every pair instead of sampling.
    pub full_enumeration: bool,
    /// Standard deviation of additive Gaussian noise on each sampled inner
    /// product, applied independently to real and imaginary parts.
    pub noise_sd: Option<f64>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn draw<T: Real>(cdf: &[T], rng: &mut ChaCha8Rng) -> usize {
    let u = T::lit(rng.random::<f64>()) * *cdf.last().expect("nonempty cdf");
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Mean and variance of the mean for one of the two sampled parts.
#[allow(clippy::too_many_arguments)]
fn sample_part<T: Real>(
    plan: &SamplingPlan<T>,
    cache: &EvolutionCache<'_, T>,
    obs: &ComplexMatrix<T>,
    n: usize,
    cdf: &[T],
    signs: &[i8],
    rng: &mut ChaCha8Rng,
    noise: &mut Option<(Normal<f64>, ChaCha8Rng)>,
) -> Result<(Cplx<T>, T)> {
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let p = draw(cdf, rng);
        let (l, j) = plan.pair(p);
        let mut x = cache.inner(l, j, obs)?;
        if let Some((dist, nrng)) = noise.as_mut() {
            x += cplx(T::lit(dist.sample(nrng)), T::lit(dist.sample(nrng)));
        }
        xs.push(if signs[p] < 0 { -x } else { x });
    }
    let count = T::from_usize_lossy(n);
    let mean = xs.iter().fold(real(T::zero()), |s, &x| s + x) / count;
    let var = if n > 1 {
        xs.iter().fold(T::zero(), |s, &x| s + (x - mean).norm_sqr()) / (count - T::one())
    } else {
        T::zero()
    };
    Ok((mean, var / count))
}

/// `re_mass·mean(sign·I) + i·im_mass·mean(sign·I)` over `n_samples` draws per part.
pub fn estimate_observable<T: Real>(
    plan: &SamplingPlan<T>,
    cache: &EvolutionCache<'_, T>,
    obs: &ComplexMatrix<T>,
    n_samples: usize,
    seed: u64,
    options: EstimatorOptions,
) -> Result<ObservableEstimate> {
    if plan.pair_count == 0 || plan.node_count != cache.grid.nodes.len() {
        return Err(LchsError::Precondition(
            "plan and grid disagree or plan is empty".into(),
        ));
    }
    if obs.dim() != cache.dim() {
        return Err(LchsError::Dimension("observable and problem dimensions differ".into()));
    }
    let i = cplx(T::zero(), T::one());
    if options.full_enumeration {
        let mut acc = CompensatedSum::default();
        for p in 0..plan.pair_count {
            let (rp, ip) = (plan.re_probs[p], plan.im_probs[p]);
            if rp == T::zero() && ip == T::zero() {
                continue;
            }
            let (l, j) = plan.pair(p);
            let x = cache.inner(l, j, obs)?;
            let rs = T::from_i8(plan.re_signs[p]).expect("sign");
            let is = T::from_i8(plan.im_signs[p]).expect("sign");
            acc.add(x * (plan.re_mass * rp * rs) + i * x * (plan.im_mass * ip * is));
        }
        let v = acc.value();
        return Ok(ObservableEstimate {
            value_re: v.re.to_f64_lossy(),
            value_im: v.im.to_f64_lossy(),
            stderr: 0.0,
            n_samples: plan.pair_count,
            seed,
        });
    }
    if n_samples == 0 {
        return Err(LchsError::Precondition("need at least one sample".into()));
    }
    let mut noise = match options.noise_sd {
        Some(sd) => Some((
            Normal::new(0.0, sd).map_err(|e| LchsError::Domain(format!("noise width: {e}")))?,
            stream(seed, NOISE_STREAM),
        )),
        None => None,
    };
    let mut value = real(T::zero());
    let mut var = T::zero();
    if plan.re_mass > T::zero() {
        let mut rng = stream(seed, RE_STREAM);
        let (m, v) = sample_part(
            plan,
            cache,
            obs,
            n_samples,
            &plan.re_cdf,
            &plan.re_signs,
            &mut rng,
            &mut noise,
        )?;
        value += m * plan.re_mass;
        var += v * plan.re_mass * plan.re_mass;
    }
    if plan.im_mass > T::zero() {
        let mut rng = stream(seed, IM_STREAM);
        let (m, v) = sample_part(
            plan,
            cache,
            obs,
            n_samples,
            &plan.im_cdf,
            &plan.im_signs,
            &mut rng,
            &mut noise,
        )?;
        value += i * m * plan.im_mass;
        var += v * plan.im_mass * plan.im_mass;
    }
    Ok(ObservableEstimate {
        value_re: value.re.to_f64_lossy(),
        value_im: value.im.to_f64_lossy(),
        stderr: var.sqrt().to_f64_lossy(),
        n_samples,
        seed,
    })
}

/// `⌈(‖O‖²/ε²) ln(2/δ)⌉` with leading constant 1.
pub fn sample_count(eps: f64, delta: f64, obs_norm: f64) -> Result<u64> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) || !(obs_norm > 0.0) {
        return Err(LchsError::Domain("need eps > 0, 0 < delta < 1 and ‖O‖ > 0".into()));
    }
    let raw = obs_norm * obs_norm / (eps * eps) * (2.0 / delta).ln();
    // absorb the rounding noise of the product before taking the ceiling
    let snapped = if (raw - raw.round()).abs() <= 1e-9 * raw.max(1.0) {
        raw.round()
    } else {
        raw.ceil()
    };
    Ok(snapped as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::linalg::TimeDependentMatrix;
    use crate::quadrature::{build_grid, choose_grid, TruncationRule};

    fn grid_from(coeffs: Vec<Cplx<f64>>) -> QuadratureGrid<f64> {
        let mut g = build_grid(&KernelSpec::Cauchy, 1.0, 1.0, 1).unwrap();
        g.nodes = (0..coeffs.len()).map(|i| i as f64).collect();
        g.coeffs = coeffs;
        g
    }

    fn scalar_setup(eps: f64) -> (OdeProblem<f64>, QuadratureGrid<f64>) {
        let spec = KernelSpec::BetaExponential { beta: 0.75 };
        let p = OdeProblem::homogeneous(
            TimeDependentMatrix::constant(ComplexMatrix::from_real_rows(&[&[1.0]]).unwrap()),
            vec![real(1.0)],
            1.0,
        )
        .unwrap();
        let g = choose_grid(&spec, TruncationRule::Analytic, eps, eps, 1.0, 1.0)
            .unwrap()
            .build(&spec)
            .unwrap();
        (p, g)
    }

    #[test]
    fn plan_examples() {
        let p = build_plan(&grid_from(vec![real(0.7)])).unwrap();
        assert_eq!(p.re_probs, vec![1.0]);
        assert_eq!(p.re_signs, vec![1]);
        assert_eq!(p.im_mass, 0.0);

        let p = build_plan(&grid_from(vec![cplx(0.0, 1.0), cplx(0.0, -1.0)])).unwrap();
        assert_eq!(p.im_mass, 0.0);
        assert_eq!(p.re_signs, vec![1, -1, -1, 1]);
        assert!((p.re_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let (_, g) = scalar_setup(1e-2);
        let p = build_plan(&g).unwrap();
        let total: Cplx<f64> = g.coeffs.iter().sum();
        assert!(p.re_mass + p.im_mass >= total.norm_sqr() - 1e-12);
        let c1: f64 = g.coeffs.iter().map(|c| c.norm()).sum();
        assert!(p.re_mass <= c1 * c1 + 1e-12 && p.im_mass <= c1 * c1 + 1e-12);
        assert!((p.re_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.im_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(build_plan(&grid_from(vec![])).is_err());
    }

    #[test]
    fn exact_inner_examples() {
        let u0 = vec![real(1.0), real(0.0)];
        let id = ComplexMatrix::<f64>::identity(2);
        let z = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!((exact_inner(&u0, &id, &id, &id).unwrap() - real(1.0)).norm() < 1e-15);
        assert!((exact_inner(&u0, &z, &id, &id).unwrap() - real(1.0)).norm() < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ul = ComplexMatrix::from_rows(vec![vec![real(s), cplx(0.0, s)], vec![cplx(0.0, s), real(s)]]).unwrap();
        let uj = ComplexMatrix::from_diagonal(&[cis(0.3), cis(-1.1)]);
        let obs =
            ComplexMatrix::from_rows(vec![vec![real(0.5), cplx(0.2, 0.1)], vec![cplx(0.2, -0.1), real(-0.3)]]).unwrap();
        let u = vec![cplx(0.6, 0.0), cplx(0.0, 0.8)];
        let a = exact_inner(&u, &obs, &ul, &uj).unwrap();
        let b = exact_inner(&u, &obs, &uj, &ul).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        assert!(exact_inner(&u0, &ComplexMatrix::identity(3), &id, &id).is_err());
    }

    #[test]
    fn full_enumeration_matches_double_sum() {
        let (p, g) = scalar_setup(1e-2);
        let cache = EvolutionCache::new(&p, &g, 1e-10).unwrap();
        let plan = build_plan(&g).unwrap();
        let obs = ComplexMatrix::from_real_rows(&[&[1.0]]).unwrap();
        let est = estimate_observable(
            &plan,
            &cache,
            &obs,
            0,
            1,
            EstimatorOptions {
                full_enumeration: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mut direct = CompensatedSum::default();
        for (l, cl) in g.coeffs.iter().enumerate() {
            for (j, cj) in g.coeffs.iter().enumerate() {
                direct.add(cl.conj() * cj * cache.inner(l, j, &obs).unwrap());
            }
        }
        assert!((est.value() - direct.value()).norm() < 1e-10);
        assert!((est.value_re - (-2.0f64).exp()).abs() < 1e-2);
    }

    #[test]
    fn sampling_is_deterministic_and_converges() {
        let (p, g) = scalar_setup(1e-3);
        let cache = EvolutionCache::new(&p, &g, 1e-10).unwrap();
        let plan = build_plan(&g).unwrap();
        let obs = ComplexMatrix::from_real_rows(&[&[1.0]]).unwrap();
        let a = estimate_observable(&plan, &cache, &obs, 500, 9, EstimatorOptions::default()).unwrap();
        let b = estimate_observable(&plan, &cache, &obs, 500, 9, EstimatorOptions::default()).unwrap();
        assert_eq!(a, b);
        let big = estimate_observable(&plan, &cache, &obs, 100_000, 4, EstimatorOptions::default()).unwrap();
        assert!((big.value_re - (-2.0f64).exp()).abs() < 4.0 * big.stderr + 1e-3);
        assert!(big.stderr < a.stderr);
    }

    #[test]
    fn noise_widens_stderr() {
        let (p, g) = scalar_setup(1e-2);
        let cache = EvolutionCache::new(&p, &g, 1e-10).unwrap();
        let plan = build_plan(&g).unwrap();
        let obs = ComplexMatrix::from_real_rows(&[&[1.0]]).unwrap();
        let quiet = estimate_observable(&plan, &cache, &obs, 2000, 3, EstimatorOptions::default()).unwrap();
        let noisy = estimate_observable(
            &plan,
            &cache,
            &obs,
            2000,
            3,
            EstimatorOptions {
                noise_sd: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(noisy.stderr > quiet.stderr);
    }

    #[test]
    fn sample_count_examples() {
        assert_eq!(sample_count(0.1, 0.05, 1.0).unwrap(), 369);
        let a = sample_count(0.01, 0.05, 1.0).unwrap() as f64;
        let b = sample_count(0.005, 0.05, 1.0).unwrap() as f64;
        assert!((b / a - 4.0).abs() < 1e-3);
        let c = sample_count(0.01, 0.05 * 0.05, 1.0).unwrap() as f64;
        assert!(c <= 2.0 * a);
        assert!(sample_count(0.1, 1.0, 1.0).is_err());
    }
}
