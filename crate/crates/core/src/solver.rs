//! Discrete LCHS approximations of the propagator and of the full solution `u(T)`.

use std::cell::OnceCell;

use crate::error::{LchsError, Result};
use crate::kernels::{g_unchecked, KernelSpec};
use crate::linalg::{
    cartesian_split, expm, hermitian_eigen, reference_solution, unitary_evolution, vec_distance, vec_norm,
    ComplexMatrix, HermitianPair, OdeProblem, TimeDependentPair, DEFAULT_STEP_CAP, DEFAULT_TOL_PSD,
};
use crate::quadrature::{
    build_grid, coefficient_one_norm, gauss_legendre, select_quadrature_params, select_truncation, QuadratureGrid,
    TruncationRule,
};
use crate::scalar::{cis, cplx, real, CompensatedSum, Cplx, Real};

/// Safety factor applied to the finite-difference estimates of Λ and Ξ.
pub const LAMBDA_XI_SAFETY: f64 = 1.25;

/// Cached Magnus steps are capped at this many matrix entries per level.
const CACHE_ENTRY_LIMIT: usize = 1 << 22;

/// Composite Gauss grid over `[0, T]` for the inhomogeneous integral.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T: Real> {
    pub step_h2: T,
    pub order_q2: usize,
    pub panels: usize,
    pub nodes: Vec<T>,
    /// `c′ = w′ ‖b(s)‖`.
    pub coeffs: Vec<T>,
    /// `b(s)/‖b(s)‖`, or zero where `b(s) = 0`.
    pub directions: Vec<Vec<Cplx<T>>>,
}

impl<T: Real> TimeGrid<T> {
    pub fn total_m(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ c′`.
    pub fn coefficient_sum(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |s, &c| s + c)
    }
}

/// Parameters a solve was run with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveParameters<T: Real> {
    pub trunc_k: T,
    pub step_h1: T,
    pub order_q: usize,
    pub step_h2: Option<T>,
    pub order_q2: Option<usize>,
    pub ham_tol: T,
}

/// LCHS estimate of `u(T)` next to the oracle value.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T: Real> {
    pub approx_u: Vec<Cplx<T>>,
    pub oracle_u: Vec<Cplx<T>>,
    pub abs_error: T,
    /// Distance between the normalized approximate and oracle states.
    pub state_error: T,
    /// `(M, M′)`.
    pub grid_sizes: (usize, usize),
    pub parameters: SolveParameters<T>,
}

impl<T: Real> SolveReport<T> {
    fn new(
        approx_u: Vec<Cplx<T>>,
        oracle_u: Vec<Cplx<T>>,
        grid: &QuadratureGrid<T>,
        tg: Option<&TimeGrid<T>>,
        ham_tol: T,
    ) -> Self {
        let abs_error = vec_distance(&approx_u, &oracle_u);
        let state_error = normalized_distance(&approx_u, &oracle_u);
        Self {
            approx_u,
            oracle_u,
            abs_error,
            state_error,
            grid_sizes: (grid.total_m(), tg.map_or(0, TimeGrid::total_m)),
            parameters: SolveParameters {
                trunc_k: grid.trunc_k,
                step_h1: grid.step_h1,
                order_q: grid.order_q,
                step_h2: tg.map(|t| t.step_h2),
                order_q2: tg.map(|t| t.order_q2),
                ham_tol,
            },
        }
    }
}

fn normalized_distance<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> T {
    let na = vec_norm(a);
    let nb = vec_norm(b);
    if na == T::zero() || nb == T::zero() {
        return if na == nb { T::zero() } else { T::one() };
    }
    let x: Vec<_> = a.iter().map(|&z| z / na).collect();
    let y: Vec<_> = b.iter().map(|&z| z / nb).collect();
    vec_distance(&x, &y)
}

/// Default Hamiltonian-simulation tolerance `ε/(10 Σ|c_j|)`.
pub fn default_ham_tol<T: Real>(eps: T, grid: &QuadratureGrid<T>) -> T {
    eps / (T::lit(10.0) * coefficient_one_norm(grid))
}

/// Per-node tolerances `ham_tol · Σ|c| / (M |c_j|)`, capped at 2.
///
/// Their `|c_j|`-weighted sum is `ham_tol · Σ|c|`, the same total as a
/// uniform split, while nodes with negligible weight get loose tolerances.
pub fn node_tolerances<T: Real>(grid: &QuadratureGrid<T>, ham_tol: T) -> Vec<T> {
    let m = T::from_usize_lossy(grid.total_m().max(1));
    let norm = coefficient_one_norm(grid);
    let cap = T::lit(2.0);
    grid.coeffs
        .iter()
        .map(|c| {
            let w = c.norm();
            if w == T::zero() {
                cap
            } else {
                (ham_tol * norm / (m * w)).min(cap)
            }
        })
        .collect()
}

/// One fourth-order Magnus step with exponent `Ω(k) = X₀ + k X₁ + k² X₂`.
///
/// With Gauss points `t₁, t₂` and `G = kL + H`,
/// `Ω = −i(h/2)(G₁ + G₂) − (√3/12) h² [G₂, G₁]`, which is anti-Hermitian.
struct MagnusStep<T: Real> {
    x0: ComplexMatrix<T>,
    x1: ComplexMatrix<T>,
    x2: ComplexMatrix<T>,
}

impl<T: Real> MagnusStep<T> {
    fn new(pair: &TimeDependentPair<T>, t0: T, h: T) -> Self {
        let r = T::lit(3.0).sqrt() / T::lit(6.0);
        let half = T::lit(0.5);
        let p1 = pair.at(t0 + h * (half - r));
        let p2 = pair.at(t0 + h * (half + r));
        let c = real(-T::lit(3.0).sqrt() * h * h / T::lit(12.0));
        let drift = cplx(T::zero(), -h * half);
        let comm = |a: &ComplexMatrix<T>, b: &ComplexMatrix<T>| &a.matmul(b) - &b.matmul(a);
        let mut x0 = (&p1.h + &p2.h).scale(drift);
        x0.add_scaled(c, &comm(&p2.h, &p1.h));
        let mut x1 = (&p1.l + &p2.l).scale(drift);
        x1.add_scaled(c, &(&comm(&p2.l, &p1.h) + &comm(&p2.h, &p1.l)));
        let x2 = comm(&p2.l, &p1.l).scale(c);
        Self { x0, x1, x2 }
    }

    fn exponent(&self, k: T) -> ComplexMatrix<T> {
        let mut o = self.x0.clone();
        self.exponent_into(k, &mut o);
        o
    }

    fn exponent_into(&self, k: T, out: &mut ComplexMatrix<T>) {
        let k2 = k * k;
        let parts = self.x0.entries().iter().zip(self.x1.entries()).zip(self.x2.entries());
        for (o, ((&a, &b), &c)) in out.entries_mut().iter_mut().zip(parts) {
            *o = a + b * k + c * k2;
        }
    }
}

/// `r ← e^Ω r`: Taylor series on the vector for `‖Ω‖∞ ≤ 1`, dense [`expm`] otherwise.
///
/// `term` and `next` are scratch buffers of the same length as `r`.
fn expm_apply<T: Real>(
    omega: &ComplexMatrix<T>,
    r: &mut [Cplx<T>],
    term: &mut Vec<Cplx<T>>,
    next: &mut Vec<Cplx<T>>,
) -> Result<()> {
    if omega.inf_norm() > T::one() {
        let v = expm(omega)?.mul_vec(r);
        r.copy_from_slice(&v);
        return Ok(());
    }
    let n = r.len();
    let l1 = |x: &[Cplx<T>]| x.iter().fold(T::zero(), |s, z| s + z.re.abs() + z.im.abs());
    term.clear();
    term.extend_from_slice(r);
    next.resize(n, real(T::zero()));
    let entries = omega.entries();
    for j in 1..=64 {
        let inv = T::one() / T::from_usize_lossy(j);
        for (i, out) in next.iter_mut().enumerate() {
            let row = &entries[i * n..(i + 1) * n];
            let mut acc = real(T::zero());
            for (a, t) in row.iter().zip(term.iter()) {
                acc += *a * *t;
            }
            *out = acc * inv;
        }
        std::mem::swap(term, next);
        for (o, t) in r.iter_mut().zip(term.iter()) {
            *o += *t;
        }
        if l1(term) <= T::epsilon() * l1(r) {
            break;
        }
    }
    Ok(())
}

/// Lazily built Magnus steps over a fixed segmentation of `[0, T]`, shared by all `k`.
struct StepCache<'a, T: Real> {
    pair: &'a TimeDependentPair<T>,
    /// Segment boundaries, starting at 0 and ending at T.
    breaks: Vec<T>,
    levels: Vec<OnceCell<Vec<Vec<MagnusStep<T>>>>>,
}

impl<'a, T: Real> StepCache<'a, T> {
    fn new(pair: &'a TimeDependentPair<T>, breaks: Vec<T>) -> Self {
        Self {
            pair,
            breaks,
            levels: (0..24).map(|_| OnceCell::new()).collect(),
        }
    }

    fn horizon(&self) -> T {
        *self.breaks.last().expect("nonempty breaks") - self.breaks[0]
    }

    /// Step count per segment at `level`: `⌈len · 2^level / T⌉`, zero for empty segments.
    fn step_counts(&self, level: usize) -> Vec<usize> {
        let horizon = self.horizon();
        let scale = T::lit(2.0).powi(level as i32);
        self.breaks
            .windows(2)
            .map(|w| {
                let len = w[1] - w[0];
                if len <= T::zero() {
                    0
                } else {
                    (len * scale / horizon).ceil().to_usize().unwrap_or(usize::MAX).max(1)
                }
            })
            .collect()
    }

    fn total_steps(&self, level: usize) -> usize {
        self.step_counts(level).iter().sum()
    }

    fn build(&self, level: usize) -> Vec<Vec<MagnusStep<T>>> {
        self.breaks
            .windows(2)
            .zip(self.step_counts(level))
            .map(|(w, n)| {
                if n == 0 {
                    return Vec::new();
                }
                let h = (w[1] - w[0]) / T::from_usize_lossy(n);
                (0..n)
                    .map(|i| MagnusStep::new(self.pair, w[0] + h * T::from_usize_lossy(i), h))
                    .collect()
            })
            .collect()
    }

    /// Calls `visit(segment, step)` for every step at `level`, in time order.
    fn for_each_step(&self, level: usize, mut visit: impl FnMut(usize, &MagnusStep<T>) -> Result<()>) -> Result<()> {
        let n = self.pair.dim();
        let fresh;
        let cached = level < self.levels.len() && self.total_steps(level) * 3 * n * n <= CACHE_ENTRY_LIMIT;
        let steps = if cached {
            self.levels[level].get_or_init(|| self.build(level))
        } else {
            fresh = self.build(level);
            &fresh
        };
        for (seg, list) in steps.iter().enumerate() {
            for step in list {
                visit(seg, step)?;
            }
        }
        Ok(())
    }
}

/// `U(T, 0, k)` by step doubling over cached Magnus steps.
fn propagate_matrix<T: Real>(samples: &StepCache<'_, T>, k: T, tol: T, dim: usize) -> Result<ComplexMatrix<T>> {
    let run = |level: usize| -> Result<ComplexMatrix<T>> {
        let mut u = ComplexMatrix::identity(dim);
        samples.for_each_step(level, |_, step| {
            u = expm(&step.exponent(k))?.matmul(&u);
            Ok(())
        })?;
        Ok(u)
    };
    let mut level = 0;
    let mut prev = run(level)?;
    loop {
        level += 1;
        if samples.total_steps(level) > DEFAULT_STEP_CAP {
            return Err(LchsError::Convergence {
                steps: samples.total_steps(level - 1),
                distance: f64::NAN,
            });
        }
        let next = run(level)?;
        let diff = (&next - &prev).spectral_norm();
        if diff < tol {
            return Ok(next);
        }
        prev = next;
    }
}

/// `U(T,0,k) u₀ + Σ_{j′} U(T, s_{j′}, k) v_{j′}` in one forward sweep.
///
/// `injections[i]` is added when the sweep reaches the end of segment `i`.
fn propagate_sweep<T: Real>(
    samples: &StepCache<'_, T>,
    k: T,
    tol: T,
    u0: &[Cplx<T>],
    injections: &[Vec<Cplx<T>>],
) -> Result<Vec<Cplx<T>>> {
    let run = |level: usize| -> Result<Vec<Cplx<T>>> {
        let mut r = u0.to_vec();
        let mut injected = 0usize;
        let mut inject_until = |seg: usize, r: &mut Vec<Cplx<T>>| {
            while injected < injections.len() && injected < seg {
                for (x, y) in r.iter_mut().zip(&injections[injected]) {
                    *x += *y;
                }
                injected += 1;
            }
        };
        let mut omega = ComplexMatrix::zeros(u0.len());
        let (mut term, mut next) = (Vec::new(), Vec::new());
        samples.for_each_step(level, |seg, step| {
            inject_until(seg, &mut r);
            step.exponent_into(k, &mut omega);
            expm_apply(&omega, &mut r, &mut term, &mut next)
        })?;
        inject_until(injections.len(), &mut r);
        Ok(r)
    };
    let mut level = 0;
    let mut prev = run(level)?;
    loop {
        level += 1;
        if samples.total_steps(level) > DEFAULT_STEP_CAP {
            return Err(LchsError::Convergence {
                steps: samples.total_steps(level - 1),
                distance: f64::NAN,
            });
        }
        let next = run(level)?;
        let diff = vec_distance(&next, &prev);
        if diff < tol {
            return Ok(next);
        }
        prev = next;
    }
}

fn check_dims<T: Real>(problem: &OdeProblem<T>) -> Result<()> {
    if problem.a.dim() != problem.dim() {
        return Err(LchsError::Dimension("A and u0 disagree".into()));
    }
    Ok(())
}

/// `Σ_j c_j U(T, k_j)`, summed in ascending node order.
pub fn approx_propagator<T: Real>(
    problem: &OdeProblem<T>,
    grid: &QuadratureGrid<T>,
    ham_tol: T,
) -> Result<ComplexMatrix<T>> {
    check_dims(problem)?;
    problem.psd_check(T::lit(DEFAULT_TOL_PSD))?;
    let n = problem.dim();
    let horizon = problem.horizon;
    let mut acc = vec![CompensatedSum::default(); n * n];
    let mut add = |c: Cplx<T>, u: &ComplexMatrix<T>| {
        for (a, &x) in acc.iter_mut().zip(u.entries()) {
            a.add(c * x);
        }
    };

    if problem.a.is_constant() {
        let pair = cartesian_split(&problem.a.at(T::zero()));
        for (&k, &c) in grid.nodes.iter().zip(&grid.coeffs) {
            let eig = hermitian_eigen(&pair.generator(k));
            add(c, &eig.apply_fn(|x| cis(-x * horizon)));
        }
    } else {
        let td = problem.pair();
        let samples = StepCache::new(&td, vec![T::zero(), horizon]);
        let tols = node_tolerances(grid, ham_tol);
        for ((&k, &c), &tol) in grid.nodes.iter().zip(&grid.coeffs).zip(&tols) {
            let u = if horizon == T::zero() {
                ComplexMatrix::identity(n)
            } else {
                propagate_matrix(&samples, k, tol, n)?
            };
            add(c, &u);
        }
    }
    ComplexMatrix::from_entries(n, acc.iter().map(CompensatedSum::value).collect())
}

/// Same sum as [`approx_propagator`] but built with one independent
/// [`unitary_evolution`] oracle call per node at the uniform tolerance `ham_tol`.
pub fn approx_propagator_direct<T: Real>(
    problem: &OdeProblem<T>,
    grid: &QuadratureGrid<T>,
    ham_tol: T,
) -> Result<ComplexMatrix<T>> {
    check_dims(problem)?;
    problem.psd_check(T::lit(DEFAULT_TOL_PSD))?;
    let n = problem.dim();
    let td = problem.pair();
    let mut acc = vec![CompensatedSum::default(); n * n];
    for (&k, &c) in grid.nodes.iter().zip(&grid.coeffs) {
        let u = unitary_evolution(&td, k, T::zero(), problem.horizon, ham_tol)?;
        for (a, &x) in acc.iter_mut().zip(u.entries()) {
            a.add(c * x);
        }
    }
    ComplexMatrix::from_entries(n, acc.iter().map(CompensatedSum::value).collect())
}

/// Per-node vectors `U(T,0,k)u₀ + Σ_{j′} c′_{j′} U(T,s_{j′},k)|b(s_{j′})⟩`, combined with `c_j`.
fn lchs_vector<T: Real>(
    problem: &OdeProblem<T>,
    grid: &QuadratureGrid<T>,
    tg: Option<&TimeGrid<T>>,
    ham_tol: T,
) -> Result<Vec<Cplx<T>>> {
    check_dims(problem)?;
    problem.psd_check(T::lit(DEFAULT_TOL_PSD))?;
    let n = problem.dim();
    let horizon = problem.horizon;
    let injections: Vec<Vec<Cplx<T>>> = tg
        .map(|tg| {
            tg.directions
                .iter()
                .zip(&tg.coeffs)
                .map(|(d, &c)| d.iter().map(|&z| z * c).collect())
                .collect()
        })
        .unwrap_or_default();
    if injections.iter().any(|v: &Vec<Cplx<T>>| v.len() != n) {
        return Err(LchsError::Dimension("time-grid directions disagree with u0".into()));
    }
    let weight = vec_norm(&problem.u0) + tg.map_or(T::zero(), TimeGrid::coefficient_sum);
    let mut acc = vec![CompensatedSum::default(); n];

    if problem.a.is_constant() {
        let pair = cartesian_split(&problem.a.at(T::zero()));
        let nodes = tg.map(|t| t.nodes.clone()).unwrap_or_default();
        for (&k, &c) in grid.nodes.iter().zip(&grid.coeffs) {
            let eig = hermitian_eigen(&pair.generator(k));
            let vh = eig.vectors.adjoint();
            // coordinates in the eigenbasis: e^{−iλT}(V†u₀) + Σ e^{−iλ(T−s)}(V†v)
            let mut y: Vec<Cplx<T>> = vh.mul_vec(&problem.u0);
            for (yi, &l) in y.iter_mut().zip(&eig.values) {
                *yi *= cis(-l * horizon);
            }
            for (i, &l) in eig.values.iter().enumerate() {
                let row = vh.row(i);
                let mut acc = real(T::zero());
                for (s, inj) in nodes.iter().zip(&injections) {
                    let mut dot = real(T::zero());
                    for (a, b) in row.iter().zip(inj) {
                        dot += *a * *b;
                    }
                    acc += dot * cis(-l * (horizon - *s));
                }
                y[i] += acc;
            }
            let r = eig.vectors.mul_vec(&y);
            for (a, x) in acc.iter_mut().zip(r) {
                a.add(c * x);
            }
        }
    } else {
        let td = problem.pair();
        let mut breaks = vec![T::zero()];
        if let Some(tg) = tg {
            breaks.extend(tg.nodes.iter().copied());
        }
        breaks.push(horizon);
        let samples = StepCache::new(&td, breaks);
        let tols = node_tolerances(grid, ham_tol);
        for ((&k, &c), &tol) in grid.nodes.iter().zip(&grid.coeffs).zip(&tols) {
            let r = if horizon == T::zero() {
                let mut r = problem.u0.clone();
                for inj in &injections {
                    for (x, y) in r.iter_mut().zip(inj) {
                        *x += *y;
                    }
                }
                r
            } else {
                propagate_sweep(
                    &samples,
                    k,
                    tol * weight.max(T::min_positive_value()),
                    &problem.u0,
                    &injections,
                )?
            };
            for (a, x) in acc.iter_mut().zip(r) {
                a.add(c * x);
            }
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// `Σ_j c_j U(T, k_j) u₀` against the oracle at tolerance `ham_tol · Σ|c_j|`.
pub fn solve_homogeneous<T: Real>(
    problem: &OdeProblem<T>,
    grid: &QuadratureGrid<T>,
    ham_tol: T,
) -> Result<SolveReport<T>> {
    if problem.b.is_some() {
        return Err(LchsError::Precondition("solve_homogeneous requires b ≡ 0".into()));
    }
    let approx = lchs_vector(problem, grid, None, ham_tol)?;
    let oracle_tol = ham_tol * coefficient_one_norm(grid);
    let oracle = reference_solution(problem, oracle_tol)?;
    Ok(SolveReport::new(approx, oracle, grid, None, ham_tol))
}

/// Homogeneous part plus `Σ_{j′} Σ_j c′_{j′} c_j U(T, s_{j′}, k_j)|b(s_{j′})⟩`.
pub fn solve_inhomogeneous<T: Real>(
    problem: &OdeProblem<T>,
    grid: &QuadratureGrid<T>,
    tg: &TimeGrid<T>,
    ham_tol: T,
) -> Result<SolveReport<T>> {
    if problem.b.is_none() {
        return Err(LchsError::Precondition("solve_inhomogeneous requires b".into()));
    }
    if tg.nodes.iter().any(|&s| s < T::zero() || s > problem.horizon) {
        return Err(LchsError::Precondition("time-grid nodes fall outside [0, T]".into()));
    }
    let approx = lchs_vector(problem, grid, Some(tg), ham_tol)?;
    let weight = vec_norm(&problem.u0) + tg.coefficient_sum();
    let oracle_tol = ham_tol * coefficient_one_norm(grid) * weight.max(T::one());
    let oracle = reference_solution(problem, oracle_tol)?;
    Ok(SolveReport::new(approx, oracle, grid, Some(tg), ham_tol))
}

/// `h₂ = 1/(eK(Λ+Ξ))`, `Q₂ = ⌈log(eT(Λ+Ξ)/ε)/log 4⌉ + 1`, and the mapped nodes.
pub fn build_time_grid<T: Real>(
    problem: &OdeProblem<T>,
    trunc_k: T,
    lambda_cap: T,
    xi_cap: T,
    eps: T,
) -> Result<TimeGrid<T>> {
    if problem.b.is_none() {
        return Err(LchsError::Precondition(
            "a time grid needs an inhomogeneous term".into(),
        ));
    }
    if !(eps > T::zero()) || !(trunc_k > T::zero()) || lambda_cap < T::zero() || xi_cap < T::zero() {
        return Err(LchsError::Domain("need eps, K > 0 and Λ, Ξ ≥ 0".into()));
    }
    let horizon = problem.horizon;
    if horizon == T::zero() {
        return Ok(TimeGrid {
            step_h2: T::zero(),
            order_q2: 1,
            panels: 0,
            nodes: Vec::new(),
            coeffs: Vec::new(),
            directions: Vec::new(),
        });
    }
    let rate = lambda_cap + xi_cap;
    let (step_h2, order_q2) = if rate == T::zero() {
        (horizon, 1)
    } else {
        let h2 = T::one() / (T::E() * trunc_k * rate);
        let q = ((T::E() * horizon * rate / eps).ln() / T::lit(4.0).ln()).ceil();
        let q = q.to_i64().unwrap_or(0).max(0) as usize + 1;
        (h2, q)
    };
    explicit_time_grid(problem, step_h2, order_q2)
}

/// Time grid for a caller-chosen step `h₂` and order `Q₂`; the step is shrunk to divide `T`.
pub fn explicit_time_grid<T: Real>(problem: &OdeProblem<T>, step_h2: T, order_q2: usize) -> Result<TimeGrid<T>> {
    let Some(b) = &problem.b else {
        return Err(LchsError::Precondition(
            "a time grid needs an inhomogeneous term".into(),
        ));
    };
    if !(step_h2 > T::zero()) {
        return Err(LchsError::Domain(format!("h2 must be > 0, got {step_h2}")));
    }
    let horizon = problem.horizon;
    if horizon == T::zero() {
        return Ok(TimeGrid {
            step_h2: T::zero(),
            order_q2,
            panels: 0,
            nodes: Vec::new(),
            coeffs: Vec::new(),
            directions: Vec::new(),
        });
    }
    let panels = (horizon / step_h2 * (T::one() - T::lit(1e-12)))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let h = horizon / T::from_usize_lossy(panels);
    let rule = gauss_legendre::<T>(order_q2)?;
    let half = h * T::lit(0.5);
    let mut nodes = Vec::with_capacity(panels * order_q2);
    let mut coeffs = Vec::with_capacity(panels * order_q2);
    let mut directions = Vec::with_capacity(panels * order_q2);
    for m in 0..panels {
        let mid = h * (T::from_usize_lossy(m) + T::lit(0.5));
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let s = mid + half * *x;
            let v = b.at(s);
            let norm = vec_norm(&v);
            let dir = if norm == T::zero() {
                vec![real(T::zero()); v.len()]
            } else {
                v.iter().map(|&z| z / norm).collect()
            };
            nodes.push(s);
            coeffs.push(half * *w * norm);
            directions.push(dir);
        }
    }
    Ok(TimeGrid {
        step_h2: h,
        order_q2,
        panels,
        nodes,
        coeffs,
        directions,
    })
}

/// Parameters that target an absolute error `ε` in `u(T)`.
#[derive(Clone, Debug)]
pub struct SolvePlan<T: Real> {
    pub grid: QuadratureGrid<T>,
    pub time_grid: Option<TimeGrid<T>>,
    pub ham_tol: T,
    pub lambda_cap: T,
    pub xi_cap: T,
}

/// Splits `ε` into four shares: truncation, `k`-quadrature, time quadrature
/// and Hamiltonian simulation, each scaled by `W = ‖u₀‖ + ‖b‖_{L¹}`.
///
/// The truncation share uses the integrated tail of `|g|`, which bounds the
/// truncation error because every `U(T, s, k)` is unitary.
pub fn plan_solve<T: Real>(problem: &OdeProblem<T>, spec: &KernelSpec, eps: T) -> Result<SolvePlan<T>> {
    let beta = spec
        .beta()
        .ok_or_else(|| LchsError::Precondition("parameter selection needs the beta family".into()))?;
    let weight = (vec_norm(&problem.u0) + problem.b_l1_norm()).max(T::min_positive_value());
    let share = eps / (T::lit(4.0) * weight);
    let trunc_k = select_truncation(spec, share, TruncationRule::TailIntegral)?;
    let (step_h1, order_q) =
        select_quadrature_params(problem.horizon, problem.max_norm_l(), trunc_k, T::lit(beta), share)?;
    let grid = build_grid(spec, trunc_k, step_h1, order_q)?;
    let norm_c = coefficient_one_norm(&grid);
    let (lambda_cap, xi_cap) = estimate_lambda_xi(problem, 4)?;
    let time_grid = match problem.b {
        Some(_) => Some(build_time_grid(
            problem,
            grid.trunc_k,
            lambda_cap,
            xi_cap,
            eps / (T::lit(4.0) * norm_c),
        )?),
        None => None,
    };
    Ok(SolvePlan {
        ham_tol: eps / (T::lit(10.0) * norm_c * weight),
        grid,
        time_grid,
        lambda_cap,
        xi_cap,
    })
}

/// Runs [`solve_homogeneous`] or [`solve_inhomogeneous`] with a [`SolvePlan`].
pub fn solve_planned<T: Real>(problem: &OdeProblem<T>, plan: &SolvePlan<T>) -> Result<SolveReport<T>> {
    match &plan.time_grid {
        Some(tg) => solve_inhomogeneous(problem, &plan.grid, tg, plan.ham_tol),
        None => solve_homogeneous(problem, &plan.grid, plan.ham_tol),
    }
}

fn binomial(p: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, j| acc * (p - j) as f64 / (j + 1) as f64)
}

/// Central-difference estimate of `max_t ‖F^{(p)}(t)‖` with the stencil kept inside `[0, T]`.
fn derivative_norm_sup<T: Real, V>(
    horizon: T,
    times: &[T],
    p: usize,
    eval: impl Fn(T) -> V,
    combine: impl Fn(&[(T, V)]) -> T,
) -> T {
    if p == 0 {
        return times
            .iter()
            .map(|&t| combine(&[(T::one(), eval(t))]))
            .fold(T::zero(), T::max);
    }
    let pp = T::from_usize_lossy(p);
    let mut delta = T::epsilon().powf(T::one() / (pp + T::lit(2.0))) * horizon.max(T::one());
    if pp * delta > horizon {
        delta = horizon / (pp + T::one());
    }
    if delta == T::zero() {
        return T::zero();
    }
    let half_span = pp * delta / T::lit(2.0);
    let scale = T::one() / delta.powi(p as i32);
    times
        .iter()
        .map(|&t| {
            let c = t.max(half_span).min(horizon - half_span);
            let terms: Vec<(T, V)> = (0..=p)
                .map(|i| {
                    let sign = if i % 2 == 0 { T::one() } else { -T::one() };
                    let w = sign * T::lit(binomial(p, i)) * scale;
                    let s = c + (pp / T::lit(2.0) - T::from_usize_lossy(i)) * delta;
                    (w, eval(s))
                })
                .collect();
            combine(&terms)
        })
        .fold(T::zero(), T::max)
}

/// `1.25 · max_{p ≤ p_max} sup_t ‖A^{(p)}‖^{1/(p+1)}` and the same for `b`.
pub fn estimate_lambda_xi<T: Real>(problem: &OdeProblem<T>, p_max: usize) -> Result<(T, T)> {
    let times = problem.sample_times();
    let horizon = problem.horizon;
    let n = problem.dim();
    let mut lambda = T::zero();
    let mut xi = T::zero();
    for p in 0..=p_max {
        let root = T::one() / T::from_usize_lossy(p + 1);
        let a = derivative_norm_sup(
            horizon,
            &times,
            p,
            |t| problem.a.at(t),
            |terms| {
                let mut m = ComplexMatrix::zeros(n);
                for (w, x) in terms {
                    m.add_scaled(real(*w), x);
                }
                m.spectral_norm()
            },
        );
        if !a.is_finite() {
            return Err(LchsError::Numeric(format!(
                "non-finite difference quotient for A^({p})"
            )));
        }
        lambda = lambda.max(a.powf(root));
        if let Some(b) = &problem.b {
            let v = derivative_norm_sup(
                horizon,
                &times,
                p,
                |t| b.at(t),
                |terms| {
                    let mut acc = vec![real(T::zero()); n];
                    for (w, x) in terms {
                        for (a, y) in acc.iter_mut().zip(x) {
                            *a += *y * *w;
                        }
                    }
                    vec_norm(&acc)
                },
            );
            if !v.is_finite() {
                return Err(LchsError::Numeric(format!(
                    "non-finite difference quotient for b^({p})"
                )));
            }
            xi = xi.max(v.powf(root));
        }
    }
    let safety = T::lit(LAMBDA_XI_SAFETY);
    Ok((lambda * safety, xi * safety))
}

/// One row of a truncation sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow<T: Real> {
    pub spec: KernelSpec,
    pub trunc_k: T,
    pub error: T,
}

/// `‖∫_{−K}^{K} g(k) e^{−i(kL+H)} dk − e^{−(L+iH)}‖` for each `K` (ascending).
pub fn truncation_errors<T: Real>(
    l: &ComplexMatrix<T>,
    h: &ComplexMatrix<T>,
    spec: &KernelSpec,
    k_values: &[T],
    tol: T,
) -> Result<Vec<T>> {
    spec.validate()?;
    if l.dim() != h.dim() {
        return Err(LchsError::Dimension("L and H differ in size".into()));
    }
    if k_values.windows(2).any(|w| w[0] > w[1]) || k_values.iter().any(|&k| k < T::zero()) {
        return Err(LchsError::Domain("K values must be nonnegative and ascending".into()));
    }
    let n = l.dim();
    let pair = HermitianPair {
        l: l.clone(),
        h: h.clone(),
    };
    let mut a = l.clone();
    a.add_scaled(cplx(T::zero(), T::one()), h);
    let exact = expm(&a.scale_real(-T::one()))?;

    // panel breaks: unit grid plus every requested K
    let k_max = k_values.last().copied().unwrap_or(T::zero());
    let mut breaks: Vec<T> = (0..=k_max.ceil().to_usize().unwrap_or(0))
        .map(T::from_usize_lossy)
        .filter(|&x| x < k_max)
        .collect();
    breaks.extend(k_values.iter().copied());
    breaks.sort_by(|x, y| x.partial_cmp(y).expect("finite breaks"));
    breaks.dedup();

    let evolve = |k: T| -> ComplexMatrix<T> {
        let eig = hermitian_eigen(&pair.generator(k));
        let g = g_unchecked(spec, k);
        eig.apply_fn(|x| cis(-x) * g)
    };
    let panel = |a: T, b: T| -> Result<ComplexMatrix<T>> {
        ComplexMatrix::from_entries(n, integrate_matrix(a, b, tol / T::lit(10.0), n, &evolve)?)
    };

    let mut errors = Vec::with_capacity(k_values.len());
    let mut cumulative = ComplexMatrix::zeros(n);
    let mut reached = T::zero();
    let mut idx = 0usize;
    for w in std::iter::once(T::zero())
        .chain(breaks.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
    {
        while idx < k_values.len() && k_values[idx] <= reached {
            errors.push((&cumulative - &exact).spectral_norm());
            idx += 1;
        }
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let right = panel(lo, hi)?;
        let left = panel(-hi, -lo)?;
        cumulative = &(&cumulative + &right) + &left;
        reached = hi;
    }
    while idx < k_values.len() {
        errors.push((&cumulative - &exact).spectral_norm());
        idx += 1;
    }
    Ok(errors)
}

/// Entrywise `∫_a^b F(k) dk` with panel halving until the matrix changes by less than `tol`.
fn integrate_matrix<T: Real>(a: T, b: T, tol: T, n: usize, f: &impl Fn(T) -> ComplexMatrix<T>) -> Result<Vec<Cplx<T>>> {
    let rule = gauss_legendre::<T>(16)?;
    let eval = |splits: usize| -> ComplexMatrix<T> {
        let mut out = ComplexMatrix::zeros(n);
        let step = (b - a) / T::from_usize_lossy(splits);
        for s in 0..splits {
            let lo = a + step * T::from_usize_lossy(s);
            let half = step * T::lit(0.5);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                out.add_scaled(real(half * *w), &f(lo + half + half * *x));
            }
        }
        out
    };
    let mut splits = 1;
    let mut prev = eval(splits);
    for _ in 0..8 {
        splits *= 2;
        let next = eval(splits);
        if (&next - &prev).spectral_norm() < tol {
            return Ok(next.into_entries());
        }
        prev = next;
    }
    Err(LchsError::Numeric("matrix quadrature did not converge".into()))
}

/// Rows `(spec, K, error)` for every spec and every `K`.
pub fn truncation_error_sweep<T: Real>(
    l: &ComplexMatrix<T>,
    h: &ComplexMatrix<T>,
    specs: &[KernelSpec],
    k_values: &[T],
    tol: T,
) -> Result<Vec<SweepRow<T>>> {
    let mut rows = Vec::with_capacity(specs.len() * k_values.len());
    for spec in specs {
        let errors = truncation_errors(l, h, spec, k_values, tol)?;
        rows.extend(k_values.iter().zip(errors).map(|(&k, error)| SweepRow {
            spec: *spec,
            trunc_k: k,
            error,
        }));
    }
    Ok(rows)
}

/// First `K` on the grid `step, 2·step, …` after which the truncation error stays `≤ target`.
///
/// The grid is extended by doubling until the tail of the sweep is below target
/// over its final half.
pub fn smallest_sufficient_k<T: Real>(
    l: &ComplexMatrix<T>,
    h: &ComplexMatrix<T>,
    spec: &KernelSpec,
    target: T,
    step: T,
    tol: T,
) -> Result<T> {
    let mut k_max = step * T::lit(16.0);
    for _ in 0..16 {
        let count = (k_max / step).round().to_usize().unwrap_or(1);
        let ks: Vec<T> = (1..=count).map(|i| step * T::from_usize_lossy(i)).collect();
        let errors = truncation_errors(l, h, spec, &ks, tol)?;
        let stable_from = count / 2;
        if errors[stable_from..].iter().all(|&e| e <= target) {
            let mut first = count - 1;
            while first > 0 && errors[first - 1] <= target {
                first -= 1;
            }
            return Ok(ks[first]);
        }
        k_max *= T::lit(2.0);
    }
    Err(LchsError::Numeric(format!(
        "truncation error never settles below {target}"
    )))
}
