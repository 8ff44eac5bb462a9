//! Gibbs and purified Gibbs states from the LCHS approximation of `e^{−γL/2}`.

use crate::error::{LchsError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, ComplexMatrix, HermitianEigen, DEFAULT_TOL_PSD};
use crate::quadrature::{choose_grid, coefficient_one_norm, QuadratureGrid, TruncationRule};
use crate::scalar::{cis, real, CompensatedSum, Cplx, Real};

/// Hermiticity tolerance relative to the matrix scale.
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsResult<T: Real> {
    /// Normalized purification, `ψ[j·N + m]` = second-register entry `m` paired with `|j⟩`.
    pub purified_state: Vec<Cplx<T>>,
    /// Reduced state on the second register.
    pub density: ComplexMatrix<T>,
    pub partition_z: T,
    pub trace_distance_to_exact: T,
    /// `‖ψ − ψ_exact‖₂` for the normalized purifications.
    pub purified_error: T,
    /// Norm of the unnormalized purified vector; exact value `√(Z/N)`.
    pub unnormalized_norm: T,
    /// `‖v‖² / (Σ|c_j|)²`, the classical stand-in for the post-selection success probability.
    pub postselection_ratio: T,
}

impl<T: Real> GibbsResult<T> {
    pub fn expected_norm(&self) -> T {
        let n = T::from_usize_lossy(self.density.dim());
        (self.partition_z / n).sqrt()
    }

    /// `|‖v‖ − √(Z/N)|`.
    pub fn norm_defect(&self) -> T {
        (self.unnormalized_norm - self.expected_norm()).abs()
    }
}

fn require_hermitian<T: Real>(l: &ComplexMatrix<T>) -> Result<()> {
    let scale = l.max_abs().max(T::one());
    if !l.is_hermitian(T::lit(HERMITIAN_TOL) * scale) {
        return Err(LchsError::Precondition(format!(
            "L is not Hermitian (defect {})",
            l.hermitian_defect()
        )));
    }
    Ok(())
}

/// `Z_γ = Tr e^{−γL}` from the eigenvalues of `L`.
pub fn partition_function<T: Real>(l: &ComplexMatrix<T>, gamma: T) -> Result<T> {
    require_hermitian(l)?;
    if !(gamma >= T::zero()) {
        return Err(LchsError::Domain(format!("gamma must be ≥ 0, got {gamma}")));
    }
    Ok(hermitian_eigenvalues(l)
        .into_iter()
        .fold(T::zero(), |s, x| s + (-gamma * x).exp()))
}

/// Grid for `A = L`, `T = γ/2` with operator error `‖B − e^{−γL/2}‖ ≤ ε/(8N)`,
/// split evenly between truncation and quadrature.
///
/// That operator error keeps the density trace distance below `ε`: with
/// `λ_min ≥ 0` we have `Z ≥ 1`, and the normalized reduced state moves by at
/// most `4N‖B − E‖` in trace norm.
pub fn gibbs_grid<T: Real>(l: &ComplexMatrix<T>, gamma: T, spec: &KernelSpec, eps: T) -> Result<QuadratureGrid<T>> {
    require_hermitian(l)?;
    let share = operator_budget(l.dim(), eps) / T::lit(2.0);
    choose_grid(
        spec,
        TruncationRule::TailIntegral,
        share,
        share,
        gamma / T::lit(2.0),
        l.spectral_norm(),
    )?
    .build(spec)
}

/// Operator-norm budget `ε/(8N)` used by [`gibbs_grid`].
pub fn operator_budget<T: Real>(dim: usize, eps: T) -> T {
    eps / (T::lit(8.0) * T::from_usize_lossy(dim))
}

/// `Σ_j c_j e^{−i k_j (γ/2) L}` from one eigendecomposition of `L`.
pub fn approx_half_gibbs_operator<T: Real>(
    eig: &HermitianEigen<T>,
    gamma: T,
    grid: &QuadratureGrid<T>,
) -> ComplexMatrix<T> {
    let tau = gamma / T::lit(2.0);
    let diag: Vec<Cplx<T>> = eig
        .values
        .iter()
        .map(|&lam| {
            let mut acc = CompensatedSum::default();
            for (&k, &c) in grid.nodes.iter().zip(&grid.coeffs) {
                acc.add(c * cis(-k * tau * lam));
            }
            acc.value()
        })
        .collect();
    eig.reconstruct_with(&diag)
}

/// Trace norm distance `½‖ρ − σ‖₁` of Hermitian matrices.
pub fn trace_distance<T: Real>(rho: &ComplexMatrix<T>, sigma: &ComplexMatrix<T>) -> T {
    let d = (rho - sigma).hermitian_part();
    hermitian_eigenvalues(&d)
        .into_iter()
        .fold(T::zero(), |s, x| s + x.abs())
        / T::lit(2.0)
}

/// `v[j·N + m] = B[m][j]/√N`, the second register acted on by `B`.
fn purify<T: Real>(b: &ComplexMatrix<T>) -> Vec<Cplx<T>> {
    let n = b.dim();
    let inv = T::one() / T::from_usize_lossy(n).sqrt();
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        for m in 0..n {
            v.push(b[(m, j)] * inv);
        }
    }
    v
}

/// Reduced state of the second register of `|ψ⟩` (length `N²`).
pub fn partial_trace_first<T: Real>(psi: &[Cplx<T>], n: usize) -> Result<ComplexMatrix<T>> {
    if psi.len() != n * n {
        return Err(LchsError::Dimension(format!(
            "purified vector has length {}, expected {}",
            psi.len(),
            n * n
        )));
    }
    let mut rho = ComplexMatrix::zeros(n);
    for j in 0..n {
        let block = &psi[j * n..(j + 1) * n];
        for a in 0..n {
            for b in 0..n {
                rho[(a, b)] += block[a] * block[b].conj();
            }
        }
    }
    Ok(rho)
}

/// Applies the LCHS operator to the maximally entangled state and reports the errors.
///
/// The unitaries come from one eigendecomposition of `L`, which is exact, so
/// `ham_tol` is accepted for interface symmetry only.
pub fn prepare_purified_gibbs<T: Real>(
    l: &ComplexMatrix<T>,
    gamma: T,
    grid: &QuadratureGrid<T>,
    _ham_tol: T,
) -> Result<GibbsResult<T>> {
    require_hermitian(l)?;
    if !(gamma >= T::zero()) {
        return Err(LchsError::Domain(format!("gamma must be ≥ 0, got {gamma}")));
    }
    let n = l.dim();
    let eig = hermitian_eigen(&l.hermitian_part());
    if let Some(&lo) = eig.values.first() {
        if lo < -T::lit(DEFAULT_TOL_PSD) {
            return Err(LchsError::NotPositiveSemidefinite {
                t: 0.0,
                eigenvalue: lo.to_f64_lossy(),
            });
        }
    }
    let b = approx_half_gibbs_operator(&eig, gamma, grid);
    let exact_half = eig.apply_fn(|x| real((-gamma * x / T::lit(2.0)).exp()));

    let v = purify(&b);
    let norm = crate::linalg::vec_norm(&v);
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(LchsError::Numeric(
            "LCHS Gibbs operator produced a zero or non-finite vector".into(),
        ));
    }
    let psi: Vec<_> = v.iter().map(|&z| z / norm).collect();
    let density = partial_trace_first(&psi, n)?;

    let z = eig.values.iter().fold(T::zero(), |s, &x| s + (-gamma * x).exp());
    let exact_density = eig.apply_fn(|x| real((-gamma * x).exp() / z));
    let exact_v = purify(&exact_half);
    let exact_norm = crate::linalg::vec_norm(&exact_v);
    let exact_psi: Vec<_> = exact_v.iter().map(|&w| w / exact_norm).collect();

    let c1 = coefficient_one_norm(grid);
    Ok(GibbsResult {
        trace_distance_to_exact: trace_distance(&density, &exact_density),
        purified_error: crate::linalg::vec_distance(&psi, &exact_psi),
        unnormalized_norm: norm,
        postselection_ratio: norm * norm / (c1 * c1),
        purified_state: psi,
        density,
        partition_z: z,
    })
}
