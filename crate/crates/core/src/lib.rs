//! Linear combination of Hamiltonian simulation (LCHS) for `du/dt = −A(t)u + b(t)`.
//!
//! The numerics are generic over a [`Real`] scalar. The aliases at the crate
//! root fix `f64`; with the `quad` feature [`Quad`] gives 128-bit floats for
//! checks that sit below the `f64` rounding floor.

// `!(x > 0)` guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gibbs;
pub mod integrate;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod problems;
pub mod quadrature;
pub mod resources;
pub mod sampler;
pub mod scalar;
pub mod solver;

pub use error::{LchsError, Result};
pub use kernels::KernelSpec;
pub use scalar::{Cplx, Real};

/// 128-bit IEEE float from libquadmath.
#[cfg(feature = "quad")]
pub type Quad = f128::f128;

pub type Complex64 = Cplx<f64>;
pub type Matrix = linalg::ComplexMatrix<f64>;
pub type Problem = linalg::OdeProblem<f64>;
pub type Grid = quadrature::QuadratureGrid<f64>;
pub type Rule = quadrature::GaussLegendreRule<f64>;
pub type TimeGrid = solver::TimeGrid<f64>;
pub type SolveReport = solver::SolveReport<f64>;
pub type GibbsResult = gibbs::GibbsResult<f64>;
