//! Dense complex linear algebra and brute-force propagator oracles.

pub mod eigen;
pub mod expm;
pub mod matrix;
pub mod propagator;

pub use eigen::{hermitian_eigen, hermitian_eigenvalues, HermitianEigen};
pub use expm::expm;
pub use matrix::{vec_distance, vec_dot, vec_norm, vec_sub, ComplexMatrix};
pub use propagator::{
    cartesian_split, reference_solution, time_ordered_propagator, time_ordered_propagator_capped, unitary_evolution,
    HermitianPair, OdeProblem, TimeDependentMatrix, TimeDependentPair, TimeDependentVector, DEFAULT_STEP_CAP,
    DEFAULT_TOL_PSD, SAMPLE_POINTS,
};
