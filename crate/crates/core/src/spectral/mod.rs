//! Spectral solver for pure Neumann problems: Monte Carlo walks from the
//! nodes of a Tchebychef tensor grid give a small linear system for the
//! nodal values of a zero-mean polynomial approximation.

pub mod basis;
pub mod centering;
pub mod system;

pub use basis::{build_basis, Poly, TchebBasis};
pub use centering::{center_approx, center_exact, CenteredBasis, CenteringMode};
pub use system::{
    assemble, condition_number, ideal_eigenvalues, ideal_matrix, node_traces, solve, LinearDrift, NodeTrace,
    OperatorTable, SpectralSolution,
};
