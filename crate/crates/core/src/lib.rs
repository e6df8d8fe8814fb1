//! Monte Carlo solvers for elliptic problems with Neumann and mixed
//! Dirichlet–Neumann boundary conditions on the square `[-1,1]²`.
//!
//! The solvers are generic over the scalar type ([`Real`]: `f32` or `f64`);
//! the aliases at the crate root fix it to `f64`.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod euler;
pub mod geometry;
pub mod problem;
pub mod quadrature;
pub mod real;
pub mod rng;
pub mod schemes;
pub mod spectral;
pub mod walk;
pub mod wos;

pub use error::{Error, Result};
pub use euler::{EulerConfig, LocalTimeKernel};
pub use geometry::{BoundaryKind, Side};
pub use problem::{builtin_problem, ProblemId};
pub use real::Real;
pub use walk::{EventSink, ScoreSink, Termination, WalkEnd};

pub type Point = geometry::Point2<f64>;
pub type Square = geometry::SquareDomain<f64>;
pub type Coefficients = problem::Coefficients<f64>;
pub type Problem = problem::Problem<f64>;
pub type WalkOutcome = walk::WalkOutcome<f64>;
