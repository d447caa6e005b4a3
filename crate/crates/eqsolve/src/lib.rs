//! Solvers for square systems of equations over the reals.
//!
//! The crate parses a plain-text equation format into an [`expr::EquationSystem`],
//! then solves it with one of four methods:
//!
//! - [`ga::ga_solve`]: a real-coded genetic algorithm that minimises the sum of
//!   absolute residuals. Works on any system, needs no starting point or
//!   derivatives, and can surface several distinct candidate roots in one run.
//! - [`newton::newton_solve`]: damped-free Newton iteration with a finite-difference
//!   Jacobian (exact coefficients when the system is detected to be linear).
//! - [`lm::lm_solve`]: Levenberg-Marquardt on the squared residual norm.
//! - [`linalg::gaussian_solve`]: direct Gaussian elimination with partial pivoting
//!   for linear systems, including rank-deficient ones.
//!
//! [`bench`] carries a registry of benchmark systems with reference solutions and
//! the report/trace emitters behind the `eqsolve` command line tool.

pub mod bench;
pub mod expr;
pub mod ga;
pub mod linalg;
pub mod lm;
pub mod newton;
pub mod report;
