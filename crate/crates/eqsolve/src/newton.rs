//! Newton's method for square systems.
//!
//! Each iteration solves `J(x) dx = -F(x)` and steps to `x + dx`. The
//! Jacobian comes from central finite differences, except that systems which
//! pass the linearity check use their exact coefficient matrix instead; a
//! linear system then converges in a single full Newton step rather than
//! spending a second iteration cleaning up differencing noise.

use crate::expr::{EquationSystem, SystemDomainError};
use crate::linalg::{extract_linear, lin_solve_general, Matrix};
use crate::report::{Method, SolveReport};
use std::time::Instant;

/// Newton iteration parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// Stop once the Euclidean norm of the step falls below this.
    pub step_tolerance: f64,
    /// Stop once the Euclidean residual norm falls below this.
    pub residual_tolerance: f64,
    /// Finite-difference step is `fd_step_scale * max(1, |x_j|)` per
    /// coordinate.
    pub fd_step_scale: f64,
}

impl Default for NewtonConfig {
    fn default() -> NewtonConfig {
        NewtonConfig {
            max_iterations: 100,
            step_tolerance: 1e-10,
            residual_tolerance: 1e-10,
            fd_step_scale: 1e-7,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("newton.max_iterations must be at least 1".into());
        }
        if self.step_tolerance.is_nan() || self.step_tolerance <= 0.0 {
            return Err("newton.step_tolerance must be positive".into());
        }
        if self.residual_tolerance.is_nan() || self.residual_tolerance <= 0.0 {
            return Err("newton.residual_tolerance must be positive".into());
        }
        if self.fd_step_scale.is_nan() || self.fd_step_scale <= 0.0 {
            return Err("newton.fd_step_scale must be positive".into());
        }
        Ok(())
    }
}

/// Jacobian of the residual vector at `x` by finite differences.
///
/// Central differences with per-coordinate step `scale * max(1, |x_j|)`.
/// When one side of a central difference leaves the domain, that column
/// falls back to a one-sided difference on the side that stays inside; the
/// error propagates only if both sides fail.
pub fn jacobian_fd(
    system: &EquationSystem,
    x: &[f64],
    scale: f64,
) -> Result<Matrix, SystemDomainError> {
    let n = system.variable_count();
    let m = system.equation_count();
    assert_eq!(x.len(), n, "point size does not match variable count");
    let mut jac = Matrix::zeros(m, n);
    // Base residual is only needed for one-sided fallbacks; computed lazily
    // and reused across columns.
    let mut base: Option<Vec<f64>> = None;
    for j in 0..n {
        let h = scale * x[j].abs().max(1.0);
        let mut forward = x.to_vec();
        forward[j] += h;
        let mut backward = x.to_vec();
        backward[j] -= h;
        let f_plus = system.residual_vector(&forward);
        let f_minus = system.residual_vector(&backward);
        let column: Vec<f64> = match (f_plus, f_minus) {
            (Ok(p), Ok(m)) => p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Ok(p), Err(_)) => {
                if base.is_none() {
                    base = Some(system.residual_vector(x)?);
                }
                let f0 = base.as_ref().unwrap();
                p.iter().zip(f0).map(|(a, b)| (a - b) / h).collect()
            }
            (Err(_), Ok(m)) => {
                if base.is_none() {
                    base = Some(system.residual_vector(x)?);
                }
                let f0 = base.as_ref().unwrap();
                f0.iter().zip(&m).map(|(a, b)| (a - b) / h).collect()
            }
            (Err(e), Err(_)) => return Err(e),
        };
        for (i, v) in column.iter().enumerate() {
            jac.set(i, j, *v);
        }
    }
    Ok(jac)
}

/// Runs Newton iteration from `x0`.
///
/// Always performs at least one iteration, then stops as soon as the residual
/// norm drops below `residual_tolerance`, the step norm drops below
/// `step_tolerance`, or the iteration budget runs out. `converged` reflects
/// whether a tolerance was met; a singular Jacobian or a domain error ends
/// the run early with the classification in `note` and the last iterate kept
/// in `solutions`.
///
/// Panics if `x0` has the wrong length; a non-square system is reported as a
/// failure, since the inner solve needs a square Jacobian.
pub fn newton_solve(system: &EquationSystem, x0: &[f64], config: &NewtonConfig) -> SolveReport {
    assert_eq!(
        x0.len(),
        system.variable_count(),
        "x0 size does not match variable count"
    );
    let start = Instant::now();
    if !system.is_square() {
        return SolveReport {
            method: Method::Newton,
            solutions: vec![x0.to_vec()],
            residual_norms: Vec::new(),
            iterations: 0,
            converged: false,
            trace: Vec::new(),
            elapsed: start.elapsed(),
            note: Some(format!(
                "system is not square ({} equations, {} unknowns)",
                system.equation_count(),
                system.variable_count()
            )),
        };
    }
    // Linear systems get their exact coefficient matrix as the Jacobian.
    let linear_jacobian = extract_linear(system).ok().map(|ls| ls.a);

    let mut x = x0.to_vec();
    let mut trace = Vec::new();
    let fail = |x: Vec<f64>,
                norm: Option<f64>,
                iterations,
                trace: Vec<(usize, f64)>,
                note: String,
                start: Instant| {
        SolveReport {
            method: Method::Newton,
            residual_norms: norm.into_iter().collect(),
            solutions: vec![x],
            iterations,
            converged: false,
            trace,
            elapsed: start.elapsed(),
            note: Some(note),
        }
    };

    let norm0 = match system.residual_norm(&x) {
        Ok(v) => v,
        Err(e) => {
            return fail(
                x,
                None,
                0,
                trace,
                format!("domain error at the starting point: {e}"),
                start,
            );
        }
    };
    trace.push((0, norm0));
    let mut norm = norm0;

    for iteration in 1..=config.max_iterations {
        let jac = match &linear_jacobian {
            Some(a) => a.clone(),
            None => match jacobian_fd(system, &x, config.fd_step_scale) {
                Ok(j) => j,
                Err(e) => {
                    return fail(
                        x,
                        Some(norm),
                        iteration - 1,
                        trace,
                        format!("domain error while differencing at iteration {iteration}: {e}"),
                        start,
                    );
                }
            },
        };
        let f = match system.residual_vector(&x) {
            Ok(v) => v,
            Err(e) => {
                return fail(
                    x,
                    Some(norm),
                    iteration - 1,
                    trace,
                    format!("domain error at iteration {iteration}: {e}"),
                    start,
                );
            }
        };
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = match lin_solve_general(&jac, &rhs) {
            Ok(d) => d,
            Err(_) => {
                return fail(
                    x,
                    Some(norm),
                    iteration - 1,
                    trace,
                    format!("singular Jacobian at iteration {iteration}"),
                    start,
                );
            }
        };
        for (xi, di) in x.iter_mut().zip(&delta) {
            *xi += di;
        }
        norm = match system.residual_norm(&x) {
            Ok(v) => v,
            Err(e) => {
                return fail(
                    x,
                    None,
                    iteration,
                    trace,
                    format!("domain error after the step at iteration {iteration}: {e}"),
                    start,
                );
            }
        };
        trace.push((iteration, norm));
        let step_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < config.residual_tolerance || step_norm < config.step_tolerance {
            // A step-tolerance stop with a large residual means iteration
            // stagnated away from a root; converged still reflects that a
            // tolerance criterion fired.
            let note = (norm >= config.residual_tolerance)
                .then(|| format!("stopped on step tolerance with residual norm {norm:.3e}"));
            return SolveReport {
                method: Method::Newton,
                solutions: vec![x],
                residual_norms: vec![norm],
                iterations: iteration,
                converged: true,
                trace,
                elapsed: start.elapsed(),
                note,
            };
        }
    }

    SolveReport {
        method: Method::Newton,
        solutions: vec![x],
        residual_norms: vec![norm],
        iterations: config.max_iterations,
        converged: false,
        trace,
        elapsed: start.elapsed(),
        note: Some(format!(
            "no convergence within {} iterations",
            config.max_iterations
        )),
    }
}
