//! Levenberg-Marquardt for square systems, minimising the squared residual
//! norm.
//!
//! Each iteration solves the damped normal equations
//! `(J^T J + lambda I) dx = -J^T r` and accepts the step only if it strictly
//! reduces the squared residual; acceptance divides the damping by
//! `lambda_down`, rejection multiplies it by `lambda_up` and re-solves.
//! Every solve, accepted or not, counts against the iteration budget.

use crate::expr::{EquationSystem, SystemDomainError};
use crate::linalg::{add_scaled_identity, lin_solve_general, mat_mul, mat_vec, transpose, Matrix};
use crate::newton::jacobian_fd;
use crate::report::{Method, SolveReport};
use std::time::Instant;

/// Levenberg-Marquardt parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LmConfig {
    /// Initial damping factor.
    pub lambda_init: f64,
    /// Multiplier applied to the damping after a rejected step.
    pub lambda_up: f64,
    /// Multiplier applied to the damping after an accepted step.
    pub lambda_down: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step has Euclidean norm below this.
    pub step_tolerance: f64,
    /// Stop once the Euclidean residual norm falls below this.
    pub residual_tolerance: f64,
    /// Give up when the damping grows beyond this.
    pub lambda_max: f64,
    /// Damp with `lambda * diag(J^T J)` instead of `lambda * I`.
    pub scale_diagonal: bool,
    /// Finite-difference step scale for the Jacobian.
    pub fd_step_scale: f64,
}

impl Default for LmConfig {
    fn default() -> LmConfig {
        LmConfig {
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            max_iterations: 200,
            step_tolerance: 1e-10,
            residual_tolerance: 1e-10,
            lambda_max: 1e12,
            scale_diagonal: false,
            fd_step_scale: 1e-7,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lambda_init.is_nan() || self.lambda_init <= 0.0 {
            return Err("lm.lambda_init must be positive".into());
        }
        if self.lambda_up.is_nan() || self.lambda_up <= 1.0 {
            return Err("lm.lambda_up must be greater than 1".into());
        }
        if self.lambda_down.is_nan() || self.lambda_down <= 0.0 || self.lambda_down >= 1.0 {
            return Err("lm.lambda_down must be in (0, 1)".into());
        }
        if self.max_iterations == 0 {
            return Err("lm.max_iterations must be at least 1".into());
        }
        if self.step_tolerance.is_nan() || self.step_tolerance <= 0.0 {
            return Err("lm.step_tolerance must be positive".into());
        }
        if self.residual_tolerance.is_nan() || self.residual_tolerance <= 0.0 {
            return Err("lm.residual_tolerance must be positive".into());
        }
        if self.lambda_max.is_nan() || self.lambda_max <= self.lambda_init {
            return Err("lm.lambda_max must exceed lambda_init".into());
        }
        if self.fd_step_scale.is_nan() || self.fd_step_scale <= 0.0 {
            return Err("lm.fd_step_scale must be positive".into());
        }
        Ok(())
    }
}

/// The objective: squared Euclidean norm of the residual vector.
pub fn lm_objective(system: &EquationSystem, x: &[f64]) -> Result<f64, SystemDomainError> {
    let r = system.residual_vector(x)?;
    Ok(r.iter().map(|v| v * v).sum())
}

/// Damping matrix for the current Jacobian.
fn damped_normal_matrix(jtj: &Matrix, lambda: f64, scale_diagonal: bool) -> Matrix {
    if scale_diagonal {
        let mut out = jtj.clone();
        for i in 0..out.rows() {
            let d = jtj.get(i, i);
            out.set(i, i, d + lambda * d);
        }
        out
    } else {
        add_scaled_identity(jtj, lambda)
    }
}

/// Runs Levenberg-Marquardt from `x0`.
///
/// The trace records the residual norm of the start point and of every
/// accepted step, so it is strictly decreasing. Termination: an accepted
/// step shorter than `step_tolerance`, a residual below
/// `residual_tolerance`, damping beyond `lambda_max`, or the iteration
/// budget. A trial point that leaves the domain is rejected like any
/// non-improving step; only a domain error at the current iterate (while
/// differencing) ends the run, classified in `note`.
///
/// Panics if `x0` has the wrong length; a non-square system is reported as a
/// failure, since the normal-equations solve expects a square system.
pub fn lm_solve(system: &EquationSystem, x0: &[f64], config: &LmConfig) -> SolveReport {
    assert_eq!(
        x0.len(),
        system.variable_count(),
        "x0 size does not match variable count"
    );
    let start = Instant::now();
    if !system.is_square() {
        return SolveReport {
            method: Method::Lm,
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
    let mut x = x0.to_vec();
    let mut trace = Vec::new();

    let fail = |x: Vec<f64>,
                norm: Option<f64>,
                iterations,
                trace: Vec<(usize, f64)>,
                converged: bool,
                note: Option<String>,
                start: Instant| SolveReport {
        method: Method::Lm,
        residual_norms: norm.into_iter().collect(),
        solutions: vec![x],
        iterations,
        converged,
        trace,
        elapsed: start.elapsed(),
        note,
    };

    let mut objective = match lm_objective(system, &x) {
        Ok(v) => v,
        Err(e) => {
            return fail(
                x,
                None,
                0,
                trace,
                false,
                Some(format!("domain error at the starting point: {e}")),
                start,
            );
        }
    };
    trace.push((0, objective.sqrt()));

    let mut lambda = config.lambda_init;
    let mut accepted = 0usize;
    for iteration in 1..=config.max_iterations {
        // The residual criterion is not tied to an accepted step; without
        // this check a start at an exact root would reject every trial.
        if objective.sqrt() < config.residual_tolerance {
            return SolveReport {
                method: Method::Lm,
                solutions: vec![x],
                residual_norms: vec![objective.sqrt()],
                iterations: iteration - 1,
                converged: true,
                trace,
                elapsed: start.elapsed(),
                note: None,
            };
        }
        let jac = match jacobian_fd(system, &x, config.fd_step_scale) {
            Ok(j) => j,
            Err(e) => {
                return fail(
                    x,
                    Some(objective.sqrt()),
                    iteration - 1,
                    trace,
                    false,
                    Some(format!(
                        "domain error while differencing at iteration {iteration}: {e}"
                    )),
                    start,
                );
            }
        };
        let r = match system.residual_vector(&x) {
            Ok(v) => v,
            Err(e) => {
                return fail(
                    x,
                    Some(objective.sqrt()),
                    iteration - 1,
                    trace,
                    false,
                    Some(format!("domain error at iteration {iteration}: {e}")),
                    start,
                );
            }
        };
        let jt = transpose(&jac);
        let jtj = mat_mul(&jt, &jac);
        let jtr = mat_vec(&jt, &r);
        let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
        let damped = damped_normal_matrix(&jtj, lambda, config.scale_diagonal);
        let delta = match lin_solve_general(&damped, &rhs) {
            Ok(d) => d,
            Err(_) => {
                // Only reachable when the damped matrix is still singular,
                // e.g. a zero column of J under diagonal scaling.
                lambda *= config.lambda_up;
                if lambda > config.lambda_max {
                    return fail(
                        x,
                        Some(objective.sqrt()),
                        iteration,
                        trace,
                        false,
                        Some("damping exceeded lambda_max".into()),
                        start,
                    );
                }
                continue;
            }
        };
        let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
        // A trial outside the domain counts as not improving.
        let trial_objective = lm_objective(system, &trial).unwrap_or(f64::INFINITY);
        if trial_objective < objective {
            x = trial;
            objective = trial_objective;
            lambda *= config.lambda_down;
            accepted += 1;
            trace.push((iteration, objective.sqrt()));
            let step_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let residual = objective.sqrt();
            if residual < config.residual_tolerance || step_norm < config.step_tolerance {
                // A step-tolerance stop with a large residual is a
                // least-squares stationary point, not a root; converged
                // still reflects that a tolerance criterion fired.
                let note = (residual >= config.residual_tolerance).then(|| {
                    format!(
                        "stopped on step tolerance with residual norm {residual:.3e} \
                         (least-squares stationary point)"
                    )
                });
                return SolveReport {
                    method: Method::Lm,
                    solutions: vec![x],
                    residual_norms: vec![residual],
                    iterations: iteration,
                    converged: true,
                    trace,
                    elapsed: start.elapsed(),
                    note,
                };
            }
        } else {
            lambda *= config.lambda_up;
            if lambda > config.lambda_max {
                return fail(
                    x,
                    Some(objective.sqrt()),
                    iteration,
                    trace,
                    false,
                    Some("damping exceeded lambda_max".into()),
                    start,
                );
            }
        }
    }

    let _ = accepted;
    SolveReport {
        method: Method::Lm,
        residual_norms: vec![objective.sqrt()],
        solutions: vec![x],
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_system;

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!(
                (a - e).abs() <= tol,
                "expected {expected:?}, got {actual:?}"
            );
        }
    }

    #[test]
    fn objective_is_squared_norm() {
        let s = parse_system("3*x1 + 2*x2 = 5\n4*x1 - x2 = 1").unwrap();
        assert_eq!(lm_objective(&s, &[0.0, 0.0]).unwrap(), 26.0);
        assert!(lm_objective(&s, &[7.0 / 11.0, 17.0 / 11.0]).unwrap() < 1e-28);
    }

    #[test]
    fn converges_on_circle_line_system() {
        let s = parse_system("x1^2 + x2^2 = 25\nx1 - x2 = 1").unwrap();
        let report = lm_solve(&s, &[5.0, 2.0], &LmConfig::default());
        assert!(report.converged);
        assert_close(&report.solutions[0], &[4.0, 3.0], 1e-6);
        assert!(report.residual_norms[0] < 1e-10);
    }

    #[test]
    fn accepted_trace_is_strictly_decreasing() {
        let s = parse_system("exp(x1) + x2 = 10\nsin(x1) + cos(x2) = 1").unwrap();
        let report = lm_solve(&s, &[1.0, 1.0], &LmConfig::default());
        assert!(report.converged);
        for w in report.trace.windows(2) {
            assert!(w[1].1 < w[0].1, "trace not strictly decreasing: {w:?}");
        }
    }

    #[test]
    fn domain_error_at_start_is_classified() {
        let s = parse_system("ln(x1) = 0").unwrap();
        let report = lm_solve(&s, &[-2.0], &LmConfig::default());
        assert!(!report.converged);
        assert!(report.note.expect("failure note").contains("domain error"));
    }

    #[test]
    fn iteration_budget_is_classified() {
        let s = parse_system("x1^2 + x2^2 = 25\nx1 - x2 = 1").unwrap();
        let config = LmConfig {
            max_iterations: 2,
            ..LmConfig::default()
        };
        let report = lm_solve(&s, &[5.0, 2.0], &config);
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
    }

    #[test]
    fn rejected_steps_count_against_the_budget() {
        // A start at a local minimum of the objective on a rootless system
        // rejects every step, so the budget empties or lambda explodes.
        let s = parse_system("x1^2 = -1").unwrap();
        let report = lm_solve(&s, &[0.0], &LmConfig::default());
        assert!(!report.converged);
        assert!(report.note.is_some());
        // Only the starting point is ever recorded.
        assert_eq!(report.trace.len(), 1);
    }

    #[test]
    fn small_damping_tracks_gauss_newton() {
        // With negligible damping and a well-behaved system, the first
        // accepted step matches the Gauss-Newton (here: Newton) step.
        let s = parse_system("x1^2 + x2^2 = 25\nx1 - x2 = 1").unwrap();
        let config = LmConfig {
            lambda_init: 1e-10,
            max_iterations: 1,
            ..LmConfig::default()
        };
        let lm_report = lm_solve(&s, &[5.0, 2.0], &config);
        let newton_report = crate::newton::newton_solve(
            &s,
            &[5.0, 2.0],
            &crate::newton::NewtonConfig {
                max_iterations: 1,
                ..crate::newton::NewtonConfig::default()
            },
        );
        assert_close(&lm_report.solutions[0], &newton_report.solutions[0], 1e-5);
    }

    #[test]
    fn diagonal_scaling_still_converges() {
        let s = parse_system("x1^2 + x2^2 = 25\nx1 - x2 = 1").unwrap();
        let config = LmConfig {
            scale_diagonal: true,
            ..LmConfig::default()
        };
        let report = lm_solve(&s, &[5.0, 2.0], &config);
        assert!(report.converged);
        assert_close(&report.solutions[0], &[4.0, 3.0], 1e-6);
    }
}
