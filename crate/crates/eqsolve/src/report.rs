//! Common result types shared by the solvers.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

/// Solution method identifier, used for dispatch and report labelling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Gauss,
    Newton,
    Lm,
    Ga,
}

impl Method {
    /// All methods in canonical report order.
    pub const ALL: [Method; 4] = [Method::Gauss, Method::Newton, Method::Lm, Method::Ga];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gauss => "gauss",
            Method::Newton => "newton",
            Method::Lm => "lm",
            Method::Ga => "ga",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gauss" => Ok(Method::Gauss),
            "newton" => Ok(Method::Newton),
            "lm" => Ok(Method::Lm),
            "ga" => Ok(Method::Ga),
            other => Err(format!(
                "unknown method '{other}' (expected gauss, newton, lm, or ga)"
            )),
        }
    }
}

/// Outcome of one solver run.
///
/// Invariants:
/// - `solutions` is non-empty whenever `converged` is true; iterative methods also
///   keep the last iterate here on failure so it can be inspected.
/// - `residual_norms[i]` is the Euclidean residual norm of `solutions[i]`.
/// - `trace` holds one `(index, value)` pair per recorded step, starting at index 0.
///   For Newton and Levenberg-Marquardt the value is the residual norm; for the
///   genetic algorithm it is the best fitness (sum of absolute residuals) of the
///   generation.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    /// Solution vectors, ordered best first.
    pub solutions: Vec<Vec<f64>>,
    /// Euclidean residual norm per entry of `solutions`.
    pub residual_norms: Vec<f64>,
    /// Iterations run (generations for the genetic algorithm).
    pub iterations: usize,
    /// Whether a termination tolerance was met, as opposed to running out of
    /// budget or hitting an unrecoverable error.
    pub converged: bool,
    /// Per-step progress record; see the type-level invariants.
    pub trace: Vec<(usize, f64)>,
    /// Wall-clock time of the solve.
    pub elapsed: Duration,
    /// Failure classification when the run stopped for a reason other than a
    /// convergence tolerance (singular Jacobian, domain error, exhausted budget).
    pub note: Option<String>,
}

impl SolveReport {
    pub fn elapsed_ms(&self) -> f64 {
        self.elapsed.as_secs_f64() * 1e3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("brent".parse::<Method>().is_err());
    }
}
