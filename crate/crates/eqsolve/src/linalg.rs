//! Dense matrices, Gaussian elimination, and linear-coefficient extraction.
//!
//! Everything here is sized for the small systems this crate targets (a few
//! dozen unknowns at most), so the representation is a plain row-major `Vec`
//! and elimination is the textbook partially-pivoted algorithm with a
//! rank-revealing twist: a pivot below `PIVOT_RELATIVE_EPS` relative to its
//! row's largest coefficient is treated as zero and the column becomes free,
//! which routes singular-but-consistent systems to a particular solution
//! instead of an error.

use crate::expr::{EquationSystem, SystemDomainError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// A pivot candidate smaller than this, relative to the largest coefficient
/// of its row, is treated as an exact zero.
pub const PIVOT_RELATIVE_EPS: f64 = 1e-12;

/// Number of random probe points used to certify linearity.
const LINEARITY_PROBES: usize = 8;

/// Absolute-plus-relative tolerance for the linearity check at each probe.
const LINEARITY_TOL: f64 = 1e-9;

// ============================================================================
// Matrix
// ============================================================================

/// Dense row-major matrix of finite `f64` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from a row-major entry list.
    ///
    /// Panics if the entry count does not match the shape or an entry is not
    /// finite.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Matrix {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count does not match {rows}x{cols} shape"
        );
        assert!(
            entries.iter().all(|v| v.is_finite()),
            "matrix entries must be finite"
        );
        Matrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
        assert!(!rows.is_empty(), "matrix must have at least one row");
        let cols = rows[0].len();
        assert!(
            rows.iter().all(|r| r.len() == cols),
            "all rows must have the same length"
        );
        let entries = rows.iter().flatten().copied().collect();
        Matrix::new(rows.len(), cols, entries)
    }

    /// n-by-n identity.
    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.entries[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        assert!(row < self.rows, "index out of bounds");
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }
}

/// Transpose of `m`.
pub fn transpose(m: &Matrix) -> Matrix {
    let mut t = Matrix::zeros(m.cols, m.rows);
    for i in 0..m.rows {
        for j in 0..m.cols {
            t.set(j, i, m.get(i, j));
        }
    }
    t
}

/// Matrix product `a * b`. Panics on a shape mismatch.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(
        a.cols, b.rows,
        "dimension mismatch: {}x{} * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in 0..b.cols {
                out.set(i, j, out.get(i, j) + aik * b.get(k, j));
            }
        }
    }
    out
}

/// Matrix-vector product `m * v`. Panics on a shape mismatch.
pub fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    assert_eq!(
        m.cols,
        v.len(),
        "dimension mismatch: {}x{} * {}-vector",
        m.rows,
        m.cols,
        v.len()
    );
    (0..m.rows)
        .map(|i| m.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
        .collect()
}

/// `m + lambda * I`. Panics if `m` is not square.
pub fn add_scaled_identity(m: &Matrix, lambda: f64) -> Matrix {
    assert_eq!(m.rows, m.cols, "matrix must be square");
    let mut out = m.clone();
    for i in 0..m.rows {
        out.set(i, i, out.get(i, i) + lambda);
    }
    out
}

// ============================================================================
// Linear systems and errors
// ============================================================================

/// The linear system `a * x = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl LinearSystem {
    /// Panics if `b` does not have one entry per row of `a`.
    pub fn new(a: Matrix, b: Vec<f64>) -> LinearSystem {
        assert_eq!(a.rows(), b.len(), "b must have one entry per row of a");
        LinearSystem { a, b }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LinalgError {
    /// The system failed the linearity check: the residual of `equation`
    /// deviated from the affine model at `probe`.
    NotLinear { equation: usize, probe: Vec<f64> },
    /// A domain error occurred while probing the system.
    Domain(SystemDomainError),
    /// The coefficient matrix is not square.
    NonSquare { rows: usize, cols: usize },
    /// The system is rank-deficient and the right-hand side is not in the
    /// column space: no solution exists.
    Inconsistent,
    /// Elimination found no usable pivot where full rank was required.
    SingularMatrix,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotLinear { equation, probe } => write!(
                f,
                "equation {} is not linear (detected at probe point {probe:?})",
                equation + 1
            ),
            LinalgError::Domain(e) => write!(f, "domain error while probing: {e}"),
            LinalgError::NonSquare { rows, cols } => {
                write!(
                    f,
                    "system is not square ({rows} equations, {cols} unknowns)"
                )
            }
            LinalgError::Inconsistent => f.write_str("system is inconsistent: no solution exists"),
            LinalgError::SingularMatrix => f.write_str("matrix is singular"),
        }
    }
}

impl std::error::Error for LinalgError {}

impl From<SystemDomainError> for LinalgError {
    fn from(e: SystemDomainError) -> LinalgError {
        LinalgError::Domain(e)
    }
}

// ============================================================================
// Linear-coefficient extraction
// ============================================================================

/// Recovers `A` and `b` from a system whose residuals are affine, writing it
/// as `A x = b`.
///
/// The coefficients come from evaluating each residual at the origin and the
/// unit vectors: `b_i = -r_i(0)` and `a_ij = r_i(e_j) - r_i(0)`. The affine
/// model is then checked at [`LINEARITY_PROBES`] fixed pseudorandom points;
/// any deviation beyond `LINEARITY_TOL * (1 + |r_i(x)|)` reports
/// [`LinalgError::NotLinear`] with the offending equation and probe.
pub fn extract_linear(system: &EquationSystem) -> Result<LinearSystem, LinalgError> {
    let n = system.variable_count();
    let m = system.equation_count();
    let origin = vec![0.0; n];
    let r0 = system.residual_vector(&origin)?;
    let mut a = Matrix::zeros(m, n);
    for j in 0..n {
        let mut e_j = vec![0.0; n];
        e_j[j] = 1.0;
        let r = system.residual_vector(&e_j)?;
        for i in 0..m {
            a.set(i, j, r[i] - r0[i]);
        }
    }
    let b: Vec<f64> = r0.iter().map(|v| -v).collect();

    // The probe seed is fixed so the check (and any NotLinear report) is
    // reproducible run to run.
    let mut rng = ChaCha8Rng::seed_from_u64(0x11AE_5EED);
    for _ in 0..LINEARITY_PROBES {
        let probe: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        let r = system.residual_vector(&probe)?;
        let model = mat_vec(&a, &probe);
        for i in 0..m {
            let predicted = model[i] - b[i];
            if (r[i] - predicted).abs() > LINEARITY_TOL * (1.0 + r[i].abs()) {
                return Err(LinalgError::NotLinear { equation: i, probe });
            }
        }
    }
    Ok(LinearSystem::new(a, b))
}

// ============================================================================
// Gaussian elimination
// ============================================================================

/// Result of [`gaussian_solve`].
#[derive(Clone, Debug, PartialEq)]
pub enum GaussOutcome {
    /// Full rank: the unique solution.
    Unique(Vec<f64>),
    /// Rank-deficient but consistent: one particular solution (free
    /// variables set to zero) and the rank.
    RankDeficient { solution: Vec<f64>, rank: usize },
}

impl GaussOutcome {
    pub fn solution(&self) -> &[f64] {
        match self {
            GaussOutcome::Unique(x) => x,
            GaussOutcome::RankDeficient { solution, .. } => solution,
        }
    }
}

/// Solves a square linear system by Gaussian elimination with partial
/// pivoting.
///
/// Pivots below [`PIVOT_RELATIVE_EPS`] relative to their row's largest
/// coefficient are treated as zero, making the elimination rank-revealing:
/// consistent rank-deficient systems yield a particular solution with the
/// free variables at zero, inconsistent ones report
/// [`LinalgError::Inconsistent`].
pub fn gaussian_solve(system: &LinearSystem) -> Result<GaussOutcome, LinalgError> {
    let n = system.a.rows();
    if system.a.cols() != n {
        return Err(LinalgError::NonSquare {
            rows: n,
            cols: system.a.cols(),
        });
    }

    // Augmented matrix [A | b] as mutable rows, plus each row's original
    // coefficient scale for relative zero tests.
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = system.a.row(i).to_vec();
            row.push(system.b[i]);
            row
        })
        .collect();
    let mut row_scale: Vec<f64> = (0..n)
        .map(|i| {
            system
                .a
                .row(i)
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
                .max(1.0)
        })
        .collect();

    let mut pivot_row = 0;
    // (row, col) of each accepted pivot, in elimination order.
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    for col in 0..n {
        // Partial pivoting: the largest remaining entry in this column.
        let Some(best) = (pivot_row..n).max_by(|&a, &b| {
            aug[a][col]
                .abs()
                .partial_cmp(&aug[b][col].abs())
                .expect("matrix entries are finite")
        }) else {
            break;
        };
        if aug[best][col].abs() < PIVOT_RELATIVE_EPS * row_scale[best] {
            // No usable pivot: the column is free.
            continue;
        }
        aug.swap(pivot_row, best);
        row_scale.swap(pivot_row, best);
        let (upper, lower) = aug.split_at_mut(pivot_row + 1);
        let prow = &upper[pivot_row];
        for row in lower.iter_mut() {
            let factor = row[col] / prow[col];
            if factor == 0.0 {
                continue;
            }
            row[col] = 0.0;
            for (rv, pv) in row[col + 1..=n].iter_mut().zip(&prow[col + 1..=n]) {
                *rv -= factor * pv;
            }
        }
        pivots.push((pivot_row, col));
        pivot_row += 1;
        if pivot_row == n {
            break;
        }
    }

    let rank = pivots.len();
    if rank < n {
        // Rows below the last pivot have an all-zero coefficient part up to
        // rounding; a non-negligible right-hand side there means the system
        // has no solution.
        for (r, row) in aug.iter().enumerate().skip(rank) {
            let coeff_max = row[..n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if coeff_max <= PIVOT_RELATIVE_EPS * row_scale[r] && row[n].abs() > 1e-9 {
                return Err(LinalgError::Inconsistent);
            }
        }
    }

    // Back substitution over the pivot columns; free variables stay zero.
    let mut x = vec![0.0; n];
    for &(row, col) in pivots.iter().rev() {
        let mut acc = aug[row][n];
        for c in col + 1..n {
            acc -= aug[row][c] * x[c];
        }
        x[col] = acc / aug[row][col];
    }

    if rank == n {
        Ok(GaussOutcome::Unique(x))
    } else {
        Ok(GaussOutcome::RankDeficient { solution: x, rank })
    }
}

/// Solves `a * x = b` for a full-rank square matrix.
///
/// This is the inner solve used by the iterative methods; a matrix without a
/// usable pivot reports [`LinalgError::SingularMatrix`].
pub fn lin_solve_general(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let system = LinearSystem::new(a.clone(), b.to_vec());
    match gaussian_solve(&system)? {
        GaussOutcome::Unique(x) => Ok(x),
        GaussOutcome::RankDeficient { .. } => Err(LinalgError::SingularMatrix),
    }
}

// ============================================================================
// Tests
// ============================================================================
