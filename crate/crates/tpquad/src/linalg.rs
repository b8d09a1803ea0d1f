//! SPD factorization with a jitter ladder, plus small symmetry helpers.
//!
//! Every linear solve in the crate goes through [`SpdFactor`]; explicit
//! matrix inversion is not used anywhere.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::{cvt, Real};

/// Relative jitter applied first when a Cholesky factorization fails.
const JITTER_START: f64 = 1e-12;
/// Relative jitter beyond which the matrix is declared indefinite.
const JITTER_MAX: f64 = 1e-6;
/// Relative asymmetry tolerated by [`cholesky_spd`].
const SYMMETRY_TOL: f64 = 1e-8;

/// Lower-triangular Cholesky factor of `M + jitter * I`.
///
/// `jitter` is zero whenever the plain factorization succeeded.
#[derive(Debug, Clone)]
pub struct SpdFactor<T: Real> {
    lower: DMatrix<T>,
    upper: DMatrix<T>,
    jitter: T,
}

impl<T: Real> SpdFactor<T> {
    /// The lower-triangular factor `L` with `L Lᵀ = M + jitter I`.
    pub fn lower(&self) -> &DMatrix<T> {
        &self.lower
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve_vec(&self, b: &DVector<T>) -> DVector<T> {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("Cholesky factor has positive diagonal");
        self.upper
            .solve_upper_triangular(&y)
            .expect("Cholesky factor has positive diagonal")
    }

    /// Solves `(L Lᵀ) X = B` column-wise.
    pub fn solve_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("Cholesky factor has positive diagonal");
        self.upper
            .solve_upper_triangular(&y)
            .expect("Cholesky factor has positive diagonal")
    }

    /// Solves `L y = b` only. `‖y‖²` is then `bᵀ M⁻¹ b`.
    pub fn solve_half(&self, b: &DVector<T>) -> DVector<T> {
        self.lower
            .solve_lower_triangular(b)
            .expect("Cholesky factor has positive diagonal")
    }

    /// Quadratic form `bᵀ (L Lᵀ)⁻¹ b`.
    pub fn quad_form(&self, b: &DVector<T>) -> T {
        self.solve_half(b).norm_squared()
    }

    /// Recomputes `L Lᵀ`, i.e. the matrix that was actually factorized.
    pub fn reconstruct(&self) -> DMatrix<T> {
        &self.lower * &self.upper
    }
}

/// Maximum absolute asymmetry `max |M - Mᵀ|` of a square matrix.
pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if diff > worst {
                worst = diff;
            }
        }
    }
    worst
}

/// Largest absolute entry, used to scale relative tolerances.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Replaces `m` by its symmetric part `(m + mᵀ) / 2`.
pub fn symmetrize<T: Real>(m: &mut DMatrix<T>) {
    let half = cvt::<T>(0.5);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let avg = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Cholesky factorization of a symmetric positive definite matrix, with a
/// jitter ladder for matrices that lost definiteness to roundoff.
///
/// The ladder adds `10^k * 1e-12 * trace(M)/d` to the diagonal, `k = 0, 1,
/// ...`, stopping at `1e-6 * trace(M)/d`. Kernel Gram matrices are routinely
/// ill-conditioned and filtering covariances occasionally lose definiteness,
/// so callers treat a nonzero jitter as normal; exhausting the ladder signals
/// a genuinely degenerate matrix.
pub fn cholesky_spd<T: Real>(m: &DMatrix<T>) -> Result<SpdFactor<T>> {
    assert_eq!(m.nrows(), m.ncols(), "cholesky_spd needs a square matrix");
    let scale = max_abs(m);
    let asym = asymmetry(m);
    let tol = cvt::<T>(SYMMETRY_TOL) * scale.max(T::one());
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym.to_f64().unwrap_or(f64::NAN),
            tolerance: tol.to_f64().unwrap_or(f64::NAN),
        });
    }

    if let Some(chol) = try_factor(m, T::zero()) {
        return Ok(chol);
    }

    let d = cvt::<T>(m.nrows() as f64);
    let unit = m.trace() / d;
    let mut rel = cvt::<T>(JITTER_START);
    let rel_max = cvt::<T>(JITTER_MAX);
    let ten = cvt::<T>(10.0);
    while rel <= rel_max {
        let jitter = rel * unit;
        if jitter > T::zero() {
            if let Some(chol) = try_factor(m, jitter) {
                return Ok(chol);
            }
        }
        rel *= ten;
    }
    Err(Error::NotPositiveDefinite {
        rows: m.nrows(),
        cols: m.ncols(),
        max_jitter: (rel_max * unit).to_f64().unwrap_or(f64::NAN),
    })
}

fn try_factor<T: Real>(m: &DMatrix<T>, jitter: T) -> Option<SpdFactor<T>> {
    let mut work = m.clone();
    if jitter > T::zero() {
        for i in 0..work.nrows() {
            work[(i, i)] += jitter;
        }
    }
    let chol: Cholesky<T, Dyn> = Cholesky::new(work)?;
    let lower = chol.l();
    let upper = lower.transpose();
    Some(SpdFactor {
        lower,
        upper,
        jitter,
    })
}
