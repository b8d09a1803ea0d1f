//! Unit sigma-point sets, Bayesian-quadrature weights, and TP/GP regression
//! posteriors with their integral moments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelExpectations, RbfKernel};
use crate::linalg::{self, cholesky_spd};
use crate::{cvt, Real};

/// A set of sigma points in the standardized (zero-mean, unit-covariance)
/// input space; columns are points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitSigmaSet<T: Real> {
    points: DMatrix<T>,
    kappa: T,
    generator: SigmaGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaGenerator {
    FullySymmetric3,
    Explicit,
}

impl<T: Real> UnitSigmaSet<T> {
    /// Wraps an explicit `d x N` point matrix. Duplicate columns are
    /// rejected: they make the Gram matrix singular beyond jitter repair.
    pub fn explicit(points: DMatrix<T>) -> Result<Self> {
        let n = points.ncols();
        for i in 0..n {
            for j in (i + 1)..n {
                if points.column(i) == points.column(j) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: j,
                    });
                }
            }
        }
        Ok(Self {
            points,
            kappa: T::zero(),
            generator: SigmaGenerator::Explicit,
        })
    }

    pub fn points(&self) -> &DMatrix<T> {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn generator(&self) -> SigmaGenerator {
        self.generator
    }
}

/// Third-degree fully symmetric point set: the origin plus
/// `±sqrt(d + kappa) e_i`, giving `2d + 1` points with the origin in
/// column 0.
pub fn fully_symmetric_points<T: Real>(d: usize, kappa: T) -> UnitSigmaSet<T> {
    assert!(d >= 1, "dimension must be at least 1");
    let dk = cvt::<T>(d as f64) + kappa;
    assert!(dk > T::zero(), "d + kappa must be positive");
    let radius = dk.sqrt();
    let mut points = DMatrix::<T>::zeros(d, 2 * d + 1);
    for i in 0..d {
        points[(i, 1 + 2 * i)] = radius;
        points[(i, 2 + 2 * i)] = -radius;
    }
    UnitSigmaSet {
        points,
        kappa,
        generator: SigmaGenerator::FullySymmetric3,
    }
}

/// Unscented-transform weights for the fully symmetric point set:
/// `w₀ = κ/(d+κ)`, `wᵢ = 1/(2(d+κ))`. They sum to one.
pub fn ut_weights<T: Real>(d: usize, kappa: T) -> DVector<T> {
    let dk = cvt::<T>(d as f64) + kappa;
    assert!(dk > T::zero(), "d + kappa must be positive");
    let mut w = DVector::from_element(2 * d + 1, T::one() / (cvt::<T>(2.0) * dk));
    w[0] = kappa / dk;
    w
}

/// Quadrature weights derived from kernel expectations and the Gram matrix
/// of a unit point set.
///
/// `wm = K⁻¹ q`, `wc = K⁻¹ Qm K⁻¹`, `wcc = Rm K⁻¹`, all computed through the
/// stored triangular factor, never by explicit inversion. The model degrees
/// of freedom select the data-dependent variance scaling of the integrand
/// model; `None` fixes that scaling at one (the Gaussian-process limit).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BqWeights<T: Real> {
    pub wm: DVector<T>,
    pub wc: DMatrix<T>,
    pub wcc: DMatrix<T>,
    /// Kernel mean vector the weights were built from.
    pub q: DVector<T>,
    /// Kernel second-moment matrix; kept so transforms can evaluate
    /// `YᵀWcY` as `(K⁻¹Y)ᵀ Qm (K⁻¹Y)` through the factor, which loses far
    /// less precision when the Gram matrix is badly conditioned.
    pub qm: DMatrix<T>,
    /// Kernel cross-moment matrix, kept for the same factored evaluation of
    /// `Wcc Y`.
    pub rm: DMatrix<T>,
    pub kbar: T,
    pub kbar2: T,
    /// Lower Cholesky factor of the (jittered) Gram matrix.
    pub gram_factor: DMatrix<T>,
    /// Unit sigma points the Gram matrix was built on (`d x N`).
    pub unit_points: DMatrix<T>,
    /// `kbar - trace(Qm K⁻¹)`: expected model variance before the
    /// data-dependent scaling.
    pub var_bracket: T,
    /// `kbar2 - qᵀ K⁻¹ q`: integral variance before scaling.
    pub int_var_bracket: T,
    pub input_dof: Option<T>,
    /// Integrand-model degrees of freedom; `None` means the GP limit.
    pub model_dof: Option<T>,
}

impl<T: Real> BqWeights<T> {
    pub fn len(&self) -> usize {
        self.wm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wm.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.unit_points.nrows()
    }

    /// Data-dependent variance scaling
    /// `(ν̃ - 2 + yᵀK⁻¹y) / (ν̃ - 2 + N)` for observations `y`, or exactly 1
    /// in the GP limit.
    pub fn gamma(&self, y: &DVector<T>) -> T {
        match self.model_dof {
            None => T::one(),
            Some(nu) => {
                let half = self
                    .gram_factor
                    .solve_lower_triangular(y)
                    .expect("gram factor is triangular with positive diagonal");
                let quad = half.norm_squared();
                let base = nu - cvt::<T>(2.0);
                (base + quad) / (base + cvt::<T>(self.len() as f64))
            }
        }
    }

    /// Posterior mean and variance of the integral of a function observed as
    /// `y` at the sigma points.
    ///
    /// The mean is the quadrature form `Σ wm[i] y[i]`, accumulated in index
    /// order.
    pub fn integral_moments(&self, y: &DVector<T>) -> (T, T) {
        assert_eq!(y.len(), self.len(), "observation count mismatch");
        let mean = quad_sum(&self.wm, y);
        let variance = self.gamma(y) * self.int_var_bracket;
        (mean, variance)
    }

    /// Solves `K X = B` through the stored triangular factor.
    pub fn solve_gram(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let half = self
            .gram_factor
            .solve_lower_triangular(b)
            .expect("gram factor is triangular with positive diagonal");
        self.gram_factor
            .transpose()
            .solve_upper_triangular(&half)
            .expect("gram factor is triangular with positive diagonal")
    }
}

/// In-order weighted sum `Σ w[i] y[i]`; the canonical quadrature evaluation
/// used everywhere a mean estimate is produced.
pub fn quad_sum<T: Real>(w: &DVector<T>, y: &DVector<T>) -> T {
    w.iter()
        .zip(y.iter())
        .fold(T::zero(), |acc, (wi, yi)| acc + *wi * *yi)
}

/// Builds quadrature weights from kernel expectations and the raw Gram
/// matrix of the same point set.
///
/// `model_dof = Some(ν̃)` requires `ν̃ > 2`; `None` selects the GP limit.
pub fn bq_weights<T: Real>(
    ke: &KernelExpectations<T>,
    gram: &DMatrix<T>,
    set: &UnitSigmaSet<T>,
    model_dof: Option<T>,
) -> Result<BqWeights<T>> {
    let n = set.len();
    if ke.q.len() != n || gram.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: ke.q.len(),
        });
    }
    if let Some(nu) = model_dof {
        if nu <= cvt::<T>(2.0) {
            return Err(Error::ModelDofTooSmall {
                dof: nu.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let factor = cholesky_spd(gram)?;
    let wm = factor.solve_vec(&ke.q);
    // K⁻¹ Qm, then K⁻¹ (K⁻¹ Qm)ᵀ = K⁻¹ Qm K⁻¹ by symmetry of Qm.
    let k_inv_qm = factor.solve_mat(&ke.qm);
    let mut wc = factor.solve_mat(&k_inv_qm.transpose());
    linalg::symmetrize(&mut wc);
    // Rm K⁻¹ = (K⁻¹ Rmᵀ)ᵀ.
    let wcc = factor.solve_mat(&ke.rm.transpose()).transpose();
    let var_bracket = ke.kbar - k_inv_qm.trace();
    let int_var_bracket = ke.kbar2 - quad_sum(&wm, &ke.q);
    Ok(BqWeights {
        wm,
        wc,
        wcc,
        q: ke.q.clone(),
        qm: ke.qm.clone(),
        rm: ke.rm.clone(),
        kbar: ke.kbar,
        kbar2: ke.kbar2,
        gram_factor: factor.lower().clone(),
        unit_points: set.points().clone(),
        var_bracket,
        int_var_bracket,
        input_dof: ke.input_dof,
        model_dof,
    })
}

/// Training data for a TP/GP regression posterior.
#[derive(Debug, Clone)]
pub struct RegressionData<T: Real> {
    pub inputs: DMatrix<T>,
    pub observations: DVector<T>,
    pub kernel: RbfKernel<T>,
    pub model_dof: T,
}

/// Student-t process posterior mean and variance at a query point.
///
/// The mean is the kernel interpolant `k(x)ᵀ K⁻¹ y`; the variance is the GP
/// posterior variance scaled by `(ν̃ - 2 + yᵀK⁻¹y) / (ν̃ - 2 + N)`.
pub fn tp_posterior<T: Real>(data: &RegressionData<T>, query: &DVector<T>) -> Result<(T, T)> {
    if data.model_dof <= cvt::<T>(2.0) {
        return Err(Error::ModelDofTooSmall {
            dof: data.model_dof.to_f64().unwrap_or(f64::NAN),
        });
    }
    posterior_impl(data, query, Some(data.model_dof))
}

/// Gaussian-process posterior (the infinite-dof limit of [`tp_posterior`]).
pub fn gp_posterior<T: Real>(data: &RegressionData<T>, query: &DVector<T>) -> Result<(T, T)> {
    posterior_impl(data, query, None)
}

fn posterior_impl<T: Real>(
    data: &RegressionData<T>,
    query: &DVector<T>,
    model_dof: Option<T>,
) -> Result<(T, T)> {
    let n = data.inputs.ncols();
    if data.observations.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: data.observations.len(),
        });
    }
    let gram = data.kernel.gram(&data.inputs);
    let factor = cholesky_spd(&gram)?;
    let k_query = DVector::from_fn(n, |i, _| {
        data.kernel.eval(query, &data.inputs.column(i).into_owned())
    });
    let alpha = factor.solve_vec(&data.observations);
    let mean = quad_sum(&k_query, &alpha);
    let prior_var = data.kernel.eval(query, query);
    let explained = factor.quad_form(&k_query);
    let gamma = match model_dof {
        None => T::one(),
        Some(nu) => {
            let base = nu - cvt::<T>(2.0);
            (base + factor.quad_form(&data.observations)) / (base + cvt::<T>(n as f64))
        }
    };
    Ok((mean, gamma * (prior_var - explained)))
}
