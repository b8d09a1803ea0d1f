//! Bayesian-quadrature moment transforms for Student-t distributed inputs,
//! and the sigma-point filters built on top of them.
//!
//! The crate is organized bottom-up:
//!
//! - [`stats`]: multivariate Gaussian / Student-t distributions, Gaussian
//!   mixtures, and seeded sampling.
//! - [`linalg`]: SPD Cholesky factorization with a jitter ladder, shared by
//!   every module that factorizes covariance or kernel matrices.
//! - [`kernels`]: the RBF kernel, Gram matrices, and kernel expectations
//!   under a standardized input density (closed form for Gaussian inputs,
//!   Monte Carlo for Student inputs).
//! - [`quadrature`]: unit sigma-point sets, quadrature weights derived from
//!   kernel expectations, and TP/GP regression posteriors.
//! - [`transforms`]: moment transforms (classical quadrature, GPQ, TPQ)
//!   mapping input moments through a nonlinearity.
//! - [`filters`]: the Student-t sigma-point filter with pluggable moment
//!   transforms, plus a Gaussian UKF baseline.
//! - [`cache`]: JSON persistence for precomputed kernel expectations and
//!   quadrature weights.
//!
//! All numerical code is generic over the scalar type through the [`Real`]
//! trait; `f64` aliases for the main types live at the crate root.
//! Public constructors always take **covariance** matrices. Student-t scale
//! matrices are an internal detail, which keeps the `(dof - 2) / dof`
//! conversion in exactly one place.

use num_traits::{FromPrimitive, ToPrimitive};

pub mod cache;
pub mod error;
pub mod filters;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};

/// Floating-point scalar the whole crate is generic over: `f32` or `f64`.
///
/// `RealField` supplies the transcendental functions, the num-traits
/// conversions supply literal constants and diagnostics.
pub trait Real: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy> Real for T {}

/// Converts an `f64` literal into the working scalar type.
pub(crate) fn cvt<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}

pub type Gaussian64 = stats::Gaussian<f64>;
pub type Student64 = stats::Student<f64>;
pub type GaussianMixture64 = stats::GaussianMixture<f64>;
pub type RbfKernel64 = kernels::RbfKernel<f64>;
pub type KernelExpectations64 = kernels::KernelExpectations<f64>;
pub type UnitSigmaSet64 = quadrature::UnitSigmaSet<f64>;
pub type BqWeights64 = quadrature::BqWeights<f64>;
pub type MomentTriple64 = transforms::MomentTriple<f64>;
pub type StudentFilterState64 = filters::StudentFilterState<f64>;
pub type FilterConfig64 = filters::FilterConfig<f64>;
