//! Student-t sigma-point filter with pluggable moment transforms, plus a
//! Gaussian UKF baseline.
//!
//! One filter step forms the predictive state moments from the dynamics,
//! the predictive measurement moments from the measurement function, applies
//! the Student-t conditioning update
//!
//! ```text
//! m⁺ = m⁻ + C S⁻¹ (z - μ_z)
//! P⁺ = (ν - 2 + β)/(ν - 2 + d_z) · (P⁻ - C S⁻¹ Cᵀ),   β = (z-μ_z)ᵀ S⁻¹ (z-μ_z)
//! ```
//!
//! and then moment-matches the conditioned state back to the operating
//! degrees of freedom: the mean and covariance are kept, only the nominal
//! dof is reset, so the filter keeps operating at its configured tail
//! weight instead of drifting toward a Kalman filter.
//!
//! When the state, process-noise, and measurement-noise dofs differ, joints
//! are formed at the smallest dof of their blocks (the heaviest tail wins),
//! which is also what the update rule uses.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_spd};
use crate::quadrature::{fully_symmetric_points, ut_weights, BqWeights};
use crate::stats::Gaussian;
use crate::transforms::{
    classical_transform, psd_repair, tpq_transform, MomentTriple, NoiseMode, TransformInput,
};
use crate::{cvt, Real};

/// Nonlinear state-space model with zero-mean process and measurement noise.
///
/// `dynamics` receives the (1-based) index of the step being predicted, so
/// models with explicit time dependence can be expressed.
pub trait StateSpaceModel<T: Real>: Sync {
    fn state_dim(&self) -> usize;
    fn process_noise_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    fn measurement_noise_dim(&self) -> usize;

    fn dynamics(&self, x: &DVector<T>, q: &DVector<T>, step: usize) -> DVector<T>;
    fn measurement(&self, x: &DVector<T>, r: &DVector<T>) -> DVector<T>;

    /// Process noise covariance (`n_q x n_q`).
    fn process_noise_cov(&self) -> DMatrix<T>;
    /// Measurement noise covariance (`n_r x n_r`).
    fn measurement_noise_cov(&self) -> DMatrix<T>;

    fn dynamics_additive(&self) -> bool;
    fn measurement_additive(&self) -> bool;

    /// Effective additive process covariance on the state (`n x n`); only
    /// consulted when `dynamics_additive` is true. Models whose noise enters
    /// through a gain matrix `G` return `G Q Gᵀ` here.
    fn additive_process_cov(&self) -> DMatrix<T> {
        self.process_noise_cov()
    }

    /// Measurement coordinates that live on the circle; their innovations
    /// are wrapped to `(-π, π]`.
    fn angular_measurement_indices(&self) -> &[usize] {
        &[]
    }
}

/// Filtered Student state: mean, covariance, and the operating dof.
#[derive(Debug, Clone)]
pub struct StudentFilterState<T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub dof: T,
}

/// Moment transform selection for one side (dynamics or measurement) of the
/// filter.
#[derive(Debug, Clone)]
pub enum TransformSpec<T: Real> {
    /// Classical quadrature on the fully symmetric point set with
    /// unscented-transform weights.
    Classical { kappa: T },
    /// Bayesian-quadrature transform; TPQ when the weights carry a model
    /// dof, GPQ when they do not.
    Bq(Arc<BqWeights<T>>),
}

/// Filter configuration: transforms plus the operating degrees of freedom.
#[derive(Debug, Clone)]
pub struct FilterConfig<T: Real> {
    pub transform_dynamics: TransformSpec<T>,
    pub transform_measurement: TransformSpec<T>,
    /// State dof maintained across steps.
    pub operating_dof: T,
    pub process_noise_dof: T,
    pub measurement_noise_dof: T,
}

impl<T: Real> FilterConfig<T> {
    pub fn new(
        transform_dynamics: TransformSpec<T>,
        transform_measurement: TransformSpec<T>,
        operating_dof: T,
        process_noise_dof: T,
        measurement_noise_dof: T,
    ) -> Result<Self> {
        for dof in [operating_dof, process_noise_dof, measurement_noise_dof] {
            if dof <= cvt::<T>(2.0) {
                return Err(Error::DofTooSmall {
                    dof: dof.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self {
            transform_dynamics,
            transform_measurement,
            operating_dof,
            process_noise_dof,
            measurement_noise_dof,
        })
    }

    /// Same transforms and dof on both sides.
    pub fn uniform(
        transform_dynamics: TransformSpec<T>,
        transform_measurement: TransformSpec<T>,
        dof: T,
    ) -> Result<Self> {
        Self::new(transform_dynamics, transform_measurement, dof, dof, dof)
    }

    /// Dof of the joint (state, process noise) input.
    pub fn predict_dof(&self) -> T {
        self.operating_dof.min(self.process_noise_dof)
    }

    /// Dof of the joint (state, measurement noise) input; also the dof of
    /// the conditioning update.
    pub fn update_dof(&self) -> T {
        self.operating_dof.min(self.measurement_noise_dof)
    }
}

fn apply_transform<T: Real>(
    spec: &TransformSpec<T>,
    input: &TransformInput<'_, T>,
) -> Result<MomentTriple<T>> {
    match spec {
        TransformSpec::Classical { kappa } => {
            let set = fully_symmetric_points(input.dim(), *kappa);
            let w = ut_weights(input.dim(), *kappa);
            classical_transform(&set, &w, input)
        }
        TransformSpec::Bq(weights) => tpq_transform(weights, input),
    }
}

fn block_diag<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::<T>::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}

/// Predictive state mean and covariance for the next step.
pub fn predict<T: Real>(
    state: &StudentFilterState<T>,
    model: &dyn StateSpaceModel<T>,
    cfg: &FilterConfig<T>,
    step: usize,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = model.state_dim();
    let nq = model.process_noise_dim();
    let out = if model.dynamics_additive() {
        let q_zero = DVector::<T>::zeros(nq);
        let f = |x: &DVector<T>| model.dynamics(x, &q_zero, step);
        let input = TransformInput {
            mean: state.mean.clone(),
            cov: state.cov.clone(),
            dof: cfg.predict_dof(),
            function: &f,
            out_dim: n,
            noise_mode: NoiseMode::Additive(model.additive_process_cov()),
        };
        apply_transform(&cfg.transform_dynamics, &input)?
    } else {
        let mut mean = DVector::<T>::zeros(n + nq);
        mean.rows_mut(0, n).copy_from(&state.mean);
        let cov = block_diag(&state.cov, &model.process_noise_cov());
        let f = |xa: &DVector<T>| {
            let x = xa.rows(0, n).into_owned();
            let q = xa.rows(n, nq).into_owned();
            model.dynamics(&x, &q, step)
        };
        let input = TransformInput {
            mean,
            cov,
            dof: cfg.predict_dof(),
            function: &f,
            out_dim: n,
            noise_mode: NoiseMode::Augmented,
        };
        apply_transform(&cfg.transform_dynamics, &input)?
    };
    Ok((out.mean, out.cov))
}

/// Predictive measurement mean, covariance, and state-measurement
/// cross-covariance.
pub fn measurement_moments<T: Real>(
    pred_mean: &DVector<T>,
    pred_cov: &DMatrix<T>,
    model: &dyn StateSpaceModel<T>,
    cfg: &FilterConfig<T>,
) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>)> {
    let n = model.state_dim();
    let nr = model.measurement_noise_dim();
    let dz = model.measurement_dim();
    if model.measurement_additive() {
        let r_zero = DVector::<T>::zeros(nr);
        let h = |x: &DVector<T>| model.measurement(x, &r_zero);
        let input = TransformInput {
            mean: pred_mean.clone(),
            cov: pred_cov.clone(),
            dof: cfg.update_dof(),
            function: &h,
            out_dim: dz,
            noise_mode: NoiseMode::Additive(model.measurement_noise_cov()),
        };
        let out = apply_transform(&cfg.transform_measurement, &input)?;
        Ok((out.mean, out.cov, out.cross_cov))
    } else {
        let mut mean = DVector::<T>::zeros(n + nr);
        mean.rows_mut(0, n).copy_from(pred_mean);
        let cov = block_diag(pred_cov, &model.measurement_noise_cov());
        let h = |xa: &DVector<T>| {
            let x = xa.rows(0, n).into_owned();
            let r = xa.rows(n, nr).into_owned();
            model.measurement(&x, &r)
        };
        let input = TransformInput {
            mean,
            cov,
            dof: cfg.update_dof(),
            function: &h,
            out_dim: dz,
            noise_mode: NoiseMode::Augmented,
        };
        let out = apply_transform(&cfg.transform_measurement, &input)?;
        let cross = out.cross_cov.rows(0, n).into_owned();
        Ok((out.mean, out.cov, cross))
    }
}

/// Wraps an angle difference to `(-π, π]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let pi = T::pi();
    let two_pi = pi + pi;
    let mut a = (x + pi) % two_pi;
    if a <= T::zero() {
        a += two_pi;
    }
    a - pi
}

fn wrapped_innovation<T: Real>(
    z: &DVector<T>,
    mu_z: &DVector<T>,
    angular: &[usize],
) -> DVector<T> {
    let mut innov = z - mu_z;
    for &i in angular {
        innov[i] = wrap_angle(innov[i]);
    }
    innov
}

/// Student-t measurement update of the predicted state.
pub fn update<T: Real>(
    pred: (&DVector<T>, &DMatrix<T>),
    model: &dyn StateSpaceModel<T>,
    cfg: &FilterConfig<T>,
    z: &DVector<T>,
) -> Result<StudentFilterState<T>> {
    let (pred_mean, pred_cov) = pred;
    let (mu_z, sigma_z, cross) = measurement_moments(pred_mean, pred_cov, model, cfg)?;
    let dz = model.measurement_dim();
    let factor = cholesky_spd(&sigma_z).map_err(|_| Error::SingularInnovationCovariance)?;

    let innov = wrapped_innovation(z, &mu_z, model.angular_measurement_indices());
    let beta = factor.quad_form(&innov);
    // Gain K = C S⁻¹ and the downdate C S⁻¹ Cᵀ from one factorization.
    let s_inv_ct = factor.solve_mat(&cross.transpose());
    let gain = s_inv_ct.transpose();
    let mean = pred_mean + &gain * &innov;

    let nu = cfg.update_dof();
    let two = cvt::<T>(2.0);
    let scale = (nu - two + beta) / (nu - two + cvt::<T>(dz as f64));
    let mut cov = (pred_cov - &cross * &s_inv_ct) * scale;
    linalg::symmetrize(&mut cov);
    let cov = psd_repair(&cov);

    // The conditioned dof would be nu + dz; moment matching back to the
    // operating dof keeps mean and covariance and replaces only the label.
    let _conditioned_dof = nu + cvt::<T>(dz as f64);
    Ok(StudentFilterState {
        mean,
        cov,
        dof: cfg.operating_dof,
    })
}

/// Failure during a filter run: the step that failed (1-based), the cause,
/// and the states produced before it.
#[derive(Debug)]
pub struct FilterRunFailure<T: Real> {
    pub step: usize,
    pub error: Error,
    pub partial: Vec<StudentFilterState<T>>,
}

impl<T: Real> std::fmt::Display for FilterRunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "filter run failed at step {}: {}", self.step, self.error)
    }
}

/// Runs the Student filter over a measurement sequence, one predict/update
/// pair per measurement.
pub fn run_filter<T: Real>(
    model: &dyn StateSpaceModel<T>,
    cfg: &FilterConfig<T>,
    measurements: &[DVector<T>],
    init: StudentFilterState<T>,
) -> std::result::Result<Vec<StudentFilterState<T>>, FilterRunFailure<T>> {
    let mut states = Vec::with_capacity(measurements.len());
    let mut current = init;
    for (idx, z) in measurements.iter().enumerate() {
        let step = idx + 1;
        let stepped = predict(&current, model, cfg, step)
            .and_then(|(m, p)| update((&m, &p), model, cfg, z));
        match stepped {
            Ok(next) => {
                states.push(next.clone());
                current = next;
            }
            Err(error) => {
                return Err(FilterRunFailure {
                    step,
                    error,
                    partial: states,
                })
            }
        }
    }
    Ok(states)
}

/// One predict/update step of the unscented Kalman filter.
pub fn ukf_step<T: Real>(
    state: &Gaussian<T>,
    model: &dyn StateSpaceModel<T>,
    kappa: T,
    step: usize,
    z: &DVector<T>,
) -> Result<Gaussian<T>> {
    // UT predict through the same classical transform machinery; the
    // Gaussian filter is the classical transform plus the Kalman update.
    let pseudo = StudentFilterState {
        mean: state.mean().clone(),
        cov: state.cov().clone(),
        dof: cvt::<T>(1e9),
    };
    let cfg = FilterConfig {
        transform_dynamics: TransformSpec::Classical { kappa },
        transform_measurement: TransformSpec::Classical { kappa },
        operating_dof: cvt::<T>(1e9),
        process_noise_dof: cvt::<T>(1e9),
        measurement_noise_dof: cvt::<T>(1e9),
    };
    let (pred_mean, pred_cov) = predict(&pseudo, model, &cfg, step)?;
    let (mu_z, sigma_z, cross) = measurement_moments(&pred_mean, &pred_cov, model, &cfg)?;
    let factor = cholesky_spd(&sigma_z).map_err(|_| Error::SingularInnovationCovariance)?;
    let innov = wrapped_innovation(z, &mu_z, model.angular_measurement_indices());
    let s_inv_ct = factor.solve_mat(&cross.transpose());
    let gain = s_inv_ct.transpose();
    let mean = &pred_mean + &gain * &innov;
    let mut cov = &pred_cov - &cross * &s_inv_ct;
    linalg::symmetrize(&mut cov);
    let cov = psd_repair(&cov);
    Gaussian::new(mean, cov)
}
