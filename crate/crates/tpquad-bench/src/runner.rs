//! Benchmark orchestration: weight provisioning, per-trajectory filter runs,
//! metric aggregation, and report assembly.
//!
//! Every filter consumes the same simulated measurement sequences, and the
//! whole run is a pure function of the configuration: trajectory workers run
//! in parallel but are collected in index order, and every random stream is
//! derived from the master seed.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use tpquad::cache::{point_set_hash, CacheEntry, CacheKey, WeightsCache};
use tpquad::filters::{
    run_filter, ukf_step, FilterConfig, StateSpaceModel, StudentFilterState, TransformSpec,
};
use tpquad::kernels::{mc_expectations, KernelExpectations, RbfKernel};
use tpquad::quadrature::{bq_weights, fully_symmetric_points, BqWeights, UnitSigmaSet};
use tpquad::stats::{derive_seed, Gaussian};

use crate::config::{BenchConfig, FilterEntry, FilterFamily};
use crate::error::{BenchError, Result};
use crate::metrics;
use crate::report::{FilterReport, MetricsReport, ScenarioMeta};
use crate::scenario::{Scenario, ScenarioKind, Trajectory};

/// Stream offset separating bootstrap seeds from trajectory seeds.
const BOOTSTRAP_STREAM_BASE: u64 = 1 << 40;

/// Resolved transform pair (dynamics, measurement) for one filter entry.
pub struct EntryTransforms {
    pub dynamics: TransformSpec<f64>,
    pub measurement: TransformSpec<f64>,
}

fn bits_of(theta: &[f64]) -> Vec<u64> {
    theta.iter().map(|t| t.to_bits()).collect()
}

/// Builds (or loads) every Bayesian-quadrature weight set the filter bank
/// needs. Kernel expectations are shared between filters that agree on the
/// kernel and input dof; only the cheap weight assembly is repeated per
/// model dof.
pub struct WeightProvisioner {
    set: UnitSigmaSet<f64>,
    mc_samples: usize,
    mc_seed: u64,
    cache: WeightsCache,
    expectations: HashMap<(Vec<u64>, u64), Arc<KernelExpectations<f64>>>,
    weights: HashMap<(Vec<u64>, u64, u64), Arc<BqWeights<f64>>>,
}

impl WeightProvisioner {
    pub fn new(cfg: &BenchConfig, state_dim: usize) -> Result<Self> {
        let cache = match &cfg.weights.cache {
            Some(path) => WeightsCache::load(path).map_err(|e| {
                BenchError::Config(format!("weights cache {}: {e}", path.display()))
            })?,
            None => WeightsCache::default(),
        };
        Ok(Self {
            set: fully_symmetric_points(state_dim, 0.0),
            mc_samples: cfg.weights.mc_samples,
            mc_seed: cfg.weights.mc_seed,
            cache,
            expectations: HashMap::new(),
            weights: HashMap::new(),
        })
    }

    fn expectations_for(&mut self, theta: &[f64], input_dof: f64) -> Result<Arc<KernelExpectations<f64>>> {
        let key = (bits_of(theta), input_dof.to_bits());
        if let Some(ke) = self.expectations.get(&key) {
            return Ok(ke.clone());
        }
        let kernel = RbfKernel::from_params(theta)?;
        let ke = Arc::new(mc_expectations(
            &kernel,
            self.set.points(),
            input_dof,
            self.mc_samples,
            self.mc_seed,
        )?);
        self.expectations.insert(key, ke.clone());
        Ok(ke)
    }

    fn cache_key(&self, theta: &[f64], input_dof: f64, model_dof: Option<f64>) -> CacheKey {
        CacheKey {
            theta: theta.to_vec(),
            points_hash: point_set_hash(self.set.points()),
            input_dof: Some(input_dof),
            mc_samples: self.mc_samples,
            seed: self.mc_seed,
            model_dof,
        }
    }

    /// Weight set for one transform side.
    pub fn weights_for(
        &mut self,
        theta: &[f64],
        input_dof: f64,
        model_dof: Option<f64>,
    ) -> Result<Arc<BqWeights<f64>>> {
        let key = (
            bits_of(theta),
            input_dof.to_bits(),
            model_dof.map_or(u64::MAX, f64::to_bits),
        );
        if let Some(w) = self.weights.get(&key) {
            return Ok(w.clone());
        }
        let w = if let Some(entry) = self.cache.lookup(&self.cache_key(theta, input_dof, model_dof)) {
            Arc::new(entry.weights.clone())
        } else {
            let ke = self.expectations_for(theta, input_dof)?;
            let kernel = RbfKernel::from_params(theta)?;
            let gram = kernel.gram(self.set.points());
            Arc::new(bq_weights(&ke, &gram, &self.set, model_dof)?)
        };
        self.weights.insert(key, w.clone());
        Ok(w)
    }

    /// Transform pair for a filter entry.
    pub fn transforms_for(&mut self, entry: &FilterEntry) -> Result<EntryTransforms> {
        match entry.family {
            FilterFamily::Ukf | FilterFamily::Sf => Ok(EntryTransforms {
                dynamics: TransformSpec::Classical { kappa: entry.kappa },
                measurement: TransformSpec::Classical { kappa: entry.kappa },
            }),
            FilterFamily::Gpqsf | FilterFamily::Tpqsf => {
                let dyn_w =
                    self.weights_for(&entry.theta_dynamics, entry.predict_dof(), entry.model_dof)?;
                let meas_w = self.weights_for(
                    &entry.theta_measurement,
                    entry.update_dof(),
                    entry.model_dof,
                )?;
                Ok(EntryTransforms {
                    dynamics: TransformSpec::Bq(dyn_w),
                    measurement: TransformSpec::Bq(meas_w),
                })
            }
        }
    }

    /// All weight sets for the bank, as cache entries ready to persist.
    pub fn precompute_all(&mut self, entries: &[FilterEntry]) -> Result<WeightsCache> {
        let mut out = WeightsCache::default();
        for entry in entries {
            if matches!(entry.family, FilterFamily::Ukf | FilterFamily::Sf) {
                continue;
            }
            for (theta, dof) in [
                (entry.theta_dynamics.clone(), entry.predict_dof()),
                (entry.theta_measurement.clone(), entry.update_dof()),
            ] {
                let ke = self.expectations_for(&theta, dof)?;
                let weights = self.weights_for(&theta, dof, entry.model_dof)?;
                out.insert(CacheEntry {
                    key: self.cache_key(&theta, dof, entry.model_dof),
                    expectations: (*ke).clone(),
                    weights: (*weights).clone(),
                });
            }
        }
        Ok(out)
    }
}

/// State-space model with the noise covariances a filter entry assumes,
/// which may deliberately differ from the simulation truth.
struct AssumedModel<'a> {
    inner: &'a dyn StateSpaceModel<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    additive_q: DMatrix<f64>,
}

impl<'a> AssumedModel<'a> {
    fn new(inner: &'a dyn StateSpaceModel<f64>, entry: &FilterEntry) -> Self {
        let q = match &entry.assumed_process_cov_diag {
            Some(diag) => DMatrix::from_diagonal(&DVector::from_vec(diag.clone())),
            None => inner.process_noise_cov(),
        };
        let r = match &entry.assumed_measurement_cov_diag {
            Some(diag) => DMatrix::from_diagonal(&DVector::from_vec(diag.clone())),
            None => inner.measurement_noise_cov(),
        };
        let additive_q = if q == inner.process_noise_cov() {
            inner.additive_process_cov()
        } else {
            // Push the overridden covariance through the model's noise gain:
            // for additive dynamics f(x, q) = g(x) + G q, the columns of G
            // are f(0, e_j, 1) - f(0, 0, 1).
            let n = inner.state_dim();
            let nq = inner.process_noise_dim();
            let base = inner.dynamics(&DVector::zeros(n), &DVector::zeros(nq), 1);
            let mut gain = DMatrix::<f64>::zeros(n, nq);
            for j in 0..nq {
                let mut e = DVector::<f64>::zeros(nq);
                e[j] = 1.0;
                gain.set_column(j, &(inner.dynamics(&DVector::zeros(n), &e, 1) - &base));
            }
            &gain * &q * gain.transpose()
        };
        Self {
            inner,
            q,
            r,
            additive_q,
        }
    }
}

impl StateSpaceModel<f64> for AssumedModel<'_> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn process_noise_dim(&self) -> usize {
        self.inner.process_noise_dim()
    }
    fn measurement_dim(&self) -> usize {
        self.inner.measurement_dim()
    }
    fn measurement_noise_dim(&self) -> usize {
        self.inner.measurement_noise_dim()
    }
    fn dynamics(&self, x: &DVector<f64>, q: &DVector<f64>, step: usize) -> DVector<f64> {
        self.inner.dynamics(x, q, step)
    }
    fn measurement(&self, x: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        self.inner.measurement(x, r)
    }
    fn process_noise_cov(&self) -> DMatrix<f64> {
        self.q.clone()
    }
    fn measurement_noise_cov(&self) -> DMatrix<f64> {
        self.r.clone()
    }
    fn dynamics_additive(&self) -> bool {
        self.inner.dynamics_additive()
    }
    fn measurement_additive(&self) -> bool {
        self.inner.measurement_additive()
    }
    fn additive_process_cov(&self) -> DMatrix<f64> {
        self.additive_q.clone()
    }
    fn angular_measurement_indices(&self) -> &[usize] {
        self.inner.angular_measurement_indices()
    }
}

/// Per-trajectory outcome for one filter.
struct TrajOutcome {
    errors: Vec<DVector<f64>>,
    numerators: Vec<f64>,
    rmse: f64,
    failed: bool,
}

fn failed_outcome() -> TrajOutcome {
    TrajOutcome {
        errors: Vec::new(),
        numerators: Vec::new(),
        rmse: f64::NAN,
        failed: true,
    }
}

/// Reported-covariance quadratic form `eᵀ P⁻¹ e` from the lower Cholesky
/// factor of `P`.
fn quad_form_from_factor(lower: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    lower
        .solve_lower_triangular(e)
        .expect("factor has positive diagonal")
        .norm_squared()
}

fn run_student_trajectory(
    entry: &FilterEntry,
    transforms: &EntryTransforms,
    model: &dyn StateSpaceModel<f64>,
    traj: &Trajectory,
) -> TrajOutcome {
    let cfg = match FilterConfig::new(
        transforms.dynamics.clone(),
        transforms.measurement.clone(),
        entry.state_dof,
        entry.process_noise_dof,
        entry.measurement_noise_dof,
    ) {
        Ok(cfg) => cfg,
        Err(_) => return failed_outcome(),
    };
    let init = StudentFilterState {
        mean: entry.init_mean.clone(),
        cov: entry.init_cov.clone(),
        dof: entry.state_dof,
    };
    let states = match run_filter(model, &cfg, &traj.measurements, init) {
        Ok(states) => states,
        Err(_) => return failed_outcome(),
    };
    outcome_from_estimates(
        traj,
        states.iter().map(|s| (&s.mean, &s.cov)),
    )
}

fn run_ukf_trajectory(
    entry: &FilterEntry,
    model: &dyn StateSpaceModel<f64>,
    traj: &Trajectory,
) -> TrajOutcome {
    let mut state = match Gaussian::new(entry.init_mean.clone(), entry.init_cov.clone()) {
        Ok(g) => g,
        Err(_) => return failed_outcome(),
    };
    let mut means = Vec::with_capacity(traj.measurements.len());
    let mut covs = Vec::with_capacity(traj.measurements.len());
    for (idx, z) in traj.measurements.iter().enumerate() {
        state = match ukf_step(&state, model, entry.kappa, idx + 1, z) {
            Ok(s) => s,
            Err(_) => return failed_outcome(),
        };
        means.push(state.mean().clone());
        covs.push(state.cov().clone());
    }
    outcome_from_estimates(traj, means.iter().zip(covs.iter()))
}

fn outcome_from_estimates<'a>(
    traj: &Trajectory,
    estimates: impl Iterator<Item = (&'a DVector<f64>, &'a DMatrix<f64>)>,
) -> TrajOutcome {
    let mut errors = Vec::with_capacity(traj.states.len());
    let mut numerators = Vec::with_capacity(traj.states.len());
    for (truth, (mean, cov)) in traj.states.iter().zip(estimates) {
        let e = truth - mean;
        let factor = match tpquad::linalg::cholesky_spd(cov) {
            Ok(f) => f,
            Err(_) => return failed_outcome(),
        };
        numerators.push(quad_form_from_factor(factor.lower(), &e));
        errors.push(e);
    }
    let rmse = metrics::rmse_from_errors(&errors);
    TrajOutcome {
        errors,
        numerators,
        rmse,
        failed: false,
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs the whole benchmark: simulate once, run every filter on identical
/// measurements, aggregate RMSE/INC with bootstrap standard deviations.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<MetricsReport> {
    let scenario = cfg.resolve_scenario()?;
    let entries = cfg.resolve_filters()?;
    if entries.is_empty() {
        return Err(BenchError::Config("filter bank is empty".into()));
    }
    let trajectories = scenario.simulate();
    let model_holder = scenario.model();
    let model = model_holder.as_dyn();

    let mut provisioner = WeightProvisioner::new(cfg, model.state_dim())?;
    let mut transform_pairs = Vec::with_capacity(entries.len());
    for entry in &entries {
        transform_pairs.push(provisioner.transforms_for(entry)?);
    }

    let mut filter_reports = Vec::with_capacity(entries.len());
    for (fi, (entry, transforms)) in entries.iter().zip(transform_pairs.iter()).enumerate() {
        let assumed = AssumedModel::new(model, entry);
        let outcomes: Vec<TrajOutcome> = trajectories
            .par_iter()
            .map(|traj| match entry.family {
                FilterFamily::Ukf => run_ukf_trajectory(entry, &assumed, traj),
                _ => run_student_trajectory(entry, transforms, &assumed, traj),
            })
            .collect();

        let succeeded: Vec<&TrajOutcome> = outcomes.iter().filter(|o| !o.failed).collect();
        let failures = outcomes.len() - succeeded.len();
        if succeeded.len() < 2 {
            return Err(BenchError::SingularMatrix(format!(
                "filter '{}' failed on {failures} of {} trajectories",
                entry.label,
                outcomes.len()
            )));
        }

        let error_refs: Vec<&[DVector<f64>]> =
            succeeded.iter().map(|o| o.errors.as_slice()).collect();
        let mse = metrics::mse_matrices(&error_refs);
        let mse_factors = metrics::factorize_mse(&mse)?;

        let rmse_list: Vec<f64> = succeeded.iter().map(|o| o.rmse).collect();
        let inc_list: Vec<f64> = succeeded
            .iter()
            .map(|o| metrics::inc_from_parts(&o.errors, &o.numerators, &mse_factors))
            .collect();

        let rmse_std = metrics::bootstrap_std(
            &rmse_list,
            cfg.bootstrap.resamples,
            derive_seed(scenario.master_seed, BOOTSTRAP_STREAM_BASE + 2 * fi as u64),
        )?;
        let inc_std = metrics::bootstrap_std(
            &inc_list,
            cfg.bootstrap.resamples,
            derive_seed(scenario.master_seed, BOOTSTRAP_STREAM_BASE + 2 * fi as u64 + 1),
        )?;

        filter_reports.push(FilterReport {
            label: entry.label.clone(),
            family: entry.family.as_str().to_string(),
            mean_rmse: mean_of(&rmse_list),
            rmse_std,
            mean_inc: mean_of(&inc_list),
            inc_std,
            failures,
            rmse_per_trajectory: rmse_list,
            inc_per_trajectory: inc_list,
        });
    }

    Ok(MetricsReport {
        scenario: scenario_meta(cfg, &scenario),
        filters: filter_reports,
        timestamp: None,
    })
}

fn scenario_meta(cfg: &BenchConfig, scenario: &Scenario) -> ScenarioMeta {
    ScenarioMeta {
        kind: scenario.kind.as_str().to_string(),
        trajectories: scenario.n_trajectories,
        steps: scenario.n_steps,
        master_seed: scenario.master_seed,
        mc_samples: cfg.weights.mc_samples,
        mc_seed: cfg.weights.mc_seed,
        bootstrap_resamples: cfg.bootstrap.resamples,
        glint_probability: match scenario.kind {
            ScenarioKind::Radar => Some(scenario.radar.glint_probability),
            ScenarioKind::Ungm => None,
        },
    }
}

/// Computes every weight set the configured filter bank needs, for offline
/// persistence.
pub fn precompute_weights(cfg: &BenchConfig) -> Result<WeightsCache> {
    let entries = cfg.resolve_filters()?;
    let scenario = cfg.resolve_scenario()?;
    let model = scenario.model();
    let mut provisioner = WeightProvisioner::new(cfg, model.state_dim())?;
    provisioner.precompute_all(&entries)
}
