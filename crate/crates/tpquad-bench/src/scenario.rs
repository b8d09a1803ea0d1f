//! Benchmark scenarios: the univariate non-stationary growth model and a
//! constant-velocity radar tracking problem with glint measurement noise,
//! plus their trajectory simulators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tpquad::filters::StateSpaceModel;
use tpquad::stats::{derive_seed, Gaussian, GaussianMixture};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Ungm,
    Radar,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Ungm => "ungm",
            ScenarioKind::Radar => "radar",
        }
    }
}

/// Growth-model constants. The true noises are two-component Gaussian
/// mixtures around the base covariances; filters assume the base
/// covariances only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UngmParams {
    pub process_noise_base: f64,
    pub measurement_noise_base: f64,
    pub outlier_weight: f64,
    pub process_outlier_factor: f64,
    pub measurement_outlier_factor: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

impl Default for UngmParams {
    fn default() -> Self {
        Self {
            process_noise_base: 10.0,
            measurement_noise_base: 0.01,
            outlier_weight: 0.2,
            process_outlier_factor: 10.0,
            measurement_outlier_factor: 100.0,
            init_mean: 0.0,
            init_var: 1.0,
        }
    }
}

/// Radar tracking constants (SI units: meters, radians, seconds). The
/// nominal/glint diagonal entries are (range m², bearing rad²).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarParams {
    pub tau: f64,
    pub glint_probability: f64,
    pub process_noise_diag: [f64; 2],
    pub nominal_noise_diag: [f64; 2],
    pub glint_noise_diag: [f64; 2],
    pub truth_init_mean: [f64; 4],
    pub init_cov_diag: [f64; 4],
}

impl Default for RadarParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            glint_probability: 0.15,
            process_noise_diag: [50.0, 5.0],
            // 0.4 mrad² and 16 mrad² expressed in rad².
            nominal_noise_diag: [50.0, 0.4e-6],
            glint_noise_diag: [5000.0, 16.0e-6],
            truth_init_mean: [10000.0, 300.0, 1000.0, -40.0],
            init_cov_diag: [10000.0, 100.0, 10000.0, 100.0],
        }
    }
}

/// Fully resolved benchmark scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub n_trajectories: usize,
    pub n_steps: usize,
    pub master_seed: u64,
    pub ungm: UngmParams,
    pub radar: RadarParams,
}

/// One simulated trajectory: true states and the measurements every filter
/// consumes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

/// Univariate non-stationary growth model,
/// `x' = 0.5 x + 25 x/(1+x²) + 8 cos(1.2 k) + q`, `z = 0.05 x² + r`.
///
/// The noise covariances are what the filters assume (the mixture base
/// covariances), not the mixture truth.
#[derive(Debug, Clone)]
pub struct UngmModel {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl UngmModel {
    pub fn new(params: &UngmParams) -> Self {
        Self {
            q: DMatrix::from_element(1, 1, params.process_noise_base),
            r: DMatrix::from_element(1, 1, params.measurement_noise_base),
        }
    }
}

impl StateSpaceModel<f64> for UngmModel {
    fn state_dim(&self) -> usize {
        1
    }
    fn process_noise_dim(&self) -> usize {
        1
    }
    fn measurement_dim(&self) -> usize {
        1
    }
    fn measurement_noise_dim(&self) -> usize {
        1
    }
    fn dynamics(&self, x: &DVector<f64>, q: &DVector<f64>, step: usize) -> DVector<f64> {
        let xv = x[0];
        let drift = 0.5 * xv + 25.0 * xv / (1.0 + xv * xv) + 8.0 * (1.2 * step as f64).cos();
        DVector::from_element(1, drift + q[0])
    }
    fn measurement(&self, x: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 0.05 * x[0] * x[0] + r[0])
    }
    fn process_noise_cov(&self) -> DMatrix<f64> {
        self.q.clone()
    }
    fn measurement_noise_cov(&self) -> DMatrix<f64> {
        self.r.clone()
    }
    fn dynamics_additive(&self) -> bool {
        true
    }
    fn measurement_additive(&self) -> bool {
        true
    }
}

/// Constant-velocity motion with range/bearing measurements,
/// state `(x, ẋ, y, ẏ)`.
#[derive(Debug, Clone)]
pub struct RadarCvModel {
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl RadarCvModel {
    pub fn new(params: &RadarParams) -> Self {
        let tau = params.tau;
        let f = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, tau, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, tau, //
                0.0, 0.0, 0.0, 1.0,
            ],
        );
        let g = DMatrix::from_row_slice(
            4,
            2,
            &[
                tau * tau / 2.0,
                0.0,
                tau,
                0.0,
                0.0,
                tau * tau / 2.0,
                0.0,
                tau,
            ],
        );
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&params.process_noise_diag));
        let r = DMatrix::from_diagonal(&DVector::from_column_slice(&params.nominal_noise_diag));
        Self { f, g, q, r }
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn noise_gain(&self) -> &DMatrix<f64> {
        &self.g
    }
}

impl StateSpaceModel<f64> for RadarCvModel {
    fn state_dim(&self) -> usize {
        4
    }
    fn process_noise_dim(&self) -> usize {
        2
    }
    fn measurement_dim(&self) -> usize {
        2
    }
    fn measurement_noise_dim(&self) -> usize {
        2
    }
    fn dynamics(&self, x: &DVector<f64>, q: &DVector<f64>, _step: usize) -> DVector<f64> {
        &self.f * x + &self.g * q
    }
    fn measurement(&self, x: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let range = (x[0] * x[0] + x[2] * x[2]).sqrt();
        let bearing = x[2].atan2(x[0]);
        DVector::from_vec(vec![range + r[0], bearing + r[1]])
    }
    fn process_noise_cov(&self) -> DMatrix<f64> {
        self.q.clone()
    }
    fn measurement_noise_cov(&self) -> DMatrix<f64> {
        self.r.clone()
    }
    fn dynamics_additive(&self) -> bool {
        true
    }
    fn measurement_additive(&self) -> bool {
        true
    }
    fn additive_process_cov(&self) -> DMatrix<f64> {
        &self.g * &self.q * self.g.transpose()
    }
    fn angular_measurement_indices(&self) -> &[usize] {
        &[1]
    }
}

/// The state-space model filters run against for a scenario.
pub enum ScenarioModel {
    Ungm(UngmModel),
    Radar(RadarCvModel),
}

impl ScenarioModel {
    pub fn as_dyn(&self) -> &dyn StateSpaceModel<f64> {
        match self {
            ScenarioModel::Ungm(m) => m,
            ScenarioModel::Radar(m) => m,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.as_dyn().state_dim()
    }
}

impl Scenario {
    pub fn model(&self) -> ScenarioModel {
        match self.kind {
            ScenarioKind::Ungm => ScenarioModel::Ungm(UngmModel::new(&self.ungm)),
            ScenarioKind::Radar => ScenarioModel::Radar(RadarCvModel::new(&self.radar)),
        }
    }

    fn ungm_process_mixture(&self) -> GaussianMixture<f64> {
        let p = &self.ungm;
        mixture_1d(
            p.process_noise_base,
            p.process_outlier_factor,
            p.outlier_weight,
        )
    }

    fn ungm_measurement_mixture(&self) -> GaussianMixture<f64> {
        let p = &self.ungm;
        mixture_1d(
            p.measurement_noise_base,
            p.measurement_outlier_factor,
            p.outlier_weight,
        )
    }

    fn radar_glint_mixture(&self) -> GaussianMixture<f64> {
        let p = &self.radar;
        let nominal = Gaussian::new(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_column_slice(&p.nominal_noise_diag)),
        )
        .expect("nominal noise covariance is diagonal positive");
        let glint = Gaussian::new(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_column_slice(&p.glint_noise_diag)),
        )
        .expect("glint noise covariance is diagonal positive");
        GaussianMixture::new(vec![
            (1.0 - p.glint_probability, nominal),
            (p.glint_probability, glint),
        ])
        .expect("glint probability validated at config resolution")
    }

    /// Simulates all trajectories. Trajectory `i` draws from streams derived
    /// as `derive_seed(master_seed, i)`, with sub-streams 0 (initial state),
    /// 1 (process noise), and 2 (measurement noise); the result is a pure
    /// function of the scenario.
    pub fn simulate(&self) -> Vec<Trajectory> {
        (0..self.n_trajectories)
            .into_par_iter()
            .map(|i| self.simulate_one(derive_seed(self.master_seed, i as u64)))
            .collect()
    }

    fn simulate_one(&self, seed: u64) -> Trajectory {
        match self.kind {
            ScenarioKind::Ungm => {
                let model = UngmModel::new(&self.ungm);
                let init = Gaussian::new(
                    DVector::from_element(1, self.ungm.init_mean),
                    DMatrix::from_element(1, 1, self.ungm.init_var),
                )
                .expect("scalar init");
                self.roll_out(&model, &init, &self.ungm_process_mixture(), &self.ungm_measurement_mixture(), seed)
            }
            ScenarioKind::Radar => {
                let model = RadarCvModel::new(&self.radar);
                let init = Gaussian::new(
                    DVector::from_column_slice(&self.radar.truth_init_mean),
                    DMatrix::from_diagonal(&DVector::from_column_slice(
                        &self.radar.init_cov_diag,
                    )),
                )
                .expect("diagonal init covariance");
                let q = Gaussian::new(
                    DVector::zeros(2),
                    DMatrix::from_diagonal(&DVector::from_column_slice(
                        &self.radar.process_noise_diag,
                    )),
                )
                .expect("diagonal process noise");
                let process = GaussianMixture::new(vec![(1.0, q)]).expect("single component");
                self.roll_out(&model, &init, &process, &self.radar_glint_mixture(), seed)
            }
        }
    }

    fn roll_out(
        &self,
        model: &dyn StateSpaceModel<f64>,
        init: &Gaussian<f64>,
        process: &GaussianMixture<f64>,
        measurement: &GaussianMixture<f64>,
        seed: u64,
    ) -> Trajectory {
        let steps = self.n_steps;
        let x0 = init.sample(1, derive_seed(seed, 0)).row(0).transpose();
        let qs = process.sample(steps, derive_seed(seed, 1));
        let rs = measurement.sample(steps, derive_seed(seed, 2));
        let mut states = Vec::with_capacity(steps);
        let mut measurements = Vec::with_capacity(steps);
        let mut x = x0;
        for k in 1..=steps {
            let q = qs.row(k - 1).transpose();
            let r = rs.row(k - 1).transpose();
            x = model.dynamics(&x, &q, k);
            measurements.push(model.measurement(&x, &r));
            states.push(x.clone());
        }
        Trajectory {
            states,
            measurements,
        }
    }
}

fn mixture_1d(base: f64, factor: f64, outlier_weight: f64) -> GaussianMixture<f64> {
    let nominal = Gaussian::new(DVector::zeros(1), DMatrix::from_element(1, 1, base))
        .expect("positive base covariance");
    let outlier = Gaussian::new(DVector::zeros(1), DMatrix::from_element(1, 1, factor * base))
        .expect("positive outlier covariance");
    GaussianMixture::new(vec![(1.0 - outlier_weight, nominal), (outlier_weight, outlier)])
        .expect("weights sum to one")
}
