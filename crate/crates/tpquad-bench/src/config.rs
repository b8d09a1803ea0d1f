//! Benchmark configuration: TOML-facing structures whose defaults are the
//! benchmark constants, plus resolution into the runtime scenario and filter
//! bank.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::scenario::{RadarParams, Scenario, ScenarioKind, UngmParams};

/// Top-level benchmark configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    /// Filter bank; empty means the default bank of the scenario kind.
    #[serde(default)]
    pub filters: Vec<FilterSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub trajectories: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub ungm: UngmParams,
    #[serde(default)]
    pub radar: RadarParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    /// Monte Carlo draws per kernel-expectation set.
    pub mc_samples: usize,
    pub mc_seed: u64,
    /// Optional precomputed-weights cache to read.
    pub cache: Option<std::path::PathBuf>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            mc_samples: tpquad::kernels::DEFAULT_MC_SAMPLES,
            mc_seed: 353,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub resamples: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterFamily {
    Ukf,
    Sf,
    Gpqsf,
    Tpqsf,
}

impl FilterFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterFamily::Ukf => "ukf",
            FilterFamily::Sf => "sf",
            FilterFamily::Gpqsf => "gpqsf",
            FilterFamily::Tpqsf => "tpqsf",
        }
    }
}

/// One filter entry as written in a config file. Unset fields fall back to
/// the scenario defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub label: String,
    pub family: FilterFamily,
    #[serde(default)]
    pub kappa: f64,
    /// Integrand-model dof; required for `tpqsf`.
    pub model_dof: Option<f64>,
    pub state_dof: Option<f64>,
    pub process_noise_dof: Option<f64>,
    pub measurement_noise_dof: Option<f64>,
    pub theta_dynamics: Option<Vec<f64>>,
    pub theta_measurement: Option<Vec<f64>>,
    pub init_mean: Option<Vec<f64>>,
    pub init_cov_diag: Option<Vec<f64>>,
    /// Assumed process noise covariance diagonal; defaults to the scenario's
    /// nominal process noise.
    pub assumed_process_cov_diag: Option<Vec<f64>>,
    /// Assumed measurement noise covariance diagonal; defaults to the
    /// scenario's nominal measurement noise.
    pub assumed_measurement_cov_diag: Option<Vec<f64>>,
}

/// Fully resolved filter entry.
#[derive(Debug, Clone)]
pub struct FilterEntry {
    pub label: String,
    pub family: FilterFamily,
    pub kappa: f64,
    pub model_dof: Option<f64>,
    pub state_dof: f64,
    pub process_noise_dof: f64,
    pub measurement_noise_dof: f64,
    pub theta_dynamics: Vec<f64>,
    pub theta_measurement: Vec<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    pub assumed_process_cov_diag: Option<Vec<f64>>,
    pub assumed_measurement_cov_diag: Option<Vec<f64>>,
}

/// Per-scenario defaults for the fields a [`FilterSpec`] may leave unset.
struct FilterDefaults {
    state_dof: f64,
    process_noise_dof: f64,
    measurement_noise_dof: f64,
    theta_dynamics: Vec<f64>,
    theta_measurement: Vec<f64>,
    init_mean: Vec<f64>,
    init_cov_diag: Vec<f64>,
}

impl BenchConfig {
    /// UNGM benchmark: 500 trajectories of 250 steps, operating dof 4, the
    /// default eight-filter bank.
    pub fn ungm_default() -> Self {
        Self {
            scenario: ScenarioConfig {
                kind: ScenarioKind::Ungm,
                trajectories: None,
                steps: None,
                seed: None,
                ungm: UngmParams::default(),
                radar: RadarParams::default(),
            },
            weights: WeightsConfig::default(),
            bootstrap: BootstrapConfig::default(),
            filters: Vec::new(),
        }
    }

    /// Radar tracking benchmark: 1,000 trajectories of 100 steps, glint
    /// measurement noise, the default five-filter bank.
    pub fn radar_default() -> Self {
        Self {
            scenario: ScenarioConfig {
                kind: ScenarioKind::Radar,
                trajectories: None,
                steps: None,
                seed: None,
                ungm: UngmParams::default(),
                radar: RadarParams::default(),
            },
            weights: WeightsConfig::default(),
            bootstrap: BootstrapConfig::default(),
            filters: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| BenchError::Serde(e.to_string()))
    }

    /// Concrete scenario with kind-dependent defaults filled in.
    pub fn resolve_scenario(&self) -> Result<Scenario> {
        let (default_traj, default_steps) = match self.scenario.kind {
            ScenarioKind::Ungm => (500, 250),
            ScenarioKind::Radar => (1000, 100),
        };
        let scenario = Scenario {
            kind: self.scenario.kind,
            n_trajectories: self.scenario.trajectories.unwrap_or(default_traj),
            n_steps: self.scenario.steps.unwrap_or(default_steps),
            master_seed: self.scenario.seed.unwrap_or(2017),
            ungm: self.scenario.ungm.clone(),
            radar: self.scenario.radar.clone(),
        };
        if scenario.n_trajectories == 0 || scenario.n_steps == 0 {
            return Err(BenchError::Config(
                "trajectories and steps must be at least 1".into(),
            ));
        }
        let glint = scenario.radar.glint_probability;
        if !(0.0..=1.0).contains(&glint) {
            return Err(BenchError::Config(format!(
                "glint probability {glint} outside [0, 1]"
            )));
        }
        Ok(scenario)
    }

    fn defaults_for(&self, kind: ScenarioKind) -> FilterDefaults {
        match kind {
            ScenarioKind::Ungm => FilterDefaults {
                state_dof: 4.0,
                process_noise_dof: 4.0,
                measurement_noise_dof: 4.0,
                theta_dynamics: vec![3.0, 1.0],
                theta_measurement: vec![3.0, 3.0],
                init_mean: vec![0.0],
                init_cov_diag: vec![1.0],
            },
            ScenarioKind::Radar => FilterDefaults {
                state_dof: 1000.0,
                process_noise_dof: 1000.0,
                measurement_noise_dof: 4.0,
                theta_dynamics: vec![1.0, 100.0, 100.0, 100.0, 100.0],
                theta_measurement: vec![0.05, 10.0, 100.0, 10.0, 100.0],
                init_mean: vec![10175.0, 295.0, 980.0, -35.0],
                init_cov_diag: vec![10000.0, 100.0, 10000.0, 100.0],
            },
        }
    }

    fn default_bank(&self, kind: ScenarioKind) -> Vec<FilterSpec> {
        let blank = |label: &str, family: FilterFamily, model_dof: Option<f64>| FilterSpec {
            label: label.to_string(),
            family,
            kappa: 0.0,
            model_dof,
            state_dof: None,
            process_noise_dof: None,
            measurement_noise_dof: None,
            theta_dynamics: None,
            theta_measurement: None,
            init_mean: None,
            init_cov_diag: None,
            assumed_process_cov_diag: None,
            assumed_measurement_cov_diag: None,
        };
        match kind {
            ScenarioKind::Ungm => vec![
                // The usual 1-D heuristic kappa = 3 - d for the Gaussian
                // baseline; the Student filters stay at kappa = 0.
                FilterSpec {
                    kappa: 2.0,
                    ..blank("UKF", FilterFamily::Ukf, None)
                },
                blank("SF", FilterFamily::Sf, None),
                blank("TPQSF(3)", FilterFamily::Tpqsf, Some(3.0)),
                blank("TPQSF(4)", FilterFamily::Tpqsf, Some(4.0)),
                blank("TPQSF(10)", FilterFamily::Tpqsf, Some(10.0)),
                blank("TPQSF(100)", FilterFamily::Tpqsf, Some(100.0)),
                blank("TPQSF(500)", FilterFamily::Tpqsf, Some(500.0)),
                blank("GPQSF", FilterFamily::Gpqsf, None),
            ],
            ScenarioKind::Radar => vec![
                blank("UKF", FilterFamily::Ukf, None),
                blank("SF", FilterFamily::Sf, None),
                blank("TPQSF(2.2)", FilterFamily::Tpqsf, Some(2.2)),
                blank("TPQSF(4)", FilterFamily::Tpqsf, Some(4.0)),
                blank("GPQSF", FilterFamily::Gpqsf, None),
            ],
        }
    }

    /// Concrete filter bank with every unset field filled from the scenario
    /// defaults.
    pub fn resolve_filters(&self) -> Result<Vec<FilterEntry>> {
        let kind = self.scenario.kind;
        let defaults = self.defaults_for(kind);
        let specs = if self.filters.is_empty() {
            self.default_bank(kind)
        } else {
            self.filters.clone()
        };
        let state_dim = defaults.init_mean.len();
        let mut entries = Vec::with_capacity(specs.len());
        for spec in specs {
            if spec.family == FilterFamily::Tpqsf && spec.model_dof.is_none() {
                return Err(BenchError::Config(format!(
                    "filter '{}' is tpqsf but has no model_dof",
                    spec.label
                )));
            }
            if let Some(nu) = spec.model_dof {
                if nu <= 2.0 {
                    return Err(BenchError::Config(format!(
                        "filter '{}' model_dof {nu} must be > 2",
                        spec.label
                    )));
                }
            }
            let init_mean = spec.init_mean.unwrap_or_else(|| defaults.init_mean.clone());
            let init_cov_diag = spec
                .init_cov_diag
                .unwrap_or_else(|| defaults.init_cov_diag.clone());
            if init_mean.len() != state_dim || init_cov_diag.len() != state_dim {
                return Err(BenchError::Config(format!(
                    "filter '{}' initial moments have wrong dimension (state is {state_dim}-d)",
                    spec.label
                )));
            }
            let theta_dynamics = spec
                .theta_dynamics
                .unwrap_or_else(|| defaults.theta_dynamics.clone());
            let theta_measurement = spec
                .theta_measurement
                .unwrap_or_else(|| defaults.theta_measurement.clone());
            for (name, theta) in [("dynamics", &theta_dynamics), ("measurement", &theta_measurement)]
            {
                if theta.len() != state_dim + 1 {
                    return Err(BenchError::Config(format!(
                        "filter '{}' {name} kernel needs {} parameters, got {}",
                        spec.label,
                        state_dim + 1,
                        theta.len()
                    )));
                }
            }
            entries.push(FilterEntry {
                label: spec.label,
                family: spec.family,
                kappa: spec.kappa,
                model_dof: if spec.family == FilterFamily::Tpqsf {
                    spec.model_dof
                } else {
                    None
                },
                state_dof: spec.state_dof.unwrap_or(defaults.state_dof),
                process_noise_dof: spec
                    .process_noise_dof
                    .unwrap_or(defaults.process_noise_dof),
                measurement_noise_dof: spec
                    .measurement_noise_dof
                    .unwrap_or(defaults.measurement_noise_dof),
                theta_dynamics,
                theta_measurement,
                init_mean: DVector::from_vec(init_mean),
                init_cov: DMatrix::from_diagonal(&DVector::from_vec(init_cov_diag)),
                assumed_process_cov_diag: spec.assumed_process_cov_diag,
                assumed_measurement_cov_diag: spec.assumed_measurement_cov_diag,
            });
        }
        Ok(entries)
    }
}

impl FilterEntry {
    /// Dof of the joint (state, process noise) prediction input.
    pub fn predict_dof(&self) -> f64 {
        self.state_dof.min(self.process_noise_dof)
    }

    /// Dof of the joint (state, measurement noise) update input.
    pub fn update_dof(&self) -> f64 {
        self.state_dof.min(self.measurement_noise_dof)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_banks_resolve() {
        let ungm = BenchConfig::ungm_default();
        let entries = ungm.resolve_filters().unwrap();
        assert_eq!(entries.len(), 8);
        assert_eq!(entries[0].family, FilterFamily::Ukf);
        assert_eq!(entries[2].model_dof, Some(3.0));
        assert_eq!(entries[2].theta_dynamics, vec![3.0, 1.0]);
        assert_eq!(entries[2].theta_measurement, vec![3.0, 3.0]);
        assert_eq!(entries[2].state_dof, 4.0);

        let radar = BenchConfig::radar_default();
        let entries = radar.resolve_filters().unwrap();
        assert_eq!(entries.len(), 5);
        assert_eq!(entries[2].model_dof, Some(2.2));
        assert_eq!(entries[2].predict_dof(), 1000.0);
        assert_eq!(entries[2].update_dof(), 4.0);
        assert_eq!(entries[2].init_mean.as_slice(), &[10175.0, 295.0, 980.0, -35.0]);
    }

    #[test]
    fn scenario_defaults() {
        let s = BenchConfig::ungm_default().resolve_scenario().unwrap();
        assert_eq!(s.n_trajectories, 500);
        assert_eq!(s.n_steps, 250);
        let s = BenchConfig::radar_default().resolve_scenario().unwrap();
        assert_eq!(s.n_trajectories, 1000);
        assert_eq!(s.n_steps, 100);
        assert_eq!(s.radar.glint_probability, 0.15);
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
[scenario]
kind = "radar"
trajectories = 10
steps = 5
seed = 99

[scenario.radar]
glint_probability = 0.2

[[filters]]
label = "TPQSF(4)"
family = "tpqsf"
model_dof = 4.0
"#;
        let cfg = BenchConfig::from_toml(text).unwrap();
        let s = cfg.resolve_scenario().unwrap();
        assert_eq!(s.n_trajectories, 10);
        assert_eq!(s.master_seed, 99);
        assert_eq!(s.radar.glint_probability, 0.2);
        assert_eq!(s.radar.tau, 0.5);
        let entries = cfg.resolve_filters().unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].theta_measurement, vec![0.05, 10.0, 100.0, 10.0, 100.0]);
        let round = BenchConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(round.resolve_scenario().unwrap().master_seed, 99);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(BenchConfig::from_toml("[scenario]\nkind = \"bogus\"").is_err());
        let text = r#"
[scenario]
kind = "ungm"

[[filters]]
label = "broken"
family = "tpqsf"
"#;
        let cfg = BenchConfig::from_toml(text).unwrap();
        assert!(matches!(cfg.resolve_filters(), Err(BenchError::Config(_))));

        let text = r#"
[scenario]
kind = "ungm"

[scenario.ungm]
init_var = 1.0

[[filters]]
label = "bad theta"
family = "gpqsf"
theta_dynamics = [3.0]
"#;
        let cfg = BenchConfig::from_toml(text).unwrap();
        assert!(cfg.resolve_filters().is_err());
    }
}
