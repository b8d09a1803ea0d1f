//! Benchmark report: JSON serialization plus CSV and markdown table views.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub kind: String,
    pub trajectories: usize,
    pub steps: usize,
    pub master_seed: u64,
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub bootstrap_resamples: usize,
    /// Glint probability, radar scenario only.
    pub glint_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub label: String,
    pub family: String,
    pub mean_rmse: f64,
    pub rmse_std: f64,
    pub mean_inc: f64,
    pub inc_std: f64,
    /// Trajectories on which the filter failed and was excluded.
    pub failures: usize,
    pub rmse_per_trajectory: Vec<f64>,
    pub inc_per_trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: ScenarioMeta,
    pub filters: Vec<FilterReport>,
    /// Filled by the CLI at write time; the library keeps reports a pure
    /// function of their inputs.
    pub timestamp: Option<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| BenchError::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::Serde(e.to_string()))
    }

    /// CSV table with the summary schema
    /// `label,mean_rmse,rmse_std,mean_inc,inc_std`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,mean_rmse,rmse_std,mean_inc,inc_std\n");
        for f in &self.filters {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.label, f.mean_rmse, f.rmse_std, f.mean_inc, f.inc_std
            ));
        }
        out
    }

    /// Markdown table of the same summary.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "| {:<12} | {:>10} | {:>8} | {:>10} | {:>8} |\n",
            "filter", "RMSE", "std", "INC", "std"
        ));
        out.push_str("|--------------|------------|----------|------------|----------|\n");
        for f in &self.filters {
            out.push_str(&format!(
                "| {:<12} | {:>10.4} | {:>8.4} | {:>10.4} | {:>8.4} |\n",
                f.label, f.mean_rmse, f.rmse_std, f.mean_inc, f.inc_std
            ));
        }
        out
    }

    pub fn filter(&self, label: &str) -> Option<&FilterReport> {
        self.filters.iter().find(|f| f.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> MetricsReport {
        MetricsReport {
            scenario: ScenarioMeta {
                kind: "ungm".into(),
                trajectories: 2,
                steps: 3,
                master_seed: 7,
                mc_samples: 10_000,
                mc_seed: 353,
                bootstrap_resamples: 100,
                glint_probability: None,
            },
            filters: vec![FilterReport {
                label: "UKF".into(),
                family: "ukf".into(),
                mean_rmse: 1.234567890123,
                rmse_std: 0.1,
                mean_inc: -0.5,
                inc_std: 0.05,
                failures: 0,
                rmse_per_trajectory: vec![1.2, 1.3],
                inc_per_trajectory: vec![-0.4, -0.6],
            }],
            timestamp: None,
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let report = sample_report();
        let first = report.to_json().unwrap();
        let parsed = MetricsReport::from_json(&first).unwrap();
        let second = parsed.to_json().unwrap();
        assert_eq!(first, second);
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_schema() {
        let report = sample_report();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "label,mean_rmse,rmse_std,mean_inc,inc_std");
        let row = lines.next().unwrap();
        assert!(row.starts_with("UKF,1.234567890123,"));
    }
}
