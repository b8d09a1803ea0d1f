//! JSON persistence for precomputed kernel expectations and quadrature
//! weights.
//!
//! Expectations and weights are a pure function of the kernel parameters,
//! the unit point set, the input dof, and the Monte Carlo budget, so they
//! can be computed offline once and shipped next to a benchmark
//! configuration. Entries are keyed by exactly those inputs; the point set
//! is keyed through a stable 64-bit hash of its dimensions and entry bit
//! patterns.

use std::fs;
use std::io;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kernels::KernelExpectations;
use crate::quadrature::BqWeights;

/// Stable hash of a point matrix: mixes the dimensions and the `f64` bit
/// patterns with the splitmix64 finalizer, independent of platform and
/// standard-library hasher versions.
pub fn point_set_hash(points: &DMatrix<f64>) -> u64 {
    let mut state: u64 = 0x243F_6A88_85A3_08D3;
    let mut absorb = |v: u64| {
        state ^= v;
        state = (state ^ (state >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        state = (state ^ (state >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state ^= state >> 31;
    };
    absorb(points.nrows() as u64);
    absorb(points.ncols() as u64);
    for v in points.iter() {
        absorb(v.to_bits());
    }
    state
}

/// Identity of one precomputed weight set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    /// Kernel parameter vector `[scale, ℓ₁, ..., ℓ_d]`.
    pub theta: Vec<f64>,
    pub points_hash: u64,
    /// Standardized input dof; `None` marks closed-form Gaussian
    /// expectations.
    pub input_dof: Option<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    /// Integrand-model dof; `None` marks the GP limit.
    pub model_dof: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub expectations: KernelExpectations<f64>,
    pub weights: BqWeights<f64>,
}

/// On-disk collection of precomputed weight sets.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WeightsCache {
    pub entries: Vec<CacheEntry>,
}

impl WeightsCache {
    pub fn lookup(&self, key: &CacheKey) -> Option<&CacheEntry> {
        self.entries.iter().find(|e| &e.key == key)
    }

    pub fn insert(&mut self, entry: CacheEntry) {
        self.entries.retain(|e| e.key != entry.key);
        self.entries.push(entry);
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(path, text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{mc_expectations, RbfKernel};
    use crate::quadrature::{bq_weights, fully_symmetric_points};
    use nalgebra::DVector;

    #[test]
    fn hash_sensitive_to_entries_and_shape() {
        let a = DMatrix::from_column_slice(1, 2, &[0.0, 1.0]);
        let b = DMatrix::from_column_slice(1, 2, &[0.0, 1.0 + 1e-15]);
        let c = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_ne!(point_set_hash(&a), point_set_hash(&b));
        assert_ne!(point_set_hash(&a), point_set_hash(&c));
        assert_eq!(point_set_hash(&a), point_set_hash(&a.clone()));
    }

    #[test]
    fn round_trip_preserves_weights() {
        let kernel = RbfKernel::new(3.0, DVector::from_vec(vec![1.0])).unwrap();
        let set = fully_symmetric_points::<f64>(1, 0.0);
        let ke = mc_expectations(&kernel, set.points(), 4.0, 20_000, 5).unwrap();
        let gram = kernel.gram(set.points());
        let w = bq_weights(&ke, &gram, &set, Some(4.0)).unwrap();
        let key = CacheKey {
            theta: vec![3.0, 1.0],
            points_hash: point_set_hash(set.points()),
            input_dof: Some(4.0),
            mc_samples: 20_000,
            seed: 5,
            model_dof: Some(4.0),
        };
        let mut cache = WeightsCache::default();
        cache.insert(CacheEntry {
            key: key.clone(),
            expectations: ke,
            weights: w.clone(),
        });

        let dir = std::env::temp_dir().join("tpquad_cache_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("weights.json");
        cache.save(&path).unwrap();
        let loaded = WeightsCache::load(&path).unwrap();
        let entry = loaded.lookup(&key).expect("entry survives round trip");
        assert_eq!(entry.weights.wm, w.wm);
        assert_eq!(entry.weights.wc, w.wc);
        assert_eq!(entry.weights.wcc, w.wcc);
        std::fs::remove_file(&path).ok();
    }
}
