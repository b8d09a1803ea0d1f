//! Multivariate Gaussian and Student-t distributions, Gaussian mixtures, and
//! seeded sampling.
//!
//! Public constructors take covariance matrices; the Student scale matrix
//! `(dof - 2) / dof * cov` is kept internal. All types are immutable after
//! construction and sampling is a pure function of `(distribution, n, seed)`:
//! the draws are produced in `f64` from a counter-seeded ChaCha stream and
//! converted to the working scalar type at the end, so the same seed yields
//! the same numbers regardless of scalar width.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_spd};
use crate::{cvt, Real};

/// Relative asymmetry tolerated in covariance matrices handed to
/// constructors.
const COV_SYMMETRY_TOL: f64 = 1e-12;

/// Derives a child seed from a master seed and a stream index.
///
/// This is the splitmix64 finalizer applied to
/// `master ^ (stream * 0x9E3779B97F4A7C15)`; the scheme is fixed so that
/// seed derivation is reproducible across builds and platforms.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_symmetric_cov<T: Real>(cov: &DMatrix<T>) -> Result<()> {
    let scale = linalg::max_abs(cov).max(T::one());
    let asym = linalg::asymmetry(cov);
    let tol = cvt::<T>(COV_SYMMETRY_TOL) * scale;
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym.to_f64().unwrap_or(f64::NAN),
            tolerance: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Draws one row of standard normal variates in `f64`, in coordinate order.
fn normal_row(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Multivariate Gaussian distribution `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct Gaussian<T: Real> {
    mean: DVector<T>,
    cov: DMatrix<T>,
    chol: DMatrix<T>,
}

impl<T: Real> Gaussian<T> {
    /// Builds a Gaussian from mean and covariance.
    ///
    /// The covariance must be symmetric (to `1e-12` relative) and positive
    /// definite, possibly after jitter.
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        if mean.len() != cov.nrows() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: cov.nrows(),
            });
        }
        check_symmetric_cov(&cov)?;
        let mut cov = cov;
        linalg::symmetrize(&mut cov);
        let chol = cholesky_spd(&cov)?.lower().clone();
        Ok(Self { mean, cov, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cov_factor(&self) -> &DMatrix<T> {
        &self.chol
    }

    /// Draws `n` samples as an `n x d` matrix, one sample per row; the
    /// underlying normal variates are consumed row by row in coordinate
    /// order.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<T> {
        assert!(n >= 1, "sample count must be at least 1");
        let mut rng = rng_from(seed);
        let d = self.dim();
        let mut out = DMatrix::<T>::zeros(n, d);
        for r in 0..n {
            let g = normal_row(&mut rng, d);
            for i in 0..d {
                let mut acc = self.mean[i];
                for j in 0..=i {
                    acc += self.chol[(i, j)] * cvt::<T>(g[j]);
                }
                out[(r, i)] = acc;
            }
        }
        out
    }
}

/// Multivariate Student-t distribution with `dof > 2`, parameterized by its
/// covariance.
///
/// Internally the scale matrix `(dof - 2)/dof * cov` is stored, so
/// `covariance()` returns exactly the matrix handed to
/// [`Student::from_covariance`].
#[derive(Debug, Clone)]
pub struct Student<T: Real> {
    mean: DVector<T>,
    scale: DMatrix<T>,
    dof: T,
    scale_chol: DMatrix<T>,
}

impl<T: Real> Student<T> {
    /// Builds a Student distribution with the given covariance and degrees
    /// of freedom.
    pub fn from_covariance(mean: DVector<T>, cov: DMatrix<T>, dof: T) -> Result<Self> {
        if dof <= cvt::<T>(2.0) {
            return Err(Error::DofTooSmall {
                dof: dof.to_f64().unwrap_or(f64::NAN),
            });
        }
        if mean.len() != cov.nrows() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: cov.nrows(),
            });
        }
        check_symmetric_cov(&cov)?;
        let factor = (dof - cvt::<T>(2.0)) / dof;
        let mut scale = cov * factor;
        linalg::symmetrize(&mut scale);
        let scale_chol = cholesky_spd(&scale)?.lower().clone();
        Ok(Self {
            mean,
            scale,
            dof,
            scale_chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn dof(&self) -> T {
        self.dof
    }

    /// The internal scale matrix `(dof - 2)/dof * cov`.
    pub fn scale(&self) -> &DMatrix<T> {
        &self.scale
    }

    /// Covariance `dof / (dof - 2) * scale`.
    pub fn covariance(&self) -> DMatrix<T> {
        &self.scale * (self.dof / (self.dof - cvt::<T>(2.0)))
    }

    /// Draws `n` samples as an `n x d` matrix using the normal / chi-square
    /// location-scale construction `mean + L g sqrt(dof / w)`.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<T> {
        assert!(n >= 1, "sample count must be at least 1");
        let mut rng = rng_from(seed);
        let d = self.dim();
        let dof = self.dof.to_f64().expect("dof convertible to f64");
        let chi2 = ChiSquared::new(dof).expect("dof > 2 implies valid chi-square");
        let mut out = DMatrix::<T>::zeros(n, d);
        for r in 0..n {
            let w: f64 = chi2.sample(&mut rng);
            let t_scale = (dof / w).sqrt();
            let g = normal_row(&mut rng, d);
            for i in 0..d {
                let mut acc = self.mean[i];
                for j in 0..=i {
                    acc += self.scale_chol[(i, j)] * cvt::<T>(g[j] * t_scale);
                }
                out[(r, i)] = acc;
            }
        }
        out
    }
}

/// Finite mixture of Gaussians with weights summing to one.
#[derive(Debug, Clone)]
pub struct GaussianMixture<T: Real> {
    components: Vec<(T, Gaussian<T>)>,
}

impl<T: Real> GaussianMixture<T> {
    pub fn new(components: Vec<(T, Gaussian<T>)>) -> Result<Self> {
        assert!(!components.is_empty(), "mixture needs at least one component");
        let dim = components[0].1.dim();
        for (w, g) in &components {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: g.dim(),
                });
            }
            let wf = w.to_f64().unwrap_or(f64::NAN);
            if !(0.0..=1.0).contains(&wf) {
                return Err(Error::InvalidMixtureWeights {
                    sum: wf,
                    tolerance: 0.0,
                });
            }
        }
        let sum: T = components
            .iter()
            .fold(T::zero(), |acc, (w, _)| acc + *w);
        let tol = cvt::<T>(1e-12);
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidMixtureWeights {
                sum: sum.to_f64().unwrap_or(f64::NAN),
                tolerance: 1e-12,
            });
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    pub fn components(&self) -> &[(T, Gaussian<T>)] {
        &self.components
    }

    /// Analytic mixture mean.
    pub fn mean(&self) -> DVector<T> {
        let mut m = DVector::<T>::zeros(self.dim());
        for (w, g) in &self.components {
            m += g.mean() * *w;
        }
        m
    }

    /// Analytic mixture covariance (law of total covariance).
    pub fn covariance(&self) -> DMatrix<T> {
        let m = self.mean();
        let mut cov = DMatrix::<T>::zeros(self.dim(), self.dim());
        for (w, g) in &self.components {
            let dm = g.mean() - &m;
            cov += (g.cov() + &dm * dm.transpose()) * *w;
        }
        cov
    }

    /// Draws `n` samples as an `n x d` matrix.
    ///
    /// The component index of each row comes from a categorical stream with
    /// seed `derive_seed(seed, 0)`; component `c` draws its Gaussian variates
    /// from the stream `derive_seed(seed, 1 + c)` in sample order. A
    /// single-component mixture therefore reproduces
    /// `Gaussian::sample(n, derive_seed(seed, 1))` exactly.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<T> {
        assert!(n >= 1, "sample count must be at least 1");
        let d = self.dim();
        let mut choice_rng = rng_from(derive_seed(seed, 0));
        let mut comp_rngs: Vec<ChaCha8Rng> = (0..self.components.len())
            .map(|c| rng_from(derive_seed(seed, 1 + c as u64)))
            .collect();
        let weights: Vec<f64> = self
            .components
            .iter()
            .map(|(w, _)| w.to_f64().expect("weight convertible to f64"))
            .collect();
        let mut out = DMatrix::<T>::zeros(n, d);
        for r in 0..n {
            let u: f64 = choice_rng.gen();
            let mut c = 0;
            let mut acc = weights[0];
            while u > acc && c + 1 < weights.len() {
                c += 1;
                acc += weights[c];
            }
            let g = normal_row(&mut comp_rngs[c], d);
            let gauss = &self.components[c].1;
            for i in 0..d {
                let mut v = gauss.mean[i];
                for j in 0..=i {
                    v += gauss.chol[(i, j)] * cvt::<T>(g[j]);
                }
                out[(r, i)] = v;
            }
        }
        out
    }
}
