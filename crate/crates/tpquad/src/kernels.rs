//! RBF kernel, Gram matrices, and kernel expectations under the standardized
//! input density.
//!
//! The expectations are taken with respect to a zero-mean input with **unit
//! covariance**: exactly Gaussian in [`gaussian_expectations`], Student-t
//! with scale `(dof - 2)/dof * I` in [`mc_expectations`]. The Monte Carlo
//! path uses antithetic pairs and fixed-size counter-seeded chunks, so the
//! result is bit-identical for a given `(points, dof, n_samples, seed)`
//! whether or not the chunks run in parallel.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_spd;
use crate::stats::derive_seed;
use crate::{cvt, Real};

/// Samples per Monte Carlo chunk. Part of the deterministic-stream contract:
/// changing it changes the draws.
const MC_CHUNK: usize = 8192;

/// Default Monte Carlo sample count used by weight precomputation.
pub const DEFAULT_MC_SAMPLES: usize = 200_000;

/// Radial basis function kernel
/// `k(u, v) = scale² exp(-½ (u-v)ᵀ Λ⁻¹ (u-v))` with `Λ = diag(ℓ²)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfKernel<T: Real> {
    scale: T,
    lengthscales: DVector<T>,
}

impl<T: Real> RbfKernel<T> {
    pub fn new(scale: T, lengthscales: DVector<T>) -> Result<Self> {
        let ok = scale > T::zero()
            && scale.is_finite()
            && lengthscales.iter().all(|l| *l > T::zero() && l.is_finite());
        if !ok {
            return Err(Error::DimensionMismatch {
                expected: 1 + lengthscales.len(),
                actual: 0,
            });
        }
        Ok(Self {
            scale,
            lengthscales,
        })
    }

    /// Builds the kernel from the flat parameter vector `[scale, ℓ₁, ..., ℓ_d]`.
    pub fn from_params(theta: &[T]) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: theta.len(),
            });
        }
        Self::new(theta[0], DVector::from_column_slice(&theta[1..]))
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn lengthscales(&self) -> &DVector<T> {
        &self.lengthscales
    }

    /// Kernel value at a pair of points.
    pub fn eval(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        assert_eq!(u.len(), self.dim(), "kernel input dimension mismatch");
        assert_eq!(v.len(), self.dim(), "kernel input dimension mismatch");
        let mut expo = T::zero();
        for c in 0..self.dim() {
            let diff = u[c] - v[c];
            let l = self.lengthscales[c];
            expo += diff * diff / (l * l);
        }
        self.scale * self.scale * (-expo * cvt::<T>(0.5)).exp()
    }

    /// Raw Gram matrix of a `d x N` point set (columns are points), without
    /// jitter.
    pub fn gram(&self, points: &DMatrix<T>) -> DMatrix<T> {
        let n = points.ncols();
        let mut k = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut expo = T::zero();
                for c in 0..self.dim() {
                    let diff = points[(c, i)] - points[(c, j)];
                    let l = self.lengthscales[c];
                    expo += diff * diff / (l * l);
                }
                let v = self.scale * self.scale * (-expo * cvt::<T>(0.5)).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Jitter-regularized Gram matrix: the smallest diagonal addition from the
/// factorization ladder that makes the matrix positive definite is baked into
/// the returned matrix.
pub fn gram_matrix<T: Real>(kernel: &RbfKernel<T>, points: &DMatrix<T>) -> Result<DMatrix<T>> {
    let raw = kernel.gram(points);
    let factor = cholesky_spd(&raw)?;
    if factor.jitter() > T::zero() {
        let mut out = raw;
        for i in 0..out.nrows() {
            out[(i, i)] += factor.jitter();
        }
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Expectations of kernel functions under the standardized input density.
///
/// For unit points `u_i` and input `ξ` with zero mean and unit covariance:
/// `q[i] = E[k(ξ, u_i)]`, `qm[i][j] = E[k(ξ, u_i) k(ξ, u_j)]`,
/// `rm[:, j] = E[ξ k(ξ, u_j)]`, `kbar = E[k(ξ, ξ)]` (exactly `scale²` for
/// the RBF kernel), `kbar2 = E[k(ξ, ξ')]` over independent `ξ, ξ'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelExpectations<T: Real> {
    pub q: DVector<T>,
    pub qm: DMatrix<T>,
    pub rm: DMatrix<T>,
    pub kbar: T,
    pub kbar2: T,
    /// Degrees of freedom of the standardized Student input; `None` for the
    /// exact Gaussian closed form.
    pub input_dof: Option<T>,
    /// Number of Monte Carlo samples (0 for the closed form).
    pub mc_samples: usize,
    pub seed: u64,
}

/// Monte Carlo standard errors matching the fields of [`KernelExpectations`].
///
/// Errors are computed over antithetic-pair averages, which is the unit of
/// independence in the sampler.
#[derive(Debug, Clone)]
pub struct McStdErrors<T: Real> {
    pub q: DVector<T>,
    pub qm: DMatrix<T>,
    pub rm: DMatrix<T>,
    pub kbar2: T,
}

/// Closed-form kernel expectations for a standard Gaussian input.
pub fn gaussian_expectations<T: Real>(
    kernel: &RbfKernel<T>,
    unit_points: &DMatrix<T>,
) -> KernelExpectations<T> {
    let d = kernel.dim();
    assert_eq!(unit_points.nrows(), d, "point set dimension mismatch");
    let n = unit_points.ncols();
    let alpha2 = kernel.scale * kernel.scale;
    let half = cvt::<T>(0.5);

    // det(I + Λ⁻¹)^(-1/2) and det(I + 2Λ⁻¹)^(-1/2) for diagonal Λ.
    let mut det_q = T::one();
    let mut det_qm = T::one();
    for c in 0..d {
        let l2 = kernel.lengthscales[c] * kernel.lengthscales[c];
        det_q *= T::one() + T::one() / l2;
        det_qm *= T::one() + cvt::<T>(2.0) / l2;
    }
    let norm_q = T::one() / det_q.sqrt();
    let norm_qm = T::one() / det_qm.sqrt();

    // q[i] = α² det(I+Λ⁻¹)^(-1/2) exp(-½ uᵢᵀ (Λ+I)⁻¹ uᵢ)
    let mut q = DVector::<T>::zeros(n);
    for i in 0..n {
        let mut expo = T::zero();
        for c in 0..d {
            let l2 = kernel.lengthscales[c] * kernel.lengthscales[c];
            let u = unit_points[(c, i)];
            expo += u * u / (l2 + T::one());
        }
        q[i] = alpha2 * norm_q * (-expo * half).exp();
    }

    // rm[:, j] = q[j] (Λ+I)⁻¹ u_j
    let mut rm = DMatrix::<T>::zeros(d, n);
    for j in 0..n {
        for c in 0..d {
            let l2 = kernel.lengthscales[c] * kernel.lengthscales[c];
            rm[(c, j)] = q[j] * unit_points[(c, j)] / (l2 + T::one());
        }
    }

    // qm[i][j] = α⁴ det(I+2Λ⁻¹)^(-1/2)
    //            exp(-¼ (uᵢ-uⱼ)ᵀΛ⁻¹(uᵢ-uⱼ) - ½ ūᵀ(Λ/2+I)⁻¹ū),  ū = (uᵢ+uⱼ)/2
    let mut qm = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut expo = T::zero();
            for c in 0..d {
                let l2 = kernel.lengthscales[c] * kernel.lengthscales[c];
                let diff = unit_points[(c, i)] - unit_points[(c, j)];
                let mid = (unit_points[(c, i)] + unit_points[(c, j)]) * half;
                expo += diff * diff / l2 * half + mid * mid / (l2 * half + T::one());
            }
            let v = alpha2 * alpha2 * norm_qm * (-expo * half).exp();
            qm[(i, j)] = v;
            qm[(j, i)] = v;
        }
    }

    // kbar2 = E[k(ξ, ξ')] with ξ - ξ' ~ N(0, 2I)
    let kbar2 = alpha2 * norm_qm;

    KernelExpectations {
        q,
        qm,
        rm,
        kbar: alpha2,
        kbar2,
        input_dof: None,
        mc_samples: 0,
        seed: 0,
    }
}

/// Accumulator for one Monte Carlo chunk: sums and sums of squares of the
/// per-pair contributions.
struct ChunkSums {
    pairs: usize,
    q: DVector<f64>,
    q2: DVector<f64>,
    qm: DMatrix<f64>,
    qm2: DMatrix<f64>,
    rm: DMatrix<f64>,
    rm2: DMatrix<f64>,
    kbar2: f64,
    kbar2_sq: f64,
}

impl ChunkSums {
    fn zeros(d: usize, n: usize) -> Self {
        Self {
            pairs: 0,
            q: DVector::zeros(n),
            q2: DVector::zeros(n),
            qm: DMatrix::zeros(n, n),
            qm2: DMatrix::zeros(n, n),
            rm: DMatrix::zeros(d, n),
            rm2: DMatrix::zeros(d, n),
            kbar2: 0.0,
            kbar2_sq: 0.0,
        }
    }

    fn absorb(&mut self, other: &ChunkSums) {
        self.pairs += other.pairs;
        self.q += &other.q;
        self.q2 += &other.q2;
        self.qm += &other.qm;
        self.qm2 += &other.qm2;
        self.rm += &other.rm;
        self.rm2 += &other.rm2;
        self.kbar2 += other.kbar2;
        self.kbar2_sq += other.kbar2_sq;
    }
}

fn rbf_f64(points: &DMatrix<f64>, inv_l2: &[f64], alpha2: f64, xi: &[f64], out: &mut [f64]) {
    let d = points.nrows();
    for (j, o) in out.iter_mut().enumerate() {
        let mut expo = 0.0;
        for c in 0..d {
            let diff = xi[c] - points[(c, j)];
            expo += diff * diff * inv_l2[c];
        }
        *o = alpha2 * (-0.5 * expo).exp();
    }
}

fn mc_chunk(
    points: &DMatrix<f64>,
    inv_l2: &[f64],
    alpha2: f64,
    dof: f64,
    pairs: usize,
    seed: u64,
) -> ChunkSums {
    let d = points.nrows();
    let n = points.ncols();
    let mut sums = ChunkSums::zeros(d, n);
    sums.pairs = pairs;
    let mut rng = crate::stats::rng_from(seed);
    let chi2 = ChiSquared::new(dof).expect("dof > 2");
    let mut xi = vec![0.0f64; d];
    let mut xi_neg = vec![0.0f64; d];
    let mut xi_ind = vec![0.0f64; d];
    let mut k_pos = vec![0.0f64; n];
    let mut k_neg = vec![0.0f64; n];

    for _ in 0..pairs {
        // Standardized Student draw with unit covariance:
        // xi = g * sqrt((dof - 2) / w), g ~ N(0, I), w ~ chi2(dof).
        let w: f64 = chi2.sample(&mut rng);
        let t = ((dof - 2.0) / w).sqrt();
        for c in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            xi[c] = g * t;
            xi_neg[c] = -xi[c];
        }
        // Independent second draw for the double expectation kbar2.
        let w2: f64 = chi2.sample(&mut rng);
        let t2 = ((dof - 2.0) / w2).sqrt();
        for c in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            xi_ind[c] = g * t2;
        }

        rbf_f64(points, inv_l2, alpha2, &xi, &mut k_pos);
        rbf_f64(points, inv_l2, alpha2, &xi_neg, &mut k_neg);

        for j in 0..n {
            let v = 0.5 * (k_pos[j] + k_neg[j]);
            sums.q[j] += v;
            sums.q2[j] += v * v;
            for c in 0..d {
                let r = 0.5 * (xi[c] * k_pos[j] + xi_neg[c] * k_neg[j]);
                sums.rm[(c, j)] += r;
                sums.rm2[(c, j)] += r * r;
            }
        }
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (k_pos[i] * k_pos[j] + k_neg[i] * k_neg[j]);
                sums.qm[(i, j)] += v;
                sums.qm2[(i, j)] += v * v;
            }
        }
        // kbar2 pair value: average over the antithetic first argument.
        let mut expo_a = 0.0;
        let mut expo_b = 0.0;
        for c in 0..d {
            let da = xi[c] - xi_ind[c];
            let db = xi_neg[c] - xi_ind[c];
            expo_a += da * da * inv_l2[c];
            expo_b += db * db * inv_l2[c];
        }
        let v = 0.5 * alpha2 * ((-0.5 * expo_a).exp() + (-0.5 * expo_b).exp());
        sums.kbar2 += v;
        sums.kbar2_sq += v * v;
    }
    sums
}

/// Monte Carlo kernel expectations for a standardized Student input with the
/// given degrees of freedom, with antithetic pairing.
///
/// `n_samples` counts individual draws; they are consumed as `n_samples / 2`
/// antithetic pairs. `kbar` is set analytically to `scale²`. The result is a
/// pure function of the arguments.
pub fn mc_expectations<T: Real>(
    kernel: &RbfKernel<T>,
    unit_points: &DMatrix<T>,
    input_dof: T,
    n_samples: usize,
    seed: u64,
) -> Result<KernelExpectations<T>> {
    mc_expectations_detailed(kernel, unit_points, input_dof, n_samples, seed).map(|(ke, _)| ke)
}

/// As [`mc_expectations`], additionally returning per-entry Monte Carlo
/// standard errors.
pub fn mc_expectations_detailed<T: Real>(
    kernel: &RbfKernel<T>,
    unit_points: &DMatrix<T>,
    input_dof: T,
    n_samples: usize,
    seed: u64,
) -> Result<(KernelExpectations<T>, McStdErrors<T>)> {
    assert!(n_samples >= 10_000, "Monte Carlo needs at least 1e4 samples");
    let d = kernel.dim();
    assert_eq!(unit_points.nrows(), d, "point set dimension mismatch");
    let dof = input_dof.to_f64().expect("dof convertible to f64");
    if dof <= 2.0 {
        return Err(Error::DofTooSmall { dof });
    }
    let n = unit_points.ncols();
    let points_f64 = unit_points.map(|x| x.to_f64().expect("point convertible to f64"));
    let inv_l2: Vec<f64> = (0..d)
        .map(|c| {
            let l = kernel.lengthscales[c].to_f64().expect("finite lengthscale");
            1.0 / (l * l)
        })
        .collect();
    let alpha2 = {
        let a = kernel.scale.to_f64().expect("finite scale");
        a * a
    };

    let total_pairs = n_samples / 2;
    let n_chunks = total_pairs.div_ceil(MC_CHUNK);
    let partials: Vec<ChunkSums> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let pairs = if c + 1 == n_chunks {
                total_pairs - c * MC_CHUNK
            } else {
                MC_CHUNK
            };
            mc_chunk(
                &points_f64,
                &inv_l2,
                alpha2,
                dof,
                pairs,
                derive_seed(seed, c as u64),
            )
        })
        .collect();
    // Chunk-ordered reduction keeps the result identical to a sequential run.
    let mut sums = ChunkSums::zeros(d, n);
    for p in &partials {
        sums.absorb(p);
    }

    let m = sums.pairs as f64;
    let mean_of = |sum: f64| sum / m;
    let se_of = |sum: f64, sumsq: f64| {
        let mu = sum / m;
        let var = (sumsq / m - mu * mu).max(0.0);
        (var / m).sqrt()
    };

    let q = DVector::from_fn(n, |i, _| cvt::<T>(mean_of(sums.q[i])));
    let q_se = DVector::from_fn(n, |i, _| cvt::<T>(se_of(sums.q[i], sums.q2[i])));
    let rm = DMatrix::from_fn(d, n, |c, j| cvt::<T>(mean_of(sums.rm[(c, j)])));
    let rm_se = DMatrix::from_fn(d, n, |c, j| cvt::<T>(se_of(sums.rm[(c, j)], sums.rm2[(c, j)])));
    let mut qm = DMatrix::<T>::zeros(n, n);
    let mut qm_se = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = cvt::<T>(mean_of(sums.qm[(i, j)]));
            let s = cvt::<T>(se_of(sums.qm[(i, j)], sums.qm2[(i, j)]));
            qm[(i, j)] = v;
            qm[(j, i)] = v;
            qm_se[(i, j)] = s;
            qm_se[(j, i)] = s;
        }
    }

    let ke = KernelExpectations {
        q,
        qm,
        rm,
        kbar: cvt::<T>(alpha2),
        kbar2: cvt::<T>(mean_of(sums.kbar2)),
        input_dof: Some(input_dof),
        mc_samples: n_samples,
        seed,
    };
    let se = McStdErrors {
        q: q_se,
        qm: qm_se,
        rm: rm_se,
        kbar2: cvt::<T>(se_of(sums.kbar2, sums.kbar2_sq)),
    };
    Ok((ke, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kernel_1d(alpha: f64, ell: f64) -> RbfKernel<f64> {
        RbfKernel::new(alpha, DVector::from_vec(vec![ell])).unwrap()
    }

    #[test]
    fn eval_at_same_point_is_scale_squared() {
        let k = kernel_1d(3.0, 1.0);
        let u = DVector::from_vec(vec![0.7]);
        assert_relative_eq!(k.eval(&u, &u), 9.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_hand_case() {
        let k = RbfKernel::new(1.0, DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let u = DVector::zeros(2);
        let v = DVector::from_vec(vec![2f64.sqrt(), 0.0]);
        assert_relative_eq!(k.eval(&u, &v), (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn eval_symmetric_and_bounded() {
        let k = RbfKernel::new(2.0, DVector::from_vec(vec![1.5, 0.5])).unwrap();
        let mut rng = crate::stats::rng_from(4);
        use rand::Rng;
        for _ in 0..100 {
            let u = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            let v = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            let a = k.eval(&u, &v);
            let b = k.eval(&v, &u);
            assert_eq!(a, b);
            assert!(a > 0.0 && a <= 4.0 + 1e-15);
        }
    }

    #[test]
    fn gram_single_point() {
        let k = kernel_1d(3.0, 1.0);
        let pts = DMatrix::from_column_slice(1, 1, &[0.0]);
        let g = gram_matrix(&k, &pts).unwrap();
        assert_eq!(g.nrows(), 1);
        assert_relative_eq!(g[(0, 0)], 9.0, epsilon = 1e-9);
    }

    #[test]
    fn gram_distant_points_decouple() {
        let k = kernel_1d(2.0, 0.1);
        let pts = DMatrix::from_column_slice(1, 2, &[0.0, 100.0]);
        let g = gram_matrix(&k, &pts).unwrap();
        assert!(g[(0, 1)].abs() < 1e-12);
        assert_relative_eq!(g[(0, 0)], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn gram_matches_pairwise_eval() {
        let k = kernel_1d(3.0, 1.0);
        let pts = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, -1.0]);
        let g = k.gram(&pts);
        for i in 0..3 {
            for j in 0..3 {
                let u = DVector::from_vec(vec![pts[(0, i)]]);
                let v = DVector::from_vec(vec![pts[(0, j)]]);
                assert_relative_eq!(g[(i, j)], k.eval(&u, &v), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gram_permutation_invariant() {
        let k = RbfKernel::new(1.5, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let pts = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 1.0, -1.0, 0.5, 2.0]);
        let perm = [2usize, 0, 1];
        let permuted = DMatrix::from_fn(2, 3, |r, c| pts[(r, perm[c])]);
        let g = k.gram(&pts);
        let gp = k.gram(&permuted);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(gp[(i, j)], g[(perm[i], perm[j])]);
            }
        }
    }

    #[test]
    fn gaussian_q_constant_kernel_limit() {
        let k = kernel_1d(1.0, 1e9);
        let pts = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, -1.0]);
        let ke = gaussian_expectations(&k, &pts);
        for i in 0..3 {
            assert_relative_eq!(ke.q[i], 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_q_hand_value_and_numeric_integral() {
        let k = kernel_1d(1.0, 1.0);
        let pts = DMatrix::from_column_slice(1, 1, &[0.0]);
        let ke = gaussian_expectations(&k, &pts);
        assert_relative_eq!(ke.q[0], 0.5f64.sqrt(), epsilon = 1e-12);

        // Independent oracle: trapezoid quadrature of k(x, 0) N(x; 0, 1) dx.
        let oracle = integrate(|x| (-0.5 * x * x).exp() * normal_pdf(x));
        assert_relative_eq!(ke.q[0], oracle, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_fields_against_numeric_integrals() {
        // 1-D case where every expectation is a cheap quadrature.
        let k = kernel_1d(2.0, 1.3);
        let pts = DMatrix::from_column_slice(1, 2, &[0.5, -1.0]);
        let ke = gaussian_expectations(&k, &pts);
        let kf = |x: f64, u: f64| 4.0 * (-0.5 * (x - u) * (x - u) / (1.3 * 1.3)).exp();

        for (i, &u) in [0.5, -1.0].iter().enumerate() {
            let q_i = integrate(|x| kf(x, u) * normal_pdf(x));
            assert_relative_eq!(ke.q[i], q_i, epsilon = 1e-8);
            let r_i = integrate(|x| x * kf(x, u) * normal_pdf(x));
            assert_relative_eq!(ke.rm[(0, i)], r_i, epsilon = 1e-8);
            for (j, &v) in [0.5, -1.0].iter().enumerate() {
                let qm_ij = integrate(|x| kf(x, u) * kf(x, v) * normal_pdf(x));
                assert_relative_eq!(ke.qm[(i, j)], qm_ij, epsilon = 1e-7);
            }
        }
        // kbar2 = E k(x, x') over independent standard normals: difference is
        // N(0, 2), so integrate k(sqrt(2) z, 0) over z.
        let kbar2 = integrate(|z| kf(2f64.sqrt() * z, 0.0) * normal_pdf(z));
        assert_relative_eq!(ke.kbar2, kbar2, epsilon = 1e-8);
        assert!(ke.kbar2 <= ke.kbar && ke.kbar2 > 0.0);
    }

    #[test]
    fn mc_positivity_bounds() {
        let k = kernel_1d(3.0, 1.0);
        let pts = DMatrix::from_column_slice(1, 1, &[0.0]);
        let ke = mc_expectations(&k, &pts, 4.0, 20_000, 1).unwrap();
        assert!(ke.q[0] > 0.0 && ke.q[0] < 9.0);
        assert!(ke.kbar2 > 0.0 && ke.kbar2 <= ke.kbar);
        assert!(ke.qm[(0, 0)] <= ke.kbar * ke.kbar);
        assert_eq!(ke.kbar, 9.0);
    }

    #[test]
    fn mc_matches_gaussian_at_large_dof() {
        let k: RbfKernel<f64> = RbfKernel::new(1.5, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let pts = DMatrix::from_column_slice(2, 5, &[0.0, 0.0, 1.4, 0.0, -1.4, 0.0, 0.0, 1.4, 0.0, -1.4]);
        let exact = gaussian_expectations(&k, &pts);
        let (mc, se) = mc_expectations_detailed(&k, &pts, 1e6, 400_000, 3).unwrap();
        for i in 0..5 {
            assert!(
                (mc.q[i] - exact.q[i]).abs() < 3.0 * se.q[i],
                "q[{i}]: mc {} exact {} se {}",
                mc.q[i],
                exact.q[i],
                se.q[i]
            );
            for j in 0..5 {
                assert!((mc.qm[(i, j)] - exact.qm[(i, j)]).abs() < 3.0 * se.qm[(i, j)].max(1e-12));
            }
            for c in 0..2 {
                assert!((mc.rm[(c, i)] - exact.rm[(c, i)]).abs() < 3.0 * se.rm[(c, i)].max(1e-12));
            }
        }
        assert!((mc.kbar2 - exact.kbar2).abs() < 3.0 * se.kbar2);
    }

    #[test]
    fn mc_antithetic_kills_origin_cross_term() {
        // E[ξ k(ξ, 0)] is odd; the antithetic pair cancels it exactly.
        let k = kernel_1d(2.0, 1.0);
        let pts = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, -1.0]);
        let ke = mc_expectations(&k, &pts, 6.0, 50_000, 9).unwrap();
        assert!(
            ke.rm[(0, 0)].abs() < 1e-12,
            "origin column should cancel, got {}",
            ke.rm[(0, 0)]
        );
    }

    #[test]
    fn mc_is_deterministic() {
        let k = kernel_1d(3.0, 3.0);
        let pts = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, -1.0]);
        let a = mc_expectations(&k, &pts, 4.0, 30_000, 123).unwrap();
        let b = mc_expectations(&k, &pts, 4.0, 30_000, 123).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.qm, b.qm);
        assert_eq!(a.rm, b.rm);
        assert_eq!(a.kbar2, b.kbar2);
    }

    #[test]
    fn mc_rejects_small_dof() {
        let k = kernel_1d(1.0, 1.0);
        let pts = DMatrix::from_column_slice(1, 1, &[0.0]);
        assert!(matches!(
            mc_expectations(&k, &pts, 2.0, 20_000, 0),
            Err(Error::DofTooSmall { .. })
        ));
    }

    fn normal_pdf(x: f64) -> f64 {
        (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    /// Plain trapezoid rule over [-12, 12]; plenty for these smooth decaying
    /// integrands.
    fn integrate<F: Fn(f64) -> f64>(f: F) -> f64 {
        let n = 200_000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for i in 1..n {
            acc += f(a + i as f64 * h);
        }
        acc * h
    }
}
