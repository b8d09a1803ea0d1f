//! Scoring: RMSE, the inclination indicator, and bootstrap standard
//! deviations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tpquad::linalg::{cholesky_spd, SpdFactor};

use crate::error::{BenchError, Result};

/// Root mean square error over a trajectory:
/// `sqrt(1/K Σ ‖x_k - m_k‖²)`.
pub fn rmse(truth: &[DVector<f64>], estimates: &[DVector<f64>]) -> Result<f64> {
    if truth.len() != estimates.len() {
        return Err(BenchError::LengthMismatch {
            expected: truth.len(),
            actual: estimates.len(),
        });
    }
    let errors: Vec<DVector<f64>> = truth
        .iter()
        .zip(estimates.iter())
        .map(|(x, m)| x - m)
        .collect();
    Ok(rmse_from_errors(&errors))
}

/// RMSE from precomputed per-step error vectors.
pub fn rmse_from_errors(errors: &[DVector<f64>]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let sum: f64 = errors.iter().map(|e| e.norm_squared()).sum();
    (sum / errors.len() as f64).sqrt()
}

/// Per-step sample mean-square-error matrices across an ensemble of
/// trajectories: `Σ_k = 1/M Σ_i e_{i,k} e_{i,k}ᵀ`.
pub fn mse_matrices(errors_by_trajectory: &[&[DVector<f64>]]) -> Vec<DMatrix<f64>> {
    assert!(!errors_by_trajectory.is_empty(), "need at least one trajectory");
    let steps = errors_by_trajectory[0].len();
    let dim = errors_by_trajectory[0][0].len();
    let m = errors_by_trajectory.len() as f64;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut acc = DMatrix::<f64>::zeros(dim, dim);
        for traj in errors_by_trajectory {
            let e = &traj[k];
            acc += e * e.transpose();
        }
        out.push(acc / m);
    }
    out
}

/// Factorizes every per-step MSE matrix once, for reuse across
/// trajectories.
pub fn factorize_mse(mse: &[DMatrix<f64>]) -> Result<Vec<SpdFactor<f64>>> {
    mse.iter()
        .map(|m| cholesky_spd(m).map_err(|e| BenchError::SingularMatrix(e.to_string())))
        .collect()
}

/// Inclination indicator over one trajectory:
/// `10/K Σ_k log₁₀ [ e_kᵀ P_k⁻¹ e_k / e_kᵀ Σ_k⁻¹ e_k ]`,
/// zero for a balanced estimator, positive when the reported covariance is
/// optimistic, negative when pessimistic.
pub fn inc(
    truth: &[DVector<f64>],
    estimates: &[DVector<f64>],
    covariances: &[DMatrix<f64>],
    mse: &[DMatrix<f64>],
) -> Result<f64> {
    let k = truth.len();
    if estimates.len() != k || covariances.len() != k || mse.len() != k {
        return Err(BenchError::LengthMismatch {
            expected: k,
            actual: estimates.len().min(covariances.len()).min(mse.len()),
        });
    }
    let mse_factors = factorize_mse(mse)?;
    let mut acc = 0.0;
    for i in 0..k {
        let e = &truth[i] - &estimates[i];
        let p = cholesky_spd(&covariances[i])
            .map_err(|err| BenchError::SingularMatrix(err.to_string()))?;
        let numerator = p.quad_form(&e);
        let denominator = mse_factors[i].quad_form(&e);
        acc += (numerator / denominator).log10();
    }
    Ok(10.0 * acc / k as f64)
}

/// INC from per-step reported quadratic forms and precomputed MSE factors.
pub fn inc_from_parts(
    errors: &[DVector<f64>],
    numerators: &[f64],
    mse_factors: &[SpdFactor<f64>],
) -> f64 {
    let k = errors.len();
    let mut acc = 0.0;
    for i in 0..k {
        let denominator = mse_factors[i].quad_form(&errors[i]);
        acc += (numerators[i] / denominator).log10();
    }
    10.0 * acc / k as f64
}

/// Standard deviation of the mean estimated by with-replacement bootstrap
/// resampling; deterministic under the seed.
pub fn bootstrap_std(values: &[f64], n_resamples: usize, seed: u64) -> Result<f64> {
    if values.len() < 2 {
        return Err(BenchError::TooFewValues {
            minimum: 2,
            actual: values.len(),
        });
    }
    let n = values.len();
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    let grand = means.iter().sum::<f64>() / n_resamples as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / n_resamples as f64;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn rmse_exact_cases() {
        let truth = vec![vec1(1.0), vec1(2.0)];
        assert_eq!(rmse(&truth, &truth).unwrap(), 0.0);

        let offset: Vec<_> = truth.iter().map(|x| x.add_scalar(-1.5)).collect();
        assert_relative_eq!(rmse(&truth, &offset).unwrap(), 1.5, epsilon = 1e-15);

        let est = vec![vec1(1.0 - 3.0), vec1(2.0 + 4.0)];
        assert_relative_eq!(
            rmse(&truth, &est).unwrap(),
            (25.0f64 / 2.0).sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(rmse(&truth, &est).unwrap(), 3.5355339059327378, epsilon = 1e-12);
    }

    #[test]
    fn rmse_length_mismatch() {
        let truth = vec![vec1(1.0)];
        let est = vec![vec1(1.0), vec1(2.0)];
        assert!(matches!(
            rmse(&truth, &est),
            Err(BenchError::LengthMismatch { .. })
        ));
    }

    /// Synthetic ensemble whose per-step MSE matrices are computed from the
    /// errors themselves.
    fn synthetic_ensemble() -> (Vec<Vec<DVector<f64>>>, Vec<DMatrix<f64>>) {
        let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(3);
        let (n_traj, steps, dim) = (40, 6, 2);
        let errors: Vec<Vec<DVector<f64>>> = (0..n_traj)
            .map(|_| {
                (0..steps)
                    .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let refs: Vec<&[DVector<f64>]> = errors.iter().map(|e| e.as_slice()).collect();
        let mse = mse_matrices(&refs);
        (errors, mse)
    }

    #[test]
    fn inc_balanced_is_zero() {
        let (errors, mse) = synthetic_ensemble();
        for traj in &errors {
            let truth: Vec<DVector<f64>> = traj.clone();
            let estimates: Vec<DVector<f64>> = traj.iter().map(|e| e * 0.0).collect();
            // truth - estimate = e, covariance = per-step MSE: balanced.
            let inc_val = inc(&truth, &estimates, &mse, &mse).unwrap();
            assert_relative_eq!(inc_val, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn inc_optimistic_and_pessimistic() {
        let (errors, mse) = synthetic_ensemble();
        let traj = &errors[0];
        let truth: Vec<DVector<f64>> = traj.clone();
        let estimates: Vec<DVector<f64>> = traj.iter().map(|e| e * 0.0).collect();
        let optimistic: Vec<DMatrix<f64>> = mse.iter().map(|m| m / 10.0).collect();
        let pessimistic: Vec<DMatrix<f64>> = mse.iter().map(|m| m * 10.0).collect();
        assert_relative_eq!(
            inc(&truth, &estimates, &optimistic, &mse).unwrap(),
            10.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            inc(&truth, &estimates, &pessimistic, &mse).unwrap(),
            -10.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn inc_post_hoc_inflation_shifts_by_ten() {
        let (errors, mse) = synthetic_ensemble();
        let traj = &errors[1];
        let truth: Vec<DVector<f64>> = traj.clone();
        let estimates: Vec<DVector<f64>> = traj.iter().map(|e| e * 0.0).collect();
        let covs: Vec<DMatrix<f64>> = mse.iter().map(|m| m * 1.7).collect();
        let inflated: Vec<DMatrix<f64>> = covs.iter().map(|m| m * 10.0).collect();
        let base = inc(&truth, &estimates, &covs, &mse).unwrap();
        let shifted = inc(&truth, &estimates, &inflated, &mse).unwrap();
        assert_relative_eq!(shifted, base - 10.0, epsilon = 1e-9);
    }

    #[test]
    fn inc_parts_agrees_with_direct() {
        let (errors, mse) = synthetic_ensemble();
        let traj = &errors[2];
        let truth: Vec<DVector<f64>> = traj.clone();
        let estimates: Vec<DVector<f64>> = traj.iter().map(|e| e * 0.0).collect();
        let covs: Vec<DMatrix<f64>> = mse.iter().map(|m| m * 0.6).collect();
        let direct = inc(&truth, &estimates, &covs, &mse).unwrap();
        let numerators: Vec<f64> = traj
            .iter()
            .zip(covs.iter())
            .map(|(e, p)| cholesky_spd(p).unwrap().quad_form(e))
            .collect();
        let factors = factorize_mse(&mse).unwrap();
        let parts = inc_from_parts(traj, &numerators, &factors);
        assert_relative_eq!(parts, direct, epsilon = 1e-12);
    }

    #[test]
    fn bootstrap_constant_is_zero() {
        let values = vec![2.5; 50];
        assert_eq!(bootstrap_std(&values, 1000, 1).unwrap(), 0.0);
    }

    #[test]
    fn bootstrap_bernoulli_matches_analytic() {
        // std of the mean of n fair coin flips is sqrt(0.25/n).
        let n = 4000;
        let values: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let se = bootstrap_std(&values, 10_000, 7).unwrap();
        let analytic = (0.25 / n as f64).sqrt();
        assert!(
            (se - analytic).abs() < 0.1 * analytic,
            "bootstrap se {se}, analytic {analytic}"
        );
    }

    #[test]
    fn bootstrap_deterministic() {
        let values: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let a = bootstrap_std(&values, 2000, 11).unwrap();
        let b = bootstrap_std(&values, 2000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_needs_two_values() {
        assert!(matches!(
            bootstrap_std(&[1.0], 100, 0),
            Err(BenchError::TooFewValues { .. })
        ));
    }
}
