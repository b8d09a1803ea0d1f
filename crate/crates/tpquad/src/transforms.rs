//! Moment transforms: classical quadrature, Gaussian-process quadrature, and
//! Student-t process quadrature.
//!
//! A moment transform maps the first two moments of a random input plus a
//! nonlinearity to the mean, covariance, and input-output cross-covariance
//! of the output. The quadrature-model transforms additionally inflate the
//! output covariance by the expected model variance at unvisited inputs; the
//! TPQ variant scales that inflation per output by the data-dependent factor
//! `(ν̃ - 2 + yᵀK⁻¹y)/(ν̃ - 2 + N)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::Result;
use crate::linalg::{self, cholesky_spd};
use crate::quadrature::{quad_sum, BqWeights, UnitSigmaSet};
use crate::{cvt, Real};

/// Transformed mean, covariance, and input-output cross-covariance.
#[derive(Debug, Clone)]
pub struct MomentTriple<T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    /// `d x e`: rows follow the input coordinates, columns the outputs.
    pub cross_cov: DMatrix<T>,
}

/// How process/measurement noise enters the transformed function.
#[derive(Debug, Clone)]
pub enum NoiseMode<T: Real> {
    /// The function output is used as-is.
    None,
    /// The noise is additive; its covariance is added to the transformed
    /// covariance after symmetrization and repair.
    Additive(DMatrix<T>),
    /// The input is already augmented with noise coordinates.
    Augmented,
}

/// Input description for a moment transform.
pub struct TransformInput<'f, T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    /// Degrees of freedom of the (Student) input; purely informational for
    /// the transform itself, which consumes standardized weights.
    pub dof: T,
    pub function: &'f dyn Fn(&DVector<T>) -> DVector<T>,
    pub out_dim: usize,
    pub noise_mode: NoiseMode<T>,
}

impl<'f, T: Real> TransformInput<'f, T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Evaluates the function at `mean + L ξ_i` for every unit point, returning
/// the `N x e` value matrix and the sigma points as columns of a `d x N`
/// matrix.
fn evaluate_at_sigma_points<T: Real>(
    unit_points: &DMatrix<T>,
    factor: &DMatrix<T>,
    input: &TransformInput<'_, T>,
) -> (DMatrix<T>, DMatrix<T>) {
    let d = input.dim();
    let n = unit_points.ncols();
    let mut xs = DMatrix::<T>::zeros(d, n);
    let mut values = DMatrix::<T>::zeros(n, input.out_dim);
    for i in 0..n {
        let xi = unit_points.column(i);
        let mut x = input.mean.clone();
        for r in 0..d {
            let mut acc = T::zero();
            for c in 0..=r {
                acc += factor[(r, c)] * xi[c];
            }
            x[r] += acc;
        }
        let y = (input.function)(&x);
        assert_eq!(y.len(), input.out_dim, "function output dimension mismatch");
        for e in 0..input.out_dim {
            values[(i, e)] = y[e];
        }
        xs.set_column(i, &x);
    }
    (values, xs)
}

/// Classical quadrature moment transform: a weighted sample approximation of
/// the output moments at the sigma points `mean + L ξ_i`.
pub fn classical_transform<T: Real>(
    points: &UnitSigmaSet<T>,
    weights: &DVector<T>,
    input: &TransformInput<'_, T>,
) -> Result<MomentTriple<T>> {
    assert_eq!(points.len(), weights.len(), "weight count mismatch");
    assert_eq!(points.dim(), input.dim(), "point set dimension mismatch");
    let factor = cholesky_spd(&input.cov)?;
    let (values, xs) = evaluate_at_sigma_points(points.points(), factor.lower(), input);
    let n = points.len();
    let e = input.out_dim;
    let d = input.dim();

    let mut mean = DVector::<T>::zeros(e);
    for c in 0..e {
        mean[c] = quad_sum(weights, &values.column(c).into_owned());
    }

    let mut cov = DMatrix::<T>::zeros(e, e);
    let mut cross = DMatrix::<T>::zeros(d, e);
    for i in 0..n {
        let w = weights[i];
        for a in 0..e {
            let da = values[(i, a)] - mean[a];
            for b in 0..e {
                cov[(a, b)] += w * da * (values[(i, b)] - mean[b]);
            }
            for r in 0..d {
                cross[(r, a)] += w * (xs[(r, i)] - input.mean[r]) * da;
            }
        }
    }
    linalg::symmetrize(&mut cov);
    if let NoiseMode::Additive(q_add) = &input.noise_mode {
        assert_eq!(q_add.nrows(), e, "additive noise dimension mismatch");
        cov += q_add;
    }
    Ok(MomentTriple {
        mean,
        cov,
        cross_cov: cross,
    })
}

/// Student-t process quadrature moment transform.
///
/// Uses the weights' own unit point set; the covariance picks up the
/// per-output inflation `γ_e [kbar - trace(Qm K⁻¹)]`.
pub fn tpq_transform<T: Real>(
    weights: &BqWeights<T>,
    input: &TransformInput<'_, T>,
) -> Result<MomentTriple<T>> {
    bq_transform_impl(weights, input, false)
}

/// Gaussian-process quadrature moment transform: identical to
/// [`tpq_transform`] with the data-dependent factor pinned at one.
pub fn gpq_transform<T: Real>(
    weights: &BqWeights<T>,
    input: &TransformInput<'_, T>,
) -> Result<MomentTriple<T>> {
    bq_transform_impl(weights, input, true)
}

fn bq_transform_impl<T: Real>(
    weights: &BqWeights<T>,
    input: &TransformInput<'_, T>,
    force_unit_gamma: bool,
) -> Result<MomentTriple<T>> {
    assert_eq!(weights.dim(), input.dim(), "weight set dimension mismatch");
    let factor = cholesky_spd(&input.cov)?;
    let (values, _) = evaluate_at_sigma_points(&weights.unit_points, factor.lower(), input);
    let e = input.out_dim;

    let mut mean = DVector::<T>::zeros(e);
    for c in 0..e {
        mean[c] = quad_sum(&weights.wm, &values.column(c).into_owned());
    }

    // Yᵀ Wc Y - μ μᵀ + diag(γ_e [kbar - tr(Qm K⁻¹)]), with the quadratic
    // form evaluated as (K⁻¹Y)ᵀ Qm (K⁻¹Y) through the Gram factor: for the
    // near-singular Gram matrices of long-lengthscale kernels this loses one
    // conditioning factor instead of two.
    let z = weights.solve_gram(&values);
    let mut cov = z.transpose() * &weights.qm * &z - &mean * mean.transpose();
    for c in 0..e {
        let gamma = if force_unit_gamma {
            T::one()
        } else {
            weights.gamma(&values.column(c).into_owned())
        };
        cov[(c, c)] += gamma * weights.var_bracket;
    }
    linalg::symmetrize(&mut cov);
    let mut cov = psd_repair(&cov);
    if let NoiseMode::Additive(q_add) = &input.noise_mode {
        assert_eq!(q_add.nrows(), e, "additive noise dimension mismatch");
        cov += q_add;
    }

    // C = L (Wcc Y) = L (Rm K⁻¹ Y)
    let cross_cov = factor.lower() * (&weights.rm * &z);

    Ok(MomentTriple {
        mean,
        cov,
        cross_cov,
    })
}

/// Clips the spectrum of a symmetric matrix from below.
///
/// Eigenvalues below `1e-10 * λ_max` are raised to that floor; a matrix that
/// is already positive definite is returned unchanged.
pub fn psd_repair<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let eigen = SymmetricEigen::new(m.clone());
    let lambda_max = eigen
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, l| acc.max(*l));
    let floor = cvt::<T>(1e-10) * lambda_max;
    let min = eigen
        .eigenvalues
        .iter()
        .fold(T::max_value().unwrap(), |acc, l| acc.min(*l));
    if min > floor {
        return m.clone();
    }
    let clipped = DVector::from_fn(eigen.eigenvalues.len(), |i, _| {
        eigen.eigenvalues[i].max(floor)
    });
    let mut out = &eigen.eigenvectors * DMatrix::from_diagonal(&clipped) * eigen.eigenvectors.transpose();
    linalg::symmetrize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{mc_expectations, RbfKernel};
    use crate::quadrature::{bq_weights, fully_symmetric_points, ut_weights};
    use crate::stats::Student;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_spd(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))
            + DMatrix::<f64>::identity(d, d) * (d as f64);
        &b * b.transpose()
    }

    #[test]
    fn classical_identity_function() {
        let mut rng = crate::stats::rng_from(1);
        let d = 3;
        let cov = random_spd(d, &mut rng);
        let mean = DVector::from_fn(d, |i, _| i as f64 - 1.0);
        let set = fully_symmetric_points::<f64>(d, 0.0);
        let w = ut_weights::<f64>(d, 0.0);
        let f = |x: &DVector<f64>| x.clone();
        let input = TransformInput {
            mean: mean.clone(),
            cov: cov.clone(),
            dof: 1e6,
            function: &f,
            out_dim: d,
            noise_mode: NoiseMode::None,
        };
        let out = classical_transform(&set, &w, &input).unwrap();
        assert_relative_eq!(out.mean, mean, epsilon = 1e-10);
        assert_relative_eq!(out.cov, cov, epsilon = 1e-10);
        assert_relative_eq!(out.cross_cov, cov, epsilon = 1e-10);
    }

    #[test]
    fn classical_linear_function_oracle() {
        let mut rng = crate::stats::rng_from(2);
        let (d, e) = (3, 2);
        let cov = random_spd(d, &mut rng);
        let mean = DVector::from_fn(d, |i, _| 0.5 * i as f64);
        let a = DMatrix::from_fn(e, d, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(e, |i, _| i as f64);
        let set = fully_symmetric_points::<f64>(d, 1.0);
        let w = ut_weights::<f64>(d, 1.0);
        let a_f = a.clone();
        let b_f = b.clone();
        let f = move |x: &DVector<f64>| &a_f * x + &b_f;
        let input = TransformInput {
            mean: mean.clone(),
            cov: cov.clone(),
            dof: 1e6,
            function: &f,
            out_dim: e,
            noise_mode: NoiseMode::None,
        };
        let out = classical_transform(&set, &w, &input).unwrap();
        assert_relative_eq!(out.mean, &a * &mean + &b, epsilon = 1e-10);
        assert_relative_eq!(out.cov, &a * &cov * a.transpose(), epsilon = 1e-10);
        assert_relative_eq!(out.cross_cov, &cov * a.transpose(), epsilon = 1e-10);
    }

    #[test]
    fn classical_constant_function() {
        let d = 2;
        let set = fully_symmetric_points::<f64>(d, 0.0);
        let w = ut_weights::<f64>(d, 0.0);
        let c = DVector::from_vec(vec![4.0, -1.0]);
        let c_f = c.clone();
        let f = move |_: &DVector<f64>| c_f.clone();
        let q_add = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.7]));
        let input = TransformInput {
            mean: DVector::zeros(d),
            cov: DMatrix::identity(d, d),
            dof: 5.0,
            function: &f,
            out_dim: 2,
            noise_mode: NoiseMode::Additive(q_add.clone()),
        };
        let out = classical_transform(&set, &w, &input).unwrap();
        assert_relative_eq!(out.mean, c, epsilon = 1e-12);
        assert_relative_eq!(out.cov, q_add, epsilon = 1e-12);
        assert_relative_eq!(out.cross_cov, DMatrix::zeros(d, 2), epsilon = 1e-12);
    }

    fn ungm_measurement_weights(model_dof: Option<f64>) -> BqWeights<f64> {
        let kernel = RbfKernel::new(3.0, DVector::from_vec(vec![3.0])).unwrap();
        let set = fully_symmetric_points::<f64>(1, 0.0);
        let ke = mc_expectations(&kernel, set.points(), 4.0, 200_000, 7).unwrap();
        let gram = kernel.gram(set.points());
        bq_weights(&ke, &gram, &set, model_dof).unwrap()
    }

    fn quadratic_input<'f>(
        f: &'f dyn Fn(&DVector<f64>) -> DVector<f64>,
    ) -> TransformInput<'f, f64> {
        TransformInput {
            mean: DVector::zeros(1),
            cov: DMatrix::from_element(1, 1, 1.0),
            dof: 4.0,
            function: f,
            out_dim: 1,
            noise_mode: NoiseMode::None,
        }
    }

    #[test]
    fn tpq_gaussian_limit_matches_gpq() {
        let w_tp = ungm_measurement_weights(Some(1e9));
        let w_gp = ungm_measurement_weights(None);
        let f = |x: &DVector<f64>| DVector::from_vec(vec![0.05 * x[0] * x[0]]);
        let input = quadratic_input(&f);
        let tp = tpq_transform(&w_tp, &input).unwrap();
        let gp = gpq_transform(&w_gp, &input).unwrap();
        assert_relative_eq!(tp.mean, gp.mean, epsilon = 1e-12);
        assert_relative_eq!(tp.cov, gp.cov, max_relative = 1e-6);
        assert_relative_eq!(tp.cross_cov, gp.cross_cov, epsilon = 1e-12);
    }

    #[test]
    fn tpq_zero_function_gives_pure_inflation() {
        let w = ungm_measurement_weights(Some(4.0));
        let f = |_: &DVector<f64>| DVector::zeros(1);
        let input = quadratic_input(&f);
        let out = tpq_transform(&w, &input).unwrap();
        assert_eq!(out.mean[0], 0.0);
        let gamma = (4.0 - 2.0) / (4.0 - 2.0 + 3.0);
        assert_relative_eq!(out.cov[(0, 0)], gamma * w.var_bracket, max_relative = 1e-9);
    }

    #[test]
    fn tpq_mean_ignores_model_dof() {
        let f = |x: &DVector<f64>| DVector::from_vec(vec![0.05 * x[0] * x[0]]);
        let input = quadratic_input(&f);
        let mut means = Vec::new();
        for dof in [Some(3.0), Some(10.0), Some(1e6), None] {
            let w = ungm_measurement_weights(dof);
            means.push(tpq_transform(&w, &input).unwrap().mean[0]);
        }
        for m in &means[1..] {
            assert_eq!(*m, means[0]);
        }
    }

    #[test]
    fn tpq_mean_against_monte_carlo() {
        // Oracle: large-sample Monte Carlo mean of 0.05 x² for a Student
        // input with unit covariance and dof 4.
        let dist =
            Student::from_covariance(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0), 4.0)
                .unwrap();
        let n = 10_000_000;
        let draws = dist.sample(n, 1717);
        let vals: Vec<f64> = (0..n).map(|r| 0.05 * draws[(r, 0)] * draws[(r, 0)]).collect();
        let mc = vals.iter().sum::<f64>() / n as f64;
        let mc_var = vals.iter().map(|v| (v - mc).powi(2)).sum::<f64>() / n as f64;
        let mc_se = (mc_var / n as f64).sqrt();

        let w = ungm_measurement_weights(Some(4.0));
        let f = |x: &DVector<f64>| DVector::from_vec(vec![0.05 * x[0] * x[0]]);
        let input = quadratic_input(&f);
        let out = tpq_transform(&w, &input).unwrap();
        let tol = 0.25 * mc + 3.0 * mc_se;
        assert!(
            (out.mean[0] - mc).abs() < tol,
            "quadrature mean {} vs MC {} (tolerance {})",
            out.mean[0],
            mc,
            tol
        );
    }

    #[test]
    fn tpq_minus_gpq_is_diagonal_inflation() {
        let w_tp = ungm_measurement_weights(Some(4.0));
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0] + 0.1 * x[0] * x[0]]);
        let input = quadratic_input(&f);
        let tp = tpq_transform(&w_tp, &input).unwrap();
        let gp = gpq_transform(&w_tp, &input).unwrap();
        // Recompute the function values to evaluate gamma.
        let y = DVector::from_vec(vec![
            f(&DVector::from_vec(vec![0.0]))[0],
            f(&DVector::from_vec(vec![1.0]))[0],
            f(&DVector::from_vec(vec![-1.0]))[0],
        ]);
        let gamma = w_tp.gamma(&y);
        let expected = (gamma - 1.0) * w_tp.var_bracket;
        assert_relative_eq!(tp.cov[(0, 0)] - gp.cov[(0, 0)], expected, max_relative = 1e-6);
        assert_eq!(tp.mean, gp.mean);
        assert_eq!(tp.cross_cov, gp.cross_cov);
    }

    #[test]
    fn synthetic_unit_gamma_matches_gpq() {
        // Function values with yᵀK⁻¹y = N give gamma = 1 exactly.
        let w = ungm_measurement_weights(Some(4.0));
        let n = w.len();
        let a = DVector::from_element(n, (n as f64).sqrt() / (n as f64).sqrt() * 1.0);
        // y = L a with ‖a‖² = N
        let a = &a * ((n as f64).sqrt() / a.norm());
        let y = &w.gram_factor * &a;
        assert_relative_eq!(w.gamma(&y), 1.0, epsilon = 1e-12);
        let idx = std::cell::Cell::new(0usize);
        let y_f = y.clone();
        let f = move |_: &DVector<f64>| {
            let i = idx.get();
            idx.set(i + 1);
            DVector::from_vec(vec![y_f[i % y_f.len()]])
        };
        let input = quadratic_input(&f);
        let tp = tpq_transform(&w, &input).unwrap();
        let idx2 = std::cell::Cell::new(0usize);
        let y_f2 = y.clone();
        let f2 = move |_: &DVector<f64>| {
            let i = idx2.get();
            idx2.set(i + 1);
            DVector::from_vec(vec![y_f2[i % y_f2.len()]])
        };
        let input2 = quadratic_input(&f2);
        let gp = gpq_transform(&w, &input2).unwrap();
        assert_relative_eq!(tp.cov[(0, 0)], gp.cov[(0, 0)], max_relative = 1e-10);
    }

    #[test]
    fn constant_function_mean_error_bound() {
        let w = ungm_measurement_weights(None);
        let c = 5.0;
        let f = move |_: &DVector<f64>| DVector::from_vec(vec![c]);
        let input = quadratic_input(&f);
        let out = gpq_transform(&w, &input).unwrap();
        let weight_sum: f64 = w.wm.iter().sum();
        assert!(
            (out.mean[0] - c).abs() <= c.abs() * (1.0 - weight_sum).abs() + 1e-12,
            "constant mean error {} exceeds bound",
            (out.mean[0] - c).abs()
        );
    }

    #[test]
    fn var_bracket_nonnegative_for_benchmark_sets() {
        // The UNGM and radar kernel/point configurations used by the
        // benchmarks must produce a nonnegative expected-variance bracket.
        let configs: Vec<(Vec<f64>, usize, f64)> = vec![
            (vec![3.0, 1.0], 1, 4.0),
            (vec![3.0, 3.0], 1, 4.0),
            (vec![1.0, 100.0, 100.0, 100.0, 100.0], 4, 1000.0),
            (vec![0.05, 10.0, 100.0, 10.0, 100.0], 4, 4.0),
        ];
        for (theta, d, dof) in configs {
            let kernel = RbfKernel::from_params(&theta).unwrap();
            let set = fully_symmetric_points::<f64>(d, 0.0);
            let ke = mc_expectations(&kernel, set.points(), dof, 200_000, 42).unwrap();
            let gram = kernel.gram(set.points());
            let w = bq_weights(&ke, &gram, &set, Some(4.0)).unwrap();
            assert!(
                w.var_bracket >= 0.0,
                "negative bracket {} for theta {:?}",
                w.var_bracket,
                theta
            );
        }
    }

    #[test]
    fn augmented_additive_noise_cross_covariance() {
        // f(x, q) = A x + q on an augmented input with block-diagonal
        // covariance: the noise rows of the cross-covariance equal Q.
        let mut rng = crate::stats::rng_from(5);
        let (dx, dq) = (2, 2);
        let px = random_spd(dx, &mut rng);
        let qn = random_spd(dq, &mut rng);
        let a = DMatrix::from_fn(dq, dx, |_, _| rng.gen_range(-1.0..1.0));
        let d = dx + dq;
        let mut cov = DMatrix::<f64>::zeros(d, d);
        cov.view_mut((0, 0), (dx, dx)).copy_from(&px);
        cov.view_mut((dx, dx), (dq, dq)).copy_from(&qn);
        let a_f = a.clone();
        let f = move |xa: &DVector<f64>| {
            let x = xa.rows(0, dx).into_owned();
            let q = xa.rows(dx, dq).into_owned();
            &a_f * x + q
        };
        let set = fully_symmetric_points::<f64>(d, 0.0);
        let w = ut_weights::<f64>(d, 0.0);
        let input = TransformInput {
            mean: DVector::zeros(d),
            cov,
            dof: 8.0,
            function: &f,
            out_dim: dq,
            noise_mode: NoiseMode::Augmented,
        };
        let out = classical_transform(&set, &w, &input).unwrap();
        let noise_rows = out.cross_cov.rows(dx, dq).into_owned();
        assert_relative_eq!(noise_rows, qn, epsilon = 1e-10);
    }

    #[test]
    fn transforms_are_deterministic() {
        let w = ungm_measurement_weights(Some(4.0));
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0].sin()]);
        let input = quadratic_input(&f);
        let a = tpq_transform(&w, &input).unwrap();
        let b = tpq_transform(&w, &input).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.cov, b.cov);
        assert_eq!(a.cross_cov, b.cross_cov);
    }

    #[test]
    fn psd_repair_leaves_pd_untouched() {
        let mut rng = crate::stats::rng_from(6);
        let m = random_spd(3, &mut rng);
        let repaired = psd_repair(&m);
        assert_relative_eq!(repaired, m, epsilon = 1e-12);
    }

    #[test]
    fn psd_repair_clips_negative_eigenvalue() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-14]));
        let repaired = psd_repair(&m);
        assert_relative_eq!(repaired[(0, 0)], 1.0, epsilon = 1e-10);
        assert!(repaired[(1, 1)] > 0.0 && repaired[(1, 1)] <= 2e-10);
    }

    #[test]
    fn psd_repair_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let m = &v * v.transpose();
        let repaired = psd_repair(&m);
        let eigen = SymmetricEigen::new(repaired);
        let floor = 1e-10 * 9.0; // λ_max = ‖v‖² = 9
        for l in eigen.eigenvalues.iter() {
            assert!(*l >= floor * (1.0 - 1e-6), "eigenvalue {l} below floor");
        }
        let max = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(max, 9.0, max_relative = 1e-9);
    }
}
