// Single-transform probe: BQ transform of a linear function vs exact moments.
use nalgebra::{DMatrix, DVector};
use tpquad::kernels::{gaussian_expectations, RbfKernel};
use tpquad::linalg::cholesky_spd;
use tpquad::quadrature::{bq_weights, fully_symmetric_points};
use tpquad::transforms::{gpq_transform, NoiseMode, TransformInput};

fn main() {
    let tau = 0.5;
    let f = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, tau, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, tau, 0.0, 0.0, 0.0, 1.0,
        ],
    );
    let mean = DVector::from_vec(vec![1.0, 0.5, -1.0, 0.3]);
    // fixed SPD covariance
    let b = DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0, 0.3, -0.2, 0.1, //
            0.3, 1.5, 0.4, -0.3, //
            -0.2, 0.4, 2.5, 0.2, //
            0.1, -0.3, 0.2, 1.2,
        ],
    );
    let cov = &b * b.transpose();

    for ell in [30.0, 100.0, 200.0, 300.0, 500.0] {
        let kernel = RbfKernel::new(1.0, DVector::from_element(4, ell)).unwrap();
        let set = fully_symmetric_points::<f64>(4, 0.0);
        let ke = gaussian_expectations(&kernel, set.points());
        let gram = kernel.gram(set.points());
        let factor = cholesky_spd(&gram).unwrap();
        let w = bq_weights(&ke, &gram, &set, None).unwrap();
        let f_c = f.clone();
        let func = move |x: &DVector<f64>| &f_c * x;
        let input = TransformInput {
            mean: mean.clone(),
            cov: cov.clone(),
            dof: 1e6,
            function: &func,
            out_dim: 4,
            noise_mode: NoiseMode::None,
        };
        let out = gpq_transform(&w, &input).unwrap();
        let exact_mean = &f * &mean;
        let exact_cov = &f * &cov * f.transpose();
        let exact_cross = &cov * f.transpose();
        let e_mu = (&out.mean - &exact_mean).amax() / exact_mean.amax();
        let e_cov = (&out.cov - &exact_cov).amax() / exact_cov.amax();
        let e_cross = (&out.cross_cov - &exact_cross).amax() / exact_cross.amax();
        println!(
            "ell={ell:6.0} jitter={:.1e} sum_wm-1={:+.2e} mean={e_mu:.2e} cov={e_cov:.2e} cross={e_cross:.2e} bracket={:+.2e}",
            factor.jitter(),
            w.wm.sum() - 1.0,
            w.var_bracket
        );
    }
}
