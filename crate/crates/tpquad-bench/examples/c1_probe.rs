// Per-step divergence of the Gaussian-limit BQ filter from the Kalman oracle.
use nalgebra::{DMatrix, DVector};
use tpquad::filters::{run_filter, FilterConfig, StateSpaceModel, StudentFilterState, TransformSpec};
use tpquad::kernels::{gaussian_expectations, RbfKernel};
use tpquad::quadrature::{bq_weights, fully_symmetric_points};
use tpquad::stats::{derive_seed, Gaussian};

struct LinearModel {
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl StateSpaceModel<f64> for LinearModel {
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
        &self.h * x + r
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
}

fn main() {
    let tau = 0.5;
    let model = LinearModel {
        f: DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, tau, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, tau, 0.0, 0.0, 0.0, 1.0,
            ],
        ),
        g: DMatrix::from_row_slice(
            4,
            2,
            &[tau * tau / 2.0, 0.0, tau, 0.0, 0.0, tau * tau / 2.0, 0.0, tau],
        ),
        h: DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        q: DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.1])),
        r: DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 0.25])),
    };
    let theta = [1.0, 300.0, 300.0, 300.0, 300.0];
    let kernel = RbfKernel::from_params(&theta).unwrap();
    let set = fully_symmetric_points::<f64>(4, 0.0);
    let ke = gaussian_expectations(&kernel, set.points());
    let gram = kernel.gram(set.points());
    let w = std::sync::Arc::new(bq_weights(&ke, &gram, &set, None).unwrap());

    let m0 = DVector::from_vec(vec![10.0, 1.0, -5.0, 0.5]);
    let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 4.0, 1.0]));

    // simulate
    let q_dist = Gaussian::new(DVector::zeros(2), model.q.clone()).unwrap();
    let r_dist = Gaussian::new(DVector::zeros(2), model.r.clone()).unwrap();
    let qs = q_dist.sample(100, derive_seed(41, 0));
    let rs = r_dist.sample(100, derive_seed(41, 1));
    let mut x = m0.clone();
    let mut zs = Vec::new();
    for k in 0..100 {
        x = model.dynamics(&x, &qs.row(k).transpose(), k + 1);
        zs.push(model.measurement(&x, &rs.row(k).transpose()));
    }

    // oracle
    let mut m = m0.clone();
    let mut p = p0.clone();
    let q_eff = &model.g * &model.q * model.g.transpose();
    let mut oracle = Vec::new();
    for z in &zs {
        let m_pred = &model.f * &m;
        let p_pred = &model.f * &p * model.f.transpose() + &q_eff;
        let s = &model.h * &p_pred * model.h.transpose() + &model.r;
        let k_gain = &p_pred * model.h.transpose() * s.try_inverse().unwrap();
        m = &m_pred + &k_gain * (z - &model.h * &m_pred);
        p = &p_pred - &k_gain * &model.h * &p_pred;
        oracle.push((m.clone(), p.clone()));
    }

    let cfg = FilterConfig::uniform(
        TransformSpec::Bq(w.clone()),
        TransformSpec::Bq(w),
        1e6,
    )
    .unwrap();
    let init = StudentFilterState {
        mean: m0,
        cov: p0,
        dof: 1e6,
    };
    // one-step error isolation from the oracle state
    {
        use tpquad::filters::{predict, measurement_moments, update};
        for k in [5usize, 50] {
            let (om, op) = &oracle[k - 1];
            let st = StudentFilterState { mean: om.clone(), cov: op.clone(), dof: 1e6 };
            let (pm, pp) = predict(&st, &model, &cfg, k + 1).unwrap();
            let exact_pm = &model.f * om;
            let exact_pp = &model.f * op * model.f.transpose() + &q_eff;
            println!(
                "k={k}: predict mean_err={:.2e} cov_err={:.2e}",
                (&pm - &exact_pm).norm() / exact_pm.norm(),
                (&pp - &exact_pp).norm() / exact_pp.norm()
            );
            let (mz, sz, cx) = measurement_moments(&pm, &pp, &model, &cfg).unwrap();
            let exact_sz = &model.h * &exact_pp * model.h.transpose() + &model.r;
            let exact_cx = &exact_pp * model.h.transpose();
            let exact_mz = &model.h * &exact_pm;
            println!(
                "      meas mean_err={:.2e} S_err={:.2e} C_err={:.2e}",
                (&mz - &exact_mz).norm() / exact_mz.norm(),
                (&sz - &exact_sz).norm() / exact_sz.norm(),
                (&cx - &exact_cx).norm() / exact_cx.norm()
            );
            let post = update((&pm, &pp), &model, &cfg, &zs[k]).unwrap();
            let s_inv = exact_sz.clone().try_inverse().unwrap();
            let k_gain = &exact_pp * model.h.transpose() * &s_inv;
            let exact_post_p = &exact_pp - &k_gain * &model.h * &exact_pp;
            println!(
                "      update cov_err={:.2e} (oracle next {:.2e})",
                (&post.cov - &exact_post_p).norm() / exact_post_p.norm(),
                (&post.cov - &oracle[k].1).norm() / oracle[k].1.norm()
            );
        }
    }
    let states = run_filter(&model, &cfg, &zs, init).unwrap();
    for (k, (s, (om, op))) in states.iter().zip(oracle.iter()).enumerate() {
        if k % 10 == 0 || k == 99 {
            println!(
                "k={k:3} mean_err={:.3e} cov_err={:.3e} tr(P)={:.4e} tr(P_oracle)={:.4e}",
                (&s.mean - om).norm() / om.norm(),
                (&s.cov - op).norm() / op.norm(),
                s.cov.trace(),
                op.trace()
            );
        }
    }
}
