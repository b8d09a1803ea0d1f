// Diagnostic: anatomy of the TPQ measurement update on one radar trajectory.
use nalgebra::{DMatrix, DVector};
use tpquad::filters::{predict, update, FilterConfig, StudentFilterState, TransformSpec};
use tpquad::kernels::{mc_expectations, RbfKernel};
use tpquad::quadrature::{bq_weights, fully_symmetric_points, quad_sum};
use tpquad_bench::config::BenchConfig;

fn main() {
    let mut cfg = BenchConfig::radar_default();
    cfg.scenario.trajectories = Some(1);
    cfg.scenario.steps = Some(40);
    cfg.scenario.seed = Some(3);
    cfg.scenario.radar.nominal_noise_diag = [50.0, 0.4];
    cfg.scenario.radar.glint_noise_diag = [5000.0, 16.0];
    let scenario = cfg.resolve_scenario().unwrap();
    let trajs = scenario.simulate();
    let model_holder = scenario.model();
    let model = model_holder.as_dyn();

    let set = fully_symmetric_points::<f64>(4, 0.0);
    let theta_f = [1.0, 100.0, 100.0, 100.0, 100.0];
    let theta_h = [0.05, 10.0, 100.0, 10.0, 100.0];
    let kf = RbfKernel::from_params(&theta_f).unwrap();
    let kh = RbfKernel::from_params(&theta_h).unwrap();
    let kef = mc_expectations(&kf, set.points(), 1000.0, 200_000, 353).unwrap();
    let keh = mc_expectations(&kh, set.points(), 4.0, 200_000, 353).unwrap();
    let wf = std::sync::Arc::new(
        bq_weights(&kef, &kf.gram(set.points()), &set, Some(4.0)).unwrap(),
    );
    let wh = std::sync::Arc::new(
        bq_weights(&keh, &kh.gram(set.points()), &set, Some(4.0)).unwrap(),
    );
    println!(
        "bracket_f={:.6e} bracket_h={:.6e} sum_wm_h={:.4}",
        wf.var_bracket,
        wh.var_bracket,
        wh.wm.sum()
    );

    let fc = FilterConfig::new(
        TransformSpec::Bq(wf.clone()),
        TransformSpec::Bq(wh.clone()),
        1000.0,
        1000.0,
        4.0,
    )
    .unwrap();
    let mut state = StudentFilterState {
        mean: DVector::from_vec(vec![10175.0, 295.0, 980.0, -35.0]),
        cov: DMatrix::from_diagonal(&DVector::from_vec(vec![10000.0, 100.0, 10000.0, 100.0])),
        dof: 1000.0,
    };
    println!(
        "{:>3} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10} {:>9} {:>9} {:>9}",
        "k", "pos_err", "Ppos", "g_range", "g_bear", "s_range", "s_bear", "Sz_rr", "Sz_bb", "beta"
    );
    for (i, z) in trajs[0].measurements.iter().enumerate() {
        let (pm, pp) = predict(&state, model, &fc, i + 1).unwrap();
        // manual measurement transform pieces
        let l = tpquad::linalg::cholesky_spd(&pp).unwrap();
        let n = wh.len();
        let mut y_range = DVector::zeros(n);
        let mut y_bear = DVector::zeros(n);
        for c in 0..n {
            let xi = wh.unit_points.column(c);
            let x = &pm + l.lower() * xi;
            let zz = model.measurement(&x.clone(), &DVector::zeros(2));
            y_range[c] = zz[0];
            y_bear[c] = zz[1];
        }
        let g_range = wh.gamma(&y_range);
        let g_bear = wh.gamma(&y_bear);
        let s_range = g_range * wh.var_bracket;
        let s_bear = g_bear * wh.var_bracket;
        let mu_r = quad_sum(&wh.wm, &y_range);
        let _ = mu_r;
        let next = update((&pm, &pp), model, &fc, z).unwrap();
        // recompute innovation covariance via public path
        let (mu_z, sz, _c) =
            tpquad::filters::measurement_moments(&pm, &pp, model, &fc).unwrap();
        let innov = z - &mu_z;
        let beta = tpquad::linalg::cholesky_spd(&sz).unwrap().quad_form(&innov);
        let truth = &trajs[0].states[i];
        let pos_err =
            ((truth[0] - next.mean[0]).powi(2) + (truth[2] - next.mean[2]).powi(2)).sqrt();
        println!(
            "{:>3} {:>9.1} {:>9.1} {:>9.2e} {:>9.2e} {:>10.3e} {:>10.3e} {:>9.2e} {:>9.2e} {:>9.2}",
            i + 1,
            pos_err,
            next.cov[(0, 0)].sqrt(),
            g_range,
            g_bear,
            s_range,
            s_bear,
            sz[(0, 0)],
            sz[(1, 1)],
            beta
        );
        state = next;
    }
}
