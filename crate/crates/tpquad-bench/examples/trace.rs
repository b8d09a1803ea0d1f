// quick diagnostic: print truth vs UKF/TPQ means on one UNGM trajectory
use nalgebra::{DMatrix, DVector};
use tpquad_bench::config::BenchConfig;
use tpquad::stats::Gaussian;
use tpquad::filters::{ukf_step};

fn main() {
    let mut cfg = BenchConfig::ungm_default();
    cfg.scenario.trajectories = Some(1);
    cfg.scenario.steps = Some(30);
    cfg.scenario.seed = Some(5);
    let scenario = cfg.resolve_scenario().unwrap();
    let trajs = scenario.simulate();
    let model_holder = scenario.model();
    let model = model_holder.as_dyn();
    let mut state = Gaussian::new(DVector::zeros(1), DMatrix::from_element(1,1,1.0)).unwrap();
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "k", "truth", "z", "ukf_mean", "ukf_var");
    for (i, z) in trajs[0].measurements.iter().enumerate() {
        state = ukf_step(&state, model, 0.0, i+1, z).unwrap();
        println!("{:>4} {:>10.3} {:>10.3} {:>10.3} {:>10.3}", i+1, trajs[0].states[i][0], z[0], state.mean()[0], state.cov()[(0,0)]);
    }
}
