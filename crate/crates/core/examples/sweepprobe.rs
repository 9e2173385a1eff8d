use dvlnav::geometry::{build_transform, BeamGeometry};
use dvlnav::gpr::*;
use dvlnav::ls::LsEstimator;
use dvlnav::sim::*;
use dvlnav::derive_seed;

fn main() {
    let theta = 20f64.to_radians();
    let transform = build_transform(&BeamGeometry::janus(theta).unwrap());
    let sweep = [0.001, 0.003, 0.005, 0.007, 0.009, 0.011];
    let noise = 0.02;
    let base_seed = 42u64;

    // Training data: 4 mixed trajectories x all bias levels.
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for traj in 0..4u64 {
        let spec = TrajectorySpec::new(TrajectoryPattern::Mixed, 600.0, 1.5)
            .with_seed(derive_seed(base_seed, &format!("traj/{traj}")));
        let truth = generate_trajectory(&spec, 1).unwrap();
        for (li, &bias) in sweep.iter().enumerate() {
            let errors = DvlErrorSpec::uniform_bias(bias, noise);
            let seed = derive_seed(base_seed, &format!("beams/{traj}/{li}"));
            for b in synthesize_beams(&truth, &transform, &errors, seed).unwrap() {
                inputs.push([b.beams[0], b.beams[1], b.beams[2], b.beams[3]]);
                targets.push([b.truth_velocity_dvl[0], b.truth_velocity_dvl[1], b.truth_velocity_dvl[2]]);
            }
        }
    }
    let full = Dataset::new(inputs, targets).unwrap();
    println!("full training set: {} pairs", full.len());
    let ds = subsample(&full, 600, derive_seed(base_seed, "subsample")).unwrap();
    let init = init_hyperparams(&ds, noise).unwrap();
    let t0 = std::time::Instant::now();
    let out = train(ds, init, &OptimizerConfig::default()).unwrap();
    println!("trained in {:?}; nll {} -> {}", t0.elapsed(), out.nll_trace[0], out.nll_trace.last().unwrap());
    let model = out.model;
    println!("learned noise std: {:.5}", model.hyperparams().noise_std());

    // Test trajectory.
    let spec = TrajectorySpec::new(TrajectoryPattern::Mixed, 600.0, 1.5)
        .with_seed(derive_seed(base_seed, "traj/test"));
    let truth = generate_trajectory(&spec, 1).unwrap();
    let solver = LsEstimator::new(&transform, noise).unwrap();

    let mut mogpr_rmses = Vec::new();
    let mut ls_rmses = Vec::new();
    for (li, &bias) in sweep.iter().enumerate() {
        let errors = DvlErrorSpec::uniform_bias(bias, noise);
        let seed = derive_seed(base_seed, &format!("testbeams/{li}"));
        let beams = synthesize_beams(&truth, &transform, &errors, seed).unwrap();
        let mut se_ls = 0.0;
        let mut se_gp = 0.0;
        let mut var_sum = 0.0;
        for b in &beams {
            let ls = solver.solve(&b.beams);
            se_ls += (ls.velocity_dvl - b.truth_velocity_dvl).norm_squared();
            let p = model.predict(&[b.beams[0], b.beams[1], b.beams[2], b.beams[3]]);
            se_gp += (p.mean - b.truth_velocity_dvl).norm_squared();
            var_sum += p.covariance[(0,0)];
        }
        let n = beams.len() as f64;
        let rmse_ls = (se_ls / n).sqrt();
        let rmse_gp = (se_gp / n).sqrt();
        println!("bias {bias:.3}: rmse_ls {rmse_ls:.5} rmse_mogpr {rmse_gp:.5} improvement {:.1}%  mean gp std {:.4}",
            100.0*(1.0 - rmse_gp/rmse_ls), (var_sum/n as f64).sqrt());
        ls_rmses.push(rmse_ls);
        mogpr_rmses.push(rmse_gp);
    }
    println!("8a: ls(0.011)/ls(0.001) = {:.4} (needs >= 1.5)", ls_rmses[5]/ls_rmses[0]);
    let max = mogpr_rmses.iter().cloned().fold(f64::MIN, f64::max);
    let min = mogpr_rmses.iter().cloned().fold(f64::MAX, f64::min);
    println!("8b: mogpr spread (max-min)/min = {:.4} (needs < 0.25)", (max-min)/min);
    println!("8c: mogpr/ls at 0.011 = {:.4} (needs <= 0.85)", mogpr_rmses[5]/ls_rmses[5]);
}
