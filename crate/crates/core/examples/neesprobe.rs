use dvlnav::ekf::*;
use dvlnav::geometry::{build_transform, BeamGeometry};
use dvlnav::ls::LsEstimator;
use dvlnav::sim::*;
use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let transform = build_transform(&BeamGeometry::janus(20f64.to_radians()).unwrap());
    let spec = TrajectorySpec::new(TrajectoryPattern::Mixed, 120.0, 1.5).with_seed(3);
    let truth100 = generate_trajectory(&spec, 100).unwrap();
    let truth1 = generate_trajectory(&spec, 1).unwrap();
    let cfg = EkfConfig::default();
    let solver = LsEstimator::new(&transform, 0.02).unwrap();

    let mut total = 0.0;
    let mut count = 0usize;
    let runs = 25;
    for run in 0..runs {
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + run);
        let mut draw3 = |s: f64| Vector3::from_fn(|_, _| { let z: f64 = StandardNormal.sample(&mut rng); s * z });
        let imu_errors = ImuErrorSpec {
            accel_bias: draw3(cfg.init.accel_bias_std),
            gyro_bias: draw3(cfg.init.gyro_bias_std),
            accel_noise_std: 0.02,
            gyro_noise_std: 2e-4,
        };
        let imu = synthesize_imu(&truth100, &imu_errors, 2000 + run).unwrap();
        let beams = synthesize_beams(&truth1, &transform, &DvlErrorSpec::uniform_bias(0.0, 0.02), 3000 + run).unwrap();

        // Perturbed initial state per the prior.
        let dv = draw3(cfg.init.velocity_std);
        let eps = draw3(cfg.init.attitude_std_rad);
        let mut nav0 = NavState::from_truth(&truth100[0]);
        nav0.velocity_n += dv;
        nav0.attitude = UnitQuaternion::from_scaled_axis(-eps) * nav0.attitude;

        let mut engine = FusionEngine::new(nav0, &imu_errors, &cfg, &transform, 0.01).unwrap();
        let mut bidx = 0;
        let mut run_sum = 0.0;
        let mut run_n = 0;
        for k in 0..imu.len() {
            if bidx < beams.len() && (beams[bidx].time - imu[k].time).abs() < 1e-6 {
                let est = solver.solve(&beams[bidx].beams);
                engine.update(&est).unwrap();
                bidx += 1;
                // NEES against truth at this epoch
                let tr = &truth100[k];
                let e = error_against_truth(engine.nav(), &tr.velocity_n, &tr.attitude, &imu_errors.accel_bias, &imu_errors.gyro_bias);
                let p_inv = engine.filter().p.try_inverse().unwrap();
                let nees = (e.transpose() * p_inv * e)[(0,0)];
                run_sum += nees;
                run_n += 1;
            }
            if k + 1 < imu.len() {
                engine.propagate(&imu[k], imu[k+1].time - imu[k].time).unwrap();
            }
        }
        let run_mean = run_sum / run_n as f64;
        if run < 5 { println!("run {run}: mean NEES {run_mean:.3}"); }
        total += run_sum;
        count += run_n;
    }
    println!("overall mean NEES over {count} epochs x {runs} runs: {:.4} (target ~12)", total / count as f64);
}
