//! Error-state covariance propagation and the DVL velocity update.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::ls::VelocityEstimate;

use super::state::{skew, Cov12, ErrorState, FilterState, NavState};

type H3x12 = SMatrix<f64, 3, 12>;
type K12x3 = SMatrix<f64, 12, 3>;

/// System matrix F and noise-routing matrix G for the current state.
///
/// Blocks (rows x cols, 3x3 each):
/// - d(dv)/d(eps)  = [f_n x]
/// - d(dv)/d(db_a) = C_b^n
/// - d(eps)/d(db_g) = -C_b^n
/// - bias rows are zero (random-walk dynamics).
///
/// G routes accel noise through C_b^n into velocity, gyro noise through
/// -C_b^n into misalignment, and the two bias walks directly.
pub fn build_system_matrices(nav: &NavState, f_n: &Vector3<f64>) -> (Cov12, Cov12) {
    let c = nav.attitude.to_rotation_matrix();
    let c = c.matrix();

    let mut f = Cov12::zeros();
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(f_n));
    f.fixed_view_mut::<3, 3>(0, 6).copy_from(c);
    f.fixed_view_mut::<3, 3>(3, 9).copy_from(&(-c));

    let mut g = Cov12::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(c);
    g.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-c));
    g.fixed_view_mut::<3, 3>(6, 6).copy_from(&Matrix3::identity());
    g.fixed_view_mut::<3, 3>(9, 9).copy_from(&Matrix3::identity());

    (f, g)
}

/// Propagates the error covariance over `tau`:
/// `Phi = I + F tau + (F tau)^2 / 2`, `P <- Phi P Phi' + G Qc G' tau`,
/// then re-symmetrization.
pub fn propagate_covariance(fs: &mut FilterState, f: &Cov12, g: &Cov12, tau: f64) {
    let f_tau = f * tau;
    let phi = Cov12::identity() + f_tau + f_tau * f_tau * 0.5;
    let q_d = g * Cov12::from_diagonal(&fs.q_c) * g.transpose() * tau;
    fs.p = phi * fs.p * phi.transpose() + q_d;
    fs.symmetrize();
}

/// Outcome of one measurement update.
#[derive(Debug, Clone)]
pub struct UpdateDiagnostics {
    /// Innovation `v_ins - C v_dvl` in the navigation frame, m/s.
    pub innovation: Vector3<f64>,
    /// Error-state estimate injected into the navigation state (and then
    /// reset to zero).
    pub error_state: ErrorState,
    /// Measurement covariance used, in the DVL frame.
    pub r_dvl: Matrix3<f64>,
    /// Condition number of the innovation covariance.
    pub innovation_condition: f64,
}

/// Applies one DVL velocity update.
///
/// The measurement is mapped to the navigation frame, `z = C v_dvl`, with
/// observation matrix `H = [I | -[v_ins x] | 0 | 0]`; the misalignment
/// coupling is what lets velocity updates observe yaw during maneuvers. The
/// correction is injected closed-loop: velocity and biases additively,
/// attitude through a small-angle quaternion, and the error mean is reset to
/// zero.
pub fn dvl_update(
    nav: &mut NavState,
    fs: &mut FilterState,
    estimate: &VelocityEstimate,
    r_dvl: &Matrix3<f64>,
    joseph_form: bool,
) -> Result<UpdateDiagnostics> {
    // Reject measurements whose covariance is not symmetric PSD.
    let sym_err = (r_dvl - r_dvl.transpose()).norm();
    let r_eigs = ((r_dvl + r_dvl.transpose()) * 0.5).symmetric_eigenvalues();
    if sym_err > 1e-9 || r_eigs.min() < -1e-12 {
        return Err(Error::numerical(format!(
            "measurement rejected: R not symmetric PSD (asymmetry {sym_err:e}, min eig {:e})",
            r_eigs.min()
        )));
    }

    let c = nav.attitude.to_rotation_matrix();
    let c = c.matrix();
    let z = c * estimate.velocity_dvl;
    let innovation = nav.velocity_n - z;

    let mut h = H3x12::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&nav.velocity_n)));

    let r_nav = c * r_dvl * c.transpose();
    let s = h * fs.p * h.transpose() + r_nav;
    let s_eigs = s.symmetric_eigenvalues();
    let condition = s_eigs.max() / s_eigs.min().max(f64::MIN_POSITIVE);
    let s_inv = s.try_inverse().ok_or_else(|| {
        Error::numerical(format!(
            "innovation covariance not invertible (condition number {condition:e})"
        ))
    })?;

    let k: K12x3 = fs.p * h.transpose() * s_inv;
    let dx = k * innovation;
    let error_state = ErrorState::from_vector(&dx);

    let i_kh = Cov12::identity() - k * h;
    fs.p = if joseph_form {
        i_kh * fs.p * i_kh.transpose() + k * r_nav * k.transpose()
    } else {
        i_kh * fs.p
    };
    fs.symmetrize();

    // Closed-loop injection; the error mean is zero afterwards.
    nav.velocity_n -= error_state.dv_n;
    nav.attitude = nalgebra::UnitQuaternion::from_scaled_axis(error_state.epsilon_n) * nav.attitude;
    nav.accel_bias_est += error_state.db_a;
    nav.gyro_bias_est += error_state.db_g;
    fs.last_update_time = Some(nav.time);

    Ok(UpdateDiagnostics { innovation, error_state, r_dvl: *r_dvl, innovation_condition: condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ekf::state::{InitialUncertainty, Vec12};
    use crate::ls::VelocitySource;
    use crate::GRAVITY;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn level_nav(velocity: Vector3<f64>) -> NavState {
        NavState {
            time: 10.0,
            velocity_n: velocity,
            attitude: UnitQuaternion::identity(),
            accel_bias_est: Vector3::zeros(),
            gyro_bias_est: Vector3::zeros(),
            position: Vector3::zeros(),
        }
    }

    fn filter_state() -> FilterState {
        FilterState::new(InitialUncertainty::default().p0(), Vec12::repeat(1e-9))
    }

    #[test]
    fn f_blocks_for_level_attitude() {
        let nav = level_nav(Vector3::zeros());
        let f_n = Vector3::new(0.0, 0.0, -GRAVITY);
        let (f, g) = build_system_matrices(&nav, &f_n);
        // Velocity-misalignment block is skew([0,0,-g]).
        assert_relative_eq!(f[(0, 4)], GRAVITY, epsilon = 1e-15);
        assert_relative_eq!(f[(1, 3)], -GRAVITY, epsilon = 1e-15);
        assert_relative_eq!(f[(0, 5)], 0.0, epsilon = 1e-15);
        // Velocity-accel-bias block is the identity at level attitude.
        assert_relative_eq!(f.fixed_view::<3, 3>(0, 6).into_owned(), Matrix3::identity(), epsilon = 1e-15);
        // Misalignment-gyro-bias block is -I.
        assert_relative_eq!(f.fixed_view::<3, 3>(3, 9).into_owned(), -Matrix3::identity(), epsilon = 1e-15);
        // Bias rows are zero dynamics.
        assert!(f.view((6, 0), (6, 12)).iter().all(|&v| v == 0.0));
        // G routes accel noise through the attitude.
        assert_relative_eq!(g.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn zero_f_propagation_adds_qd_exactly() {
        let mut fs = filter_state();
        let p_before = fs.p;
        let f = Cov12::zeros();
        let g = Cov12::identity();
        propagate_covariance(&mut fs, &f, &g, 0.5);
        let want = p_before + Cov12::from_diagonal(&fs.q_c) * 0.5;
        assert_relative_eq!(fs.p, want, epsilon = 1e-15);
    }

    #[test]
    fn propagation_matches_dense_oracle() {
        let nav = level_nav(Vector3::new(1.2, -0.3, 0.1));
        let f_n = Vector3::new(0.05, -0.02, -GRAVITY);
        let (f, g) = build_system_matrices(&nav, &f_n);
        let mut fs = filter_state();
        let p0 = fs.p;
        let tau = 0.01;
        propagate_covariance(&mut fs, &f, &g, tau);

        let f_tau = f * tau;
        let phi = Cov12::identity() + f_tau + f_tau * f_tau * 0.5;
        let want = phi * p0 * phi.transpose() + g * Cov12::from_diagonal(&fs.q_c) * g.transpose() * tau;
        let want = (want + want.transpose()) * 0.5;
        assert_relative_eq!(fs.p, want, epsilon = 1e-14);
    }

    #[test]
    fn zero_innovation_leaves_state_but_shrinks_p() {
        let v = Vector3::new(1.0, 0.5, -0.1);
        let mut nav = level_nav(v);
        let mut fs = filter_state();
        let p_before = fs.p;
        let est = VelocityEstimate {
            velocity_dvl: v, // identity attitude: measurement equals INS velocity
            covariance: Matrix3::identity() * 4e-4,
            source: VelocitySource::Ls,
        };
        let r = est.covariance;
        let diag = dvl_update(&mut nav, &mut fs, &est, &r, true).unwrap();
        assert_relative_eq!(diag.innovation, Vector3::zeros(), epsilon = 1e-15);
        assert_relative_eq!(nav.velocity_n, v, epsilon = 1e-15);
        for i in 0..3 {
            assert!(fs.p[(i, i)] < p_before[(i, i)], "velocity variance did not shrink");
        }
    }

    #[test]
    fn scalar_gain_sanity() {
        // With H = [I 0 ...], P_vel = p I and R = r I the velocity gain is
        // p / (p + r) on each axis.
        let v = Vector3::zeros(); // zero velocity kills the misalignment coupling
        let mut nav = level_nav(v);
        let p = 0.04;
        let r = 0.01;
        let mut fs = FilterState::new(Cov12::identity() * p, Vec12::zeros());
        let est = VelocityEstimate {
            velocity_dvl: Vector3::new(0.1, -0.2, 0.05),
            covariance: Matrix3::identity() * r,
            source: VelocitySource::Ls,
        };
        let r_m = est.covariance;
        let diag = dvl_update(&mut nav, &mut fs, &est, &r_m, false).unwrap();
        let gain = p / (p + r);
        // dx = K dz with dz = -z here (v_ins = 0).
        let want = -gain * est.velocity_dvl;
        assert_relative_eq!(Vector3::from(diag.error_state.dv_n), want, epsilon = 1e-12);
        // Posterior velocity variance = (1 - gain) p.
        assert_relative_eq!(fs.p[(0, 0)], (1.0 - gain) * p, epsilon = 1e-12);
    }

    #[test]
    fn joseph_and_standard_forms_agree_when_well_conditioned() {
        let v = Vector3::new(0.8, 0.1, 0.0);
        let est = VelocityEstimate {
            velocity_dvl: Vector3::new(0.82, 0.08, 0.01),
            covariance: Matrix3::identity() * 4e-4,
            source: VelocitySource::Ls,
        };
        let r = est.covariance;
        let mut nav_a = level_nav(v);
        let mut fs_a = filter_state();
        dvl_update(&mut nav_a, &mut fs_a, &est, &r, true).unwrap();
        let mut nav_b = level_nav(v);
        let mut fs_b = filter_state();
        dvl_update(&mut nav_b, &mut fs_b, &est, &r, false).unwrap();
        assert!((fs_a.p - fs_b.p).norm() < 1e-8);
        assert_relative_eq!(nav_a.velocity_n, nav_b.velocity_n, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_r_equal_to_constant_is_bit_identical() {
        // Feeding the constant-R matrix through the adaptive path reproduces
        // the non-adaptive update exactly.
        let v = Vector3::new(1.0, -0.4, 0.2);
        let r_const = Matrix3::identity() * 4e-4;
        let est_adaptive = VelocityEstimate {
            velocity_dvl: Vector3::new(1.01, -0.42, 0.18),
            covariance: r_const,
            source: VelocitySource::Mogpr,
        };
        let mut nav_a = level_nav(v);
        let mut fs_a = filter_state();
        dvl_update(&mut nav_a, &mut fs_a, &est_adaptive, &est_adaptive.covariance.clone(), true).unwrap();

        let mut nav_b = level_nav(v);
        let mut fs_b = filter_state();
        dvl_update(&mut nav_b, &mut fs_b, &est_adaptive, &r_const, true).unwrap();

        assert_eq!(nav_a.velocity_n, nav_b.velocity_n);
        assert_eq!(fs_a.p, fs_b.p);
    }

    #[test]
    fn non_psd_r_is_rejected() {
        let mut nav = level_nav(Vector3::zeros());
        let mut fs = filter_state();
        let est = VelocityEstimate {
            velocity_dvl: Vector3::zeros(),
            covariance: Matrix3::identity(),
            source: VelocitySource::External,
        };
        let bad = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(dvl_update(&mut nav, &mut fs, &est, &bad, true).is_err());
    }

    #[test]
    fn monotone_in_measurement_noise() {
        // If R_a <= R_b (PSD order), the posterior velocity covariance under
        // R_a is <= the one under R_b.
        let v = Vector3::new(0.5, 0.2, -0.1);
        let est = VelocityEstimate {
            velocity_dvl: v,
            covariance: Matrix3::identity(),
            source: VelocitySource::Ls,
        };
        let r_a = Matrix3::identity() * 1e-4;
        let r_b = Matrix3::identity() * 9e-4;
        let mut nav_a = level_nav(v);
        let mut fs_a = filter_state();
        dvl_update(&mut nav_a, &mut fs_a, &est, &r_a, true).unwrap();
        let mut nav_b = level_nav(v);
        let mut fs_b = filter_state();
        dvl_update(&mut nav_b, &mut fs_b, &est, &r_b, true).unwrap();
        let diff = (fs_b.p - fs_a.p).fixed_view::<3, 3>(0, 0).into_owned();
        let eigs = diff.symmetric_eigenvalues();
        assert!(eigs.min() >= -1e-12, "posterior order violated: {}", eigs.min());
    }
}
