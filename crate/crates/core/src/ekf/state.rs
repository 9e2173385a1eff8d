//! Navigation and filter state containers.
//!
//! Error-state conventions used throughout the filter:
//! - `dv = v_hat - v_true` (velocity error of the estimate),
//! - misalignment `eps` defined by `C_hat = (I - [eps x]) C_true`,
//! - bias errors `db = b_true - b_hat` (truth minus estimate).
//!
//! With these signs the velocity error couples to the misalignment through
//! `+[f_n x]` and to the accelerometer bias error through `+C_b^n`, and the
//! misalignment drives from the gyro bias error through `-C_b^n`.

use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion, Vector3};

use crate::sim::{GroundTruthSample, ImuErrorSpec};

pub type Cov12 = SMatrix<f64, 12, 12>;
pub type Vec12 = SVector<f64, 12>;

/// Full navigation solution carried by the strapdown integrator. Position is
/// dead-reckoned for reporting only; the filter holds no position states.
#[derive(Debug, Clone)]
pub struct NavState {
    pub time: f64,
    pub velocity_n: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub accel_bias_est: Vector3<f64>,
    pub gyro_bias_est: Vector3<f64>,
    pub position: Vector3<f64>,
}

impl NavState {
    /// Initializes from a ground-truth sample with zero bias estimates.
    pub fn from_truth(sample: &GroundTruthSample) -> Self {
        Self {
            time: sample.time,
            velocity_n: sample.velocity_n,
            attitude: sample.attitude,
            accel_bias_est: Vector3::zeros(),
            gyro_bias_est: Vector3::zeros(),
            position: sample.position,
        }
    }
}

/// The 12-dimensional error state: velocity error, navigation-frame
/// misalignment, accelerometer and gyroscope bias errors. Reset to zero
/// after every injection (closed-loop correction).
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorState {
    pub dv_n: Vector3<f64>,
    pub epsilon_n: Vector3<f64>,
    pub db_a: Vector3<f64>,
    pub db_g: Vector3<f64>,
}

impl ErrorState {
    pub fn from_vector(x: &Vec12) -> Self {
        Self {
            dv_n: x.fixed_rows::<3>(0).into_owned(),
            epsilon_n: x.fixed_rows::<3>(3).into_owned(),
            db_a: x.fixed_rows::<3>(6).into_owned(),
            db_g: x.fixed_rows::<3>(9).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vec12 {
        let mut x = Vec12::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.dv_n);
        x.fixed_rows_mut::<3>(3).copy_from(&self.epsilon_n);
        x.fixed_rows_mut::<3>(6).copy_from(&self.db_a);
        x.fixed_rows_mut::<3>(9).copy_from(&self.db_g);
        x
    }
}

/// Covariance and process-noise state of the error-state filter.
#[derive(Debug, Clone)]
pub struct FilterState {
    /// 12x12 error covariance, re-symmetrized after every step.
    pub p: Cov12,
    /// Continuous-time process-noise PSD diagonal, ordered as the noise
    /// vector routed by G: accel noise, gyro noise, accel-bias walk,
    /// gyro-bias walk.
    pub q_c: Vec12,
    pub last_update_time: Option<f64>,
}

impl FilterState {
    pub fn new(p0: Cov12, q_c: Vec12) -> Self {
        Self { p: p0, q_c, last_update_time: None }
    }

    pub fn symmetrize(&mut self) {
        self.p = (self.p + self.p.transpose()) * 0.5;
    }

    /// Smallest eigenvalue of P; health checks require it above -1e-10.
    pub fn min_eigenvalue(&self) -> f64 {
        self.p.symmetric_eigenvalues().min()
    }
}

/// One-sigma initial uncertainties used to seed P.
#[derive(Debug, Clone)]
pub struct InitialUncertainty {
    pub velocity_std: f64,
    pub attitude_std_rad: f64,
    pub accel_bias_std: f64,
    pub gyro_bias_std: f64,
}

impl Default for InitialUncertainty {
    fn default() -> Self {
        Self {
            velocity_std: 0.1,
            attitude_std_rad: 1f64.to_radians(),
            accel_bias_std: 0.01,
            gyro_bias_std: 1e-4,
        }
    }
}

impl InitialUncertainty {
    pub fn p0(&self) -> Cov12 {
        let mut p = Cov12::zeros();
        for i in 0..3 {
            p[(i, i)] = self.velocity_std.powi(2);
            p[(3 + i, 3 + i)] = self.attitude_std_rad.powi(2);
            p[(6 + i, 6 + i)] = self.accel_bias_std.powi(2);
            p[(9 + i, 9 + i)] = self.gyro_bias_std.powi(2);
        }
        p
    }
}

/// Builds the continuous process-noise PSD diagonal from the IMU error
/// specification. Discrete per-sample noise of standard deviation `s` at
/// interval `tau` corresponds to a PSD of `s^2 tau`.
pub fn process_noise_psd(
    imu: &ImuErrorSpec,
    tau_imu: f64,
    accel_walk_psd: f64,
    gyro_walk_psd: f64,
) -> Vec12 {
    let mut q = Vec12::zeros();
    for i in 0..3 {
        q[i] = imu.accel_noise_std.powi(2) * tau_imu;
        q[3 + i] = imu.gyro_noise_std.powi(2) * tau_imu;
        q[6 + i] = accel_walk_psd;
        q[9 + i] = gyro_walk_psd;
    }
    q
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Error-state vector of the estimate against simulator truth, in the
/// filter's conventions. Used for NEES consistency checks.
pub fn error_against_truth(
    nav: &NavState,
    truth_velocity: &Vector3<f64>,
    truth_attitude: &UnitQuaternion<f64>,
    truth_accel_bias: &Vector3<f64>,
    truth_gyro_bias: &Vector3<f64>,
) -> Vec12 {
    // C_hat C_true' = I - [eps x]  =>  eps = -scaled_axis(q_hat q_true^-1)
    let q_err = nav.attitude * truth_attitude.inverse();
    let eps = -q_err.scaled_axis();
    ErrorState {
        dv_n: nav.velocity_n - truth_velocity,
        epsilon_n: eps,
        db_a: truth_accel_bias - nav.accel_bias_est,
        db_g: truth_gyro_bias - nav.gyro_bias_est,
    }
    .to_vector()
}
