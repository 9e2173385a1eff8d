//! Strapdown mechanization in the local NED frame: quaternion attitude
//! integration and velocity/position dead-reckoning from bias-corrected IMU
//! samples. Earth rotation and transport rate are omitted (short missions,
//! local frame).

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::sim::ImuSample;
use crate::GRAVITY;

use super::state::NavState;

/// Advances the navigation state by one IMU interval `tau`.
///
/// Attitude integrates the bias-corrected gyro through the quaternion
/// exponential; the specific force is rotated with the average of the old
/// and new attitude before gravity is restored; position uses trapezoidal
/// velocity integration.
pub fn strapdown_step(nav: &mut NavState, imu: &ImuSample, tau: f64) -> Result<()> {
    if !(imu.accel.iter().all(|v| v.is_finite()) && imu.gyro.iter().all(|v| v.is_finite())) {
        return Err(Error::numerical(format!(
            "non-finite IMU sample at t = {}",
            imu.time
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::numerical(format!("invalid propagation interval {tau}")));
    }

    let omega = imu.gyro - nav.gyro_bias_est;
    let force_b = imu.accel - nav.accel_bias_est;

    let q_old = nav.attitude;
    let q_new = UnitQuaternion::new_normalize(
        (q_old * UnitQuaternion::from_scaled_axis(omega * tau)).into_inner(),
    );

    let f_n = 0.5 * (q_old.transform_vector(&force_b) + q_new.transform_vector(&force_b));
    let gravity_n = Vector3::new(0.0, 0.0, GRAVITY);

    let v_old = nav.velocity_n;
    nav.velocity_n += (f_n + gravity_n) * tau;
    nav.position += 0.5 * (v_old + nav.velocity_n) * tau;
    nav.attitude = q_new;
    nav.time += tau;
    Ok(())
}
