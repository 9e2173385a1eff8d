//! DVL beam geometry: Janus-configured beam directions and the 4x3 matrix
//! mapping sensor-frame velocity to along-beam velocities.

use nalgebra::{Matrix3, Matrix3x4, Matrix4x3, Vector3, Vector4};

use crate::error::{Error, Result};

/// Default beam pitch angle in degrees. Manufacturers fix the pitch per unit;
/// every experiment records the value actually used.
pub const DEFAULT_PITCH_DEG: f64 = 20.0;

/// Yaw angle of beam `i` (1-based) in the Janus "x" arrangement:
/// 45, 135, 225, 315 degrees.
pub fn janus_yaw(index: usize) -> f64 {
    debug_assert!((1..=4).contains(&index));
    ((index as f64 - 1.0) * 90.0 + 45.0).to_radians()
}

/// Direction of beam `index` (1-based) at the given pitch angle, using the
/// Janus yaw pattern. The returned vector is unit norm.
pub fn beam_direction(index: usize, pitch: f64) -> Result<Vector3<f64>> {
    if !(1..=4).contains(&index) {
        return Err(Error::config(format!("beam index {index} out of range 1..4")));
    }
    check_pitch(pitch)?;
    let psi = janus_yaw(index);
    Ok(direction(psi, pitch))
}

fn direction(yaw: f64, pitch: f64) -> Vector3<f64> {
    Vector3::new(
        yaw.cos() * pitch.sin(),
        yaw.sin() * pitch.sin(),
        pitch.cos(),
    )
}

fn check_pitch(pitch: f64) -> Result<()> {
    if !pitch.is_finite() || pitch <= 0.0 || pitch >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::config(format!(
            "beam pitch angle must lie in (0, pi/2) rad, got {pitch}"
        )));
    }
    Ok(())
}

/// Transducer arrangement of a four-beam DVL: one pitch angle shared by all
/// beams plus a yaw angle per beam. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry {
    pitch: f64,
    yaws: [f64; 4],
}

impl BeamGeometry {
    /// Janus arrangement at the given pitch angle (radians).
    pub fn janus(pitch: f64) -> Result<Self> {
        check_pitch(pitch)?;
        Ok(Self {
            pitch,
            yaws: [janus_yaw(1), janus_yaw(2), janus_yaw(3), janus_yaw(4)],
        })
    }

    /// Arrangement with explicit per-beam yaw angles (radians).
    pub fn with_yaws(pitch: f64, yaws: [f64; 4]) -> Result<Self> {
        check_pitch(pitch)?;
        if yaws.iter().any(|y| !y.is_finite()) {
            return Err(Error::config("beam yaw angles must be finite"));
        }
        Ok(Self { pitch, yaws })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn yaws(&self) -> &[f64; 4] {
        &self.yaws
    }

    pub const fn beam_count(&self) -> usize {
        4
    }

    /// Unit direction of beam `index` (1-based).
    pub fn beam_direction(&self, index: usize) -> Result<Vector3<f64>> {
        if !(1..=4).contains(&index) {
            return Err(Error::config(format!("beam index {index} out of range 1..4")));
        }
        Ok(direction(self.yaws[index - 1], self.pitch))
    }
}

/// The 4x3 matrix whose rows are the beam directions; maps DVL-frame velocity
/// to along-beam velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    rows: Matrix4x3<f64>,
}

/// Builds the beam transformation matrix for the given geometry.
pub fn build_transform(geometry: &BeamGeometry) -> TransformMatrix {
    let mut rows = Matrix4x3::zeros();
    for i in 0..4 {
        let b = direction(geometry.yaws[i], geometry.pitch);
        rows.set_row(i, &b.transpose());
    }
    TransformMatrix { rows }
}

impl TransformMatrix {
    pub fn matrix(&self) -> &Matrix4x3<f64> {
        &self.rows
    }

    /// Along-beam velocities for a DVL-frame velocity.
    pub fn apply(&self, velocity_dvl: &Vector3<f64>) -> Vector4<f64> {
        self.rows * velocity_dvl
    }

    /// The 3x3 normal matrix `T' T`. Diagonal for the Janus yaw pattern.
    pub fn normal_matrix(&self) -> Matrix3<f64> {
        self.rows.transpose() * self.rows
    }

    /// Left pseudo-inverse `(T' T)^-1 T'`. Errors if the normal matrix is
    /// singular, which cannot happen for a valid geometry but is guarded.
    pub fn pseudo_inverse(&self) -> Result<Matrix3x4<f64>> {
        let nm = self.normal_matrix();
        let inv = nm
            .try_inverse()
            .ok_or_else(|| Error::numerical("beam transformation matrix is rank-deficient"))?;
        Ok(inv * self.rows.transpose())
    }
}
