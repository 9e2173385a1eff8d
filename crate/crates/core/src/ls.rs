//! Least-squares DVL velocity estimation: inverts four along-beam
//! measurements to a sensor-frame velocity via the pseudo-inverse of the
//! beam transformation matrix.

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::TransformMatrix;

/// Origin of a velocity estimate fed to the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocitySource {
    Ls,
    Mogpr,
    External,
}

/// DVL-frame velocity plus its 3x3 covariance. The covariance is constant
/// for the least-squares front-end and varies per sample for the GP one.
#[derive(Debug, Clone)]
pub struct VelocityEstimate {
    pub velocity_dvl: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub source: VelocitySource,
}

/// Least-squares solver backed by a thin QR factorization of the beam
/// transformation matrix. The normal-equations form `(T'T)^-1 T'` is kept
/// only as a test oracle.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    q: Matrix4x3<f64>,
    r_inv: Matrix3<f64>,
    covariance: Matrix3<f64>,
    noise_std: f64,
}

impl LsEstimator {
    /// Builds the solver for a beam matrix and a per-beam noise standard
    /// deviation (used only to report the estimate covariance).
    pub fn new(transform: &TransformMatrix, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::config(format!(
                "beam noise std must be finite and non-negative, got {noise_std}"
            )));
        }
        let qr = transform.matrix().qr();
        let q = qr.q();
        let r = qr.r();
        // Guard against rank deficiency; impossible for a valid geometry.
        let min_diag = (0..3).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if min_diag < 1e-12 {
            return Err(Error::numerical(
                "beam transformation matrix is rank-deficient; cannot solve for velocity",
            ));
        }
        let r_inv = r
            .try_inverse()
            .ok_or_else(|| Error::numerical("triangular factor not invertible"))?;
        // cov = sigma^2 (T'T)^-1 = sigma^2 R^-1 R^-T
        let covariance = noise_std.powi(2) * (r_inv * r_inv.transpose());
        Ok(Self { q, r_inv, covariance, noise_std })
    }

    /// Solves `min ||beams - T v||` for the DVL-frame velocity.
    pub fn solve(&self, beams: &Vector4<f64>) -> VelocityEstimate {
        let velocity_dvl = self.r_inv * (self.q.transpose() * beams);
        VelocityEstimate {
            velocity_dvl,
            covariance: self.covariance,
            source: VelocitySource::Ls,
        }
    }

    /// Constant covariance reported with every estimate.
    pub fn covariance(&self) -> &Matrix3<f64> {
        &self.covariance
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

/// One-shot least-squares solution; prefer [`LsEstimator`] in loops.
pub fn solve_ls(
    transform: &TransformMatrix,
    beams: &Vector4<f64>,
    noise_std: f64,
) -> Result<VelocityEstimate> {
    Ok(LsEstimator::new(transform, noise_std)?.solve(beams))
}
