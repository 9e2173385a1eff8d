//! Loosely coupled fusion loop: strapdown propagation at the IMU rate with
//! DVL velocity updates from a pluggable front-end (least squares, the GP
//! regressor, or externally supplied estimates).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::TransformMatrix;
use crate::gpr::GpModel;
use crate::ls::{LsEstimator, VelocityEstimate, VelocitySource};
use crate::sim::{BeamSample, ImuErrorSpec, ImuSample};

use super::filter::{build_system_matrices, dvl_update, propagate_covariance, UpdateDiagnostics};
use super::state::{process_noise_psd, FilterState, InitialUncertainty, NavState};
use super::strapdown::strapdown_step;

/// Filter configuration, mirroring the `[ekf]` config block.
#[derive(Debug, Clone)]
pub struct EkfConfig {
    /// Use the front-end's per-sample covariance as measurement noise.
    pub adaptive_r: bool,
    /// Beam noise standard deviation behind the constant-R fallback.
    pub constant_r_std_mps: f64,
    /// Shape of the constant R: `sigma^2 (T'T)^-1` (the least-squares
    /// estimator covariance) when true, isotropic `sigma^2 I` otherwise.
    pub constant_r_ls_shaped: bool,
    pub joseph_form: bool,
    pub init: InitialUncertainty,
    /// Continuous PSDs of the modeled bias random walks.
    pub accel_walk_psd: f64,
    pub gyro_walk_psd: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            adaptive_r: false,
            constant_r_std_mps: 0.02,
            constant_r_ls_shaped: true,
            joseph_form: true,
            init: InitialUncertainty::default(),
            accel_walk_psd: 1e-12,
            gyro_walk_psd: 1e-14,
        }
    }
}

/// Sequential filter runner: one instance owns one run's state.
#[derive(Debug, Clone)]
pub struct FusionEngine {
    nav: NavState,
    filter: FilterState,
    adaptive_r: bool,
    constant_r_dvl: Matrix3<f64>,
    joseph_form: bool,
}

impl FusionEngine {
    pub fn new(
        initial_nav: NavState,
        imu_errors: &ImuErrorSpec,
        config: &EkfConfig,
        transform: &TransformMatrix,
        tau_imu: f64,
    ) -> Result<Self> {
        let q_c = process_noise_psd(imu_errors, tau_imu, config.accel_walk_psd, config.gyro_walk_psd);
        let sigma2 = config.constant_r_std_mps.powi(2);
        let constant_r_dvl = if config.constant_r_ls_shaped {
            sigma2
                * transform
                    .normal_matrix()
                    .try_inverse()
                    .ok_or_else(|| Error::numerical("beam matrix not invertible for constant R"))?
        } else {
            Matrix3::identity() * sigma2
        };
        Ok(Self {
            nav: initial_nav,
            filter: FilterState::new(config.init.p0(), q_c),
            adaptive_r: config.adaptive_r,
            constant_r_dvl,
            joseph_form: config.joseph_form,
        })
    }

    pub fn nav(&self) -> &NavState {
        &self.nav
    }

    pub fn filter(&self) -> &FilterState {
        &self.filter
    }

    pub fn constant_r_dvl(&self) -> &Matrix3<f64> {
        &self.constant_r_dvl
    }

    /// One strapdown + covariance propagation step over `tau`. The system
    /// matrices are linearized at the pre-step state.
    pub fn propagate(&mut self, imu: &ImuSample, tau: f64) -> Result<()> {
        let f_b = imu.accel - self.nav.accel_bias_est;
        let f_n = self.nav.attitude.transform_vector(&f_b);
        let (f, g) = build_system_matrices(&self.nav, &f_n);
        strapdown_step(&mut self.nav, imu, tau)?;
        propagate_covariance(&mut self.filter, &f, &g, tau);
        Ok(())
    }

    /// One DVL measurement update; R comes from the estimate when running
    /// adaptively, from the configured constant otherwise.
    pub fn update(&mut self, estimate: &VelocityEstimate) -> Result<UpdateDiagnostics> {
        let r_dvl = if self.adaptive_r { estimate.covariance } else { self.constant_r_dvl };
        dvl_update(&mut self.nav, &mut self.filter, estimate, &r_dvl, self.joseph_form)
    }
}

/// Externally produced velocity estimate (replayed from CSV).
#[derive(Debug, Clone)]
pub struct ExternalVelocity {
    pub time: f64,
    pub velocity_dvl: Vector3<f64>,
    /// Diagonal of the reported measurement covariance.
    pub r_diag: Vector3<f64>,
}

/// Velocity estimator plugged in at DVL epochs.
pub enum Frontend<'a> {
    Ls(&'a LsEstimator),
    Mogpr(&'a GpModel),
    External(&'a [ExternalVelocity]),
}

impl Frontend<'_> {
    pub fn estimate(&self, beams: &BeamSample) -> Result<VelocityEstimate> {
        match self {
            Frontend::Ls(solver) => Ok(solver.solve(&beams.beams)),
            Frontend::Mogpr(model) => {
                let x = [beams.beams[0], beams.beams[1], beams.beams[2], beams.beams[3]];
                let p = model.predict(&x);
                Ok(VelocityEstimate {
                    velocity_dvl: p.mean,
                    covariance: p.covariance,
                    source: VelocitySource::Mogpr,
                })
            }
            Frontend::External(rows) => {
                let idx = rows
                    .binary_search_by(|r| {
                        r.time.partial_cmp(&beams.time).expect("finite times")
                    })
                    .or_else(|_| {
                        rows.iter()
                            .position(|r| (r.time - beams.time).abs() < 1e-6)
                            .ok_or(())
                    })
                    .map_err(|_| {
                        Error::input(format!(
                            "external velocity stream has no row at t = {}",
                            beams.time
                        ))
                    })?;
                let r = &rows[idx];
                Ok(VelocityEstimate {
                    velocity_dvl: r.velocity_dvl,
                    covariance: Matrix3::from_diagonal(&r.r_diag),
                    source: VelocitySource::External,
                })
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Frontend::Ls(_) => "ls",
            Frontend::Mogpr(_) => "mogpr",
            Frontend::External(_) => "external",
        }
    }
}

/// Per-epoch record of a fusion run (one row per IMU epoch).
#[derive(Debug, Clone)]
pub struct NavLogRow {
    pub time: f64,
    pub velocity_n: Vector3<f64>,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    /// Velocity block of the P diagonal, (m/s)^2.
    pub p_vel: Vector3<f64>,
    /// Attitude block of the P diagonal, rad^2.
    pub p_att: Vector3<f64>,
    /// Innovation at this epoch (zero when no update ran).
    pub innovation: Vector3<f64>,
    /// Diagonal of the DVL-frame measurement covariance used (zero when no
    /// update ran).
    pub r_diag: Vector3<f64>,
    pub updated: bool,
}

impl NavLogRow {
    fn capture(nav: &NavState, fs: &FilterState, update: Option<&UpdateDiagnostics>) -> Self {
        let (roll, pitch, yaw) = nav.attitude.euler_angles();
        Self {
            time: nav.time,
            velocity_n: nav.velocity_n,
            roll_deg: roll.to_degrees(),
            pitch_deg: pitch.to_degrees(),
            yaw_deg: yaw.to_degrees(),
            p_vel: Vector3::new(fs.p[(0, 0)], fs.p[(1, 1)], fs.p[(2, 2)]),
            p_att: Vector3::new(fs.p[(3, 3)], fs.p[(4, 4)], fs.p[(5, 5)]),
            innovation: update.map_or_else(Vector3::zeros, |d| d.innovation),
            r_diag: update.map_or_else(Vector3::zeros, |d| {
                Vector3::new(d.r_dvl[(0, 0)], d.r_dvl[(1, 1)], d.r_dvl[(2, 2)])
            }),
            updated: update.is_some(),
        }
    }
}

/// Everything a fusion run needs besides the streams.
#[derive(Debug, Clone)]
pub struct FusionSetup {
    pub initial_nav: NavState,
    pub imu_errors: ImuErrorSpec,
    pub ekf: EkfConfig,
    pub transform: TransformMatrix,
}

/// Runs the full loosely coupled pipeline: propagate at the IMU rate, update
/// at every beam epoch. Produces one log row per IMU epoch; rows at beam
/// epochs carry the update diagnostics. Fully deterministic given inputs.
pub fn run_fusion(
    imu: &[ImuSample],
    beams: &[BeamSample],
    frontend: &Frontend,
    setup: &FusionSetup,
) -> Result<Vec<NavLogRow>> {
    if imu.len() < 2 {
        return Err(Error::input("IMU stream needs at least two epochs"));
    }
    let tau_nominal = imu[1].time - imu[0].time;
    let mut engine =
        FusionEngine::new(setup.initial_nav.clone(), &setup.imu_errors, &setup.ekf, &setup.transform, tau_nominal)?;

    let mut rows = Vec::with_capacity(imu.len());
    let mut beam_idx = 0;
    for k in 0..imu.len() {
        let t = imu[k].time;
        if k > 0 && t <= imu[k - 1].time {
            return Err(Error::input(format!("IMU time regression at t = {t}")));
        }
        if beam_idx < beams.len() && beams[beam_idx].time < t - 1e-6 {
            return Err(Error::input(format!(
                "beam epoch {} does not coincide with any IMU epoch",
                beams[beam_idx].time
            )));
        }
        let mut update = None;
        if beam_idx < beams.len() && (beams[beam_idx].time - t).abs() <= 1e-6 {
            if beam_idx > 0 && beams[beam_idx].time <= beams[beam_idx - 1].time {
                return Err(Error::input(format!("beam time regression at t = {t}")));
            }
            let estimate = frontend.estimate(&beams[beam_idx])?;
            update = Some(engine.update(&estimate)?);
            beam_idx += 1;
        }
        rows.push(NavLogRow::capture(engine.nav(), engine.filter(), update.as_ref()));
        if k + 1 < imu.len() {
            engine.propagate(&imu[k], imu[k + 1].time - t)?;
        }
    }
    if beam_idx < beams.len() {
        return Err(Error::input(format!(
            "{} beam epochs lie beyond the IMU stream",
            beams.len() - beam_idx
        )));
    }
    Ok(rows)
}
