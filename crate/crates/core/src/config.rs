//! Experiment configuration file.
//!
//! The config is a sectioned key-value text file (TOML grammar: sections in
//! brackets, `key = value` lines) chosen for diffability and hand-editing.
//! See `ExperimentConfig` for the section layout and defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ekf::{EkfConfig, InitialUncertainty};
use crate::error::{Error, Result};
use crate::geometry::{BeamGeometry, DEFAULT_PITCH_DEG};
use crate::gpr::OptimizerConfig;
use crate::sim::{DvlErrorSpec, ImuErrorSpec, TrajectoryPattern, TrajectorySpec};

/// Top-level experiment configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Beam-bias sweep levels (m/s), strictly increasing, non-negative.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub dvl_errors: DvlErrorConfig,
    #[serde(default)]
    pub imu_errors: ImuErrorConfig,
    #[serde(default)]
    pub gpr: GprConfig,
    #[serde(default)]
    pub ekf: EkfSection,
    #[serde(default)]
    pub protocol: ProtocolConfig,
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_sweep() -> Vec<f64> {
    vec![0.001, 0.003, 0.005, 0.007, 0.009, 0.011]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("config parse error in {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::config("sweep must contain at least one bias level"));
        }
        for w in self.sweep.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::config("sweep values must be strictly increasing"));
            }
        }
        if self.sweep[0] < 0.0 {
            return Err(Error::config("sweep values must be non-negative"));
        }
        self.geometry.build()?;
        Ok(())
    }
}

/// `[geometry]` block.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_pitch_deg")]
    pub pitch_deg: f64,
    /// Optional explicit yaw angles, overriding the Janus pattern.
    #[serde(default)]
    pub yaw_deg: Option<[f64; 4]>,
}

fn default_pitch_deg() -> f64 {
    DEFAULT_PITCH_DEG
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { pitch_deg: DEFAULT_PITCH_DEG, yaw_deg: None }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<BeamGeometry> {
        let pitch = self.pitch_deg.to_radians();
        match self.yaw_deg {
            Some(yaws) => BeamGeometry::with_yaws(pitch, yaws.map(f64::to_radians)),
            None => BeamGeometry::janus(pitch),
        }
    }
}

/// `[sim]` block: the test-trajectory shape.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_pattern")]
    pub pattern: String,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    #[serde(default = "default_turn_rate")]
    pub turn_rate_dps: f64,
    /// Optional explicit trajectory seed; derived from the master seed when
    /// absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_pattern() -> String {
    "mixed".into()
}
fn default_duration() -> f64 {
    600.0
}
fn default_speed() -> f64 {
    1.5
}
fn default_turn_rate() -> f64 {
    3.0
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pattern: default_pattern(),
            duration_s: default_duration(),
            speed_mps: default_speed(),
            turn_rate_dps: default_turn_rate(),
            seed: None,
        }
    }
}

impl SimConfig {
    pub fn spec(&self, seed: u64) -> Result<TrajectorySpec> {
        let pattern: TrajectoryPattern = self.pattern.parse()?;
        Ok(TrajectorySpec::new(pattern, self.duration_s, self.speed_mps)
            .with_turn_rate(self.turn_rate_dps.to_radians())
            .with_seed(self.seed.unwrap_or(seed)))
    }
}

/// Scalar bias replicated to the four beams, or explicit per-beam values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BiasSpec {
    Uniform(f64),
    PerBeam([f64; 4]),
}

impl BiasSpec {
    pub fn to_vector(&self) -> nalgebra::Vector4<f64> {
        match self {
            BiasSpec::Uniform(b) => nalgebra::Vector4::repeat(*b),
            BiasSpec::PerBeam(b) => nalgebra::Vector4::from_row_slice(b),
        }
    }
}

/// `[dvl_errors]` block.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvlErrorConfig {
    #[serde(default = "default_bias")]
    pub bias_mps: BiasSpec,
    #[serde(default)]
    pub scale: [f64; 3],
    #[serde(default = "default_dvl_noise")]
    pub noise_std_mps: f64,
}

fn default_bias() -> BiasSpec {
    BiasSpec::Uniform(0.0)
}
fn default_dvl_noise() -> f64 {
    0.02
}

impl Default for DvlErrorConfig {
    fn default() -> Self {
        Self { bias_mps: default_bias(), scale: [0.0; 3], noise_std_mps: default_dvl_noise() }
    }
}

impl DvlErrorConfig {
    pub fn spec(&self) -> DvlErrorSpec {
        DvlErrorSpec {
            beam_bias: self.bias_mps.to_vector(),
            scale: nalgebra::Vector3::from_row_slice(&self.scale),
            noise_std: self.noise_std_mps,
        }
    }

    /// Same errors with the bias set from a sweep level. A scalar
    /// `bias_mps` yields identical per-beam biases equal to the level; an
    /// array acts as per-beam multipliers on the level, which is how
    /// per-beam-distinct sweeps are expressed.
    pub fn spec_with_bias(&self, bias: f64) -> DvlErrorSpec {
        let beam_bias = match &self.bias_mps {
            BiasSpec::Uniform(_) => nalgebra::Vector4::repeat(bias),
            BiasSpec::PerBeam(pattern) => {
                bias * nalgebra::Vector4::from_row_slice(pattern)
            }
        };
        DvlErrorSpec {
            beam_bias,
            scale: nalgebra::Vector3::from_row_slice(&self.scale),
            noise_std: self.noise_std_mps,
        }
    }
}

/// `[imu_errors]` block.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuErrorConfig {
    #[serde(default)]
    pub accel_bias: [f64; 3],
    #[serde(default)]
    pub gyro_bias: [f64; 3],
    #[serde(default = "default_accel_noise")]
    pub accel_noise_std: f64,
    #[serde(default = "default_gyro_noise")]
    pub gyro_noise_std: f64,
}

fn default_accel_noise() -> f64 {
    0.02
}
fn default_gyro_noise() -> f64 {
    2e-4
}

impl Default for ImuErrorConfig {
    fn default() -> Self {
        Self {
            accel_bias: [0.0; 3],
            gyro_bias: [0.0; 3],
            accel_noise_std: default_accel_noise(),
            gyro_noise_std: default_gyro_noise(),
        }
    }
}

impl ImuErrorConfig {
    pub fn spec(&self) -> ImuErrorSpec {
        ImuErrorSpec {
            accel_bias: nalgebra::Vector3::from_row_slice(&self.accel_bias),
            gyro_bias: nalgebra::Vector3::from_row_slice(&self.gyro_bias),
            accel_noise_std: self.accel_noise_std,
            gyro_noise_std: self.gyro_noise_std,
        }
    }
}

/// `[gpr]` block.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GprConfig {
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_init_noise")]
    pub init_noise_std: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_max_points() -> usize {
    2000
}
fn default_iterations() -> usize {
    50
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_init_noise() -> f64 {
    0.02
}

impl Default for GprConfig {
    fn default() -> Self {
        Self {
            max_points: default_max_points(),
            iterations: default_iterations(),
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            init_noise_std: default_init_noise(),
            seed: None,
        }
    }
}

impl GprConfig {
    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            iterations: self.iterations,
            epsilon: 1e-8,
        }
    }
}

/// `[ekf]` block.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EkfSection {
    #[serde(default)]
    pub adaptive_r: bool,
    #[serde(default = "default_constant_r_std")]
    pub constant_r_std_mps: f64,
    /// Shape of the constant R: "ls" for sigma^2 (T'T)^-1, "isotropic" for
    /// sigma^2 I.
    #[serde(default = "default_constant_r_shape")]
    pub constant_r_shape: String,
    #[serde(default = "default_true")]
    pub joseph_form: bool,
    #[serde(default = "default_init_velocity_std")]
    pub init_velocity_std: f64,
    #[serde(default = "default_init_attitude_deg")]
    pub init_attitude_deg: f64,
    #[serde(default = "default_init_accel_bias_std")]
    pub init_accel_bias_std: f64,
    #[serde(default = "default_init_gyro_bias_std")]
    pub init_gyro_bias_std: f64,
    /// When set, the initial navigation state is perturbed from truth by a
    /// draw from the initial-uncertainty priors with this seed.
    #[serde(default)]
    pub init_perturbation_seed: Option<u64>,
}

fn default_constant_r_std() -> f64 {
    0.02
}
fn default_constant_r_shape() -> String {
    "ls".into()
}
fn default_true() -> bool {
    true
}
fn default_init_velocity_std() -> f64 {
    0.1
}
fn default_init_attitude_deg() -> f64 {
    1.0
}
fn default_init_accel_bias_std() -> f64 {
    0.01
}
fn default_init_gyro_bias_std() -> f64 {
    1e-4
}

impl Default for EkfSection {
    fn default() -> Self {
        Self {
            adaptive_r: false,
            constant_r_std_mps: default_constant_r_std(),
            constant_r_shape: default_constant_r_shape(),
            joseph_form: true,
            init_velocity_std: default_init_velocity_std(),
            init_attitude_deg: default_init_attitude_deg(),
            init_accel_bias_std: default_init_accel_bias_std(),
            init_gyro_bias_std: default_init_gyro_bias_std(),
            init_perturbation_seed: None,
        }
    }
}

impl EkfSection {
    pub fn build(&self, adaptive_r: bool) -> Result<EkfConfig> {
        let ls_shaped = match self.constant_r_shape.as_str() {
            "ls" => true,
            "isotropic" => false,
            other => {
                return Err(Error::config(format!(
                    "unknown constant_r_shape '{other}' (expected 'ls' or 'isotropic')"
                )))
            }
        };
        Ok(EkfConfig {
            adaptive_r,
            constant_r_std_mps: self.constant_r_std_mps,
            constant_r_ls_shaped: ls_shaped,
            joseph_form: self.joseph_form,
            init: InitialUncertainty {
                velocity_std: self.init_velocity_std,
                attitude_std_rad: self.init_attitude_deg.to_radians(),
                accel_bias_std: self.init_accel_bias_std,
                gyro_bias_std: self.init_gyro_bias_std,
            },
            ..EkfConfig::default()
        })
    }
}

/// `[protocol]` block: how many trajectories the sweep generates and how
/// they split into training and test sets.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "default_train_trajectories")]
    pub train_trajectories: usize,
    #[serde(default = "default_test_trajectories")]
    pub test_trajectories: usize,
    /// Settling window excluded from RMSE reports, seconds.
    #[serde(default)]
    pub skip_seconds: f64,
}

fn default_train_trajectories() -> usize {
    4
}
fn default_test_trajectories() -> usize {
    1
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            train_trajectories: default_train_trajectories(),
            test_trajectories: default_test_trajectories(),
            skip_seconds: 0.0,
        }
    }
}
