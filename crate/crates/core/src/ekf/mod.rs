//! Strapdown inertial propagation and the 12-state error-state EKF fusing
//! DVL-frame velocity estimates, optionally with adaptive measurement noise.

mod filter;
mod fusion;
mod state;
mod strapdown;

pub use filter::{build_system_matrices, dvl_update, propagate_covariance, UpdateDiagnostics};
pub use fusion::{
    run_fusion, EkfConfig, ExternalVelocity, Frontend, FusionEngine, FusionSetup, NavLogRow,
};
pub use state::{
    error_against_truth, process_noise_psd, skew, Cov12, ErrorState, FilterState,
    InitialUncertainty, NavState, Vec12,
};
pub use strapdown::strapdown_step;
