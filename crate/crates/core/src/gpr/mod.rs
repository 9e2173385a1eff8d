//! Multi-output Gaussian process regression for DVL velocity estimation.
//!
//! Maps raw 4-beam measurements to the 3-axis sensor-frame velocity with a
//! calibrated predictive covariance. The covariance function is a sum of
//! three ARD kernels; hyperparameters are trained by minimizing the negative
//! log marginal likelihood with Adam.

mod kernel;
mod model;
mod train;

pub use kernel::{
    kernel_eval, kernel_sum, kernel_sum_with_grad, noise_index, Hyperparams, KernelKind,
    INPUT_DIM, KERNEL_COUNT, OUTPUT_DIM, PARAM_COUNT,
};
pub use model::{
    fit, fit_with_jitter, gram_matrix, nll, nll_grad, nll_value_and_grad, Dataset, GpModel,
    Prediction,
};
pub use train::{init_hyperparams, subsample, train, OptimizerConfig, TrainOutcome};
