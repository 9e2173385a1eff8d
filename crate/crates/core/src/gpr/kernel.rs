//! ARD kernels over 4-beam inputs and their log-space hyperparameters.
//!
//! Three automatic-relevance-determination kernels (squared exponential,
//! Matern 3/2, rational quadratic) are summed into one covariance function.
//! Each kernel carries its own signal variance and one length scale per
//! input dimension; a single observation-noise standard deviation is shared.
//! Everything is parameterized in log space so gradient steps can never
//! leave the positive orthant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beam-space input dimension.
pub const INPUT_DIM: usize = 4;
/// Velocity output dimension.
pub const OUTPUT_DIM: usize = 3;
/// Number of summed kernels.
pub const KERNEL_COUNT: usize = 3;
/// Length of the learnable log-parameter vector:
/// 3 kernels x (1 signal variance + 4 length scales) + 1 noise std.
pub const PARAM_COUNT: usize = KERNEL_COUNT * (1 + INPUT_DIM) + 1;

/// Kernel families in the sum, in parameter-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    SquaredExponential,
    Matern32,
    RationalQuadratic,
}

pub const KERNEL_KINDS: [KernelKind; KERNEL_COUNT] = [
    KernelKind::SquaredExponential,
    KernelKind::Matern32,
    KernelKind::RationalQuadratic,
];

/// Log-space hyperparameter vector.
///
/// Layout: for each kernel `k` in [SE, Matern32, RQ]:
/// `log(sigma_f_k^2)` followed by `log(sigma_{k,m})` for m = 1..4;
/// finally `log(sigma_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    log_params: [f64; PARAM_COUNT],
}

impl Hyperparams {
    pub fn from_log(log_params: [f64; PARAM_COUNT]) -> Result<Self> {
        if log_params.iter().any(|p| !p.is_finite()) {
            return Err(Error::numerical("hyperparameter vector contains non-finite entries"));
        }
        Ok(Self { log_params })
    }

    /// Builds from natural-space values (all must be strictly positive).
    pub fn from_values(
        signal_variances: [f64; KERNEL_COUNT],
        length_scales: [[f64; INPUT_DIM]; KERNEL_COUNT],
        noise_std: f64,
    ) -> Result<Self> {
        let mut log_params = [0.0; PARAM_COUNT];
        for k in 0..KERNEL_COUNT {
            if signal_variances[k] <= 0.0 {
                return Err(Error::config("signal variances must be strictly positive"));
            }
            log_params[signal_index(k)] = signal_variances[k].ln();
            for m in 0..INPUT_DIM {
                if length_scales[k][m] <= 0.0 {
                    return Err(Error::config("length scales must be strictly positive"));
                }
                log_params[length_index(k, m)] = length_scales[k][m].ln();
            }
        }
        if noise_std <= 0.0 {
            return Err(Error::config("noise std must be strictly positive"));
        }
        log_params[noise_index()] = noise_std.ln();
        Self::from_log(log_params)
    }

    /// Shared defaults used in unit tests: unit variances and scales,
    /// noise std 0.02.
    pub fn unit(noise_std: f64) -> Self {
        Self::from_values(
            [1.0; KERNEL_COUNT],
            [[1.0; INPUT_DIM]; KERNEL_COUNT],
            noise_std,
        )
        .expect("unit hyperparameters are valid")
    }

    pub fn log_params(&self) -> &[f64; PARAM_COUNT] {
        &self.log_params
    }

    pub fn signal_variance(&self, kernel: usize) -> f64 {
        self.log_params[signal_index(kernel)].exp()
    }

    pub fn length_scale(&self, kernel: usize, dim: usize) -> f64 {
        self.log_params[length_index(kernel, dim)].exp()
    }

    pub fn noise_std(&self) -> f64 {
        self.log_params[noise_index()].exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_std().powi(2)
    }

    /// Prior variance of the kernel sum at any point: sum of the three
    /// signal variances.
    pub fn prior_variance(&self) -> f64 {
        (0..KERNEL_COUNT).map(|k| self.signal_variance(k)).sum()
    }
}

pub fn signal_index(kernel: usize) -> usize {
    kernel * (1 + INPUT_DIM)
}

pub fn length_index(kernel: usize, dim: usize) -> usize {
    kernel * (1 + INPUT_DIM) + 1 + dim
}

pub const fn noise_index() -> usize {
    PARAM_COUNT - 1
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Squared distance in length-scale units for one kernel.
fn scaled_sq_dist(hp: &Hyperparams, kernel: usize, x: &[f64; INPUT_DIM], z: &[f64; INPUT_DIM]) -> f64 {
    let mut q = 0.0;
    for m in 0..INPUT_DIM {
        let d = (x[m] - z[m]) / hp.length_scale(kernel, m);
        q += d * d;
    }
    q
}

/// Evaluates one kernel of the sum.
pub fn kernel_eval(
    kind: KernelKind,
    x: &[f64; INPUT_DIM],
    z: &[f64; INPUT_DIM],
    hp: &Hyperparams,
) -> f64 {
    let k = KERNEL_KINDS.iter().position(|&kk| kk == kind).expect("known kernel");
    let sigf2 = hp.signal_variance(k);
    let q = scaled_sq_dist(hp, k, x, z);
    match kind {
        KernelKind::SquaredExponential => sigf2 * (-0.5 * q).exp(),
        KernelKind::Matern32 => {
            let r = q.sqrt();
            sigf2 * (1.0 + SQRT3 * r) * (-SQRT3 * r).exp()
        }
        KernelKind::RationalQuadratic => sigf2 / (1.0 + 0.5 * q),
    }
}

/// The covariance function: sum of the three ARD kernels.
pub fn kernel_sum(x: &[f64; INPUT_DIM], z: &[f64; INPUT_DIM], hp: &Hyperparams) -> f64 {
    KERNEL_KINDS.iter().map(|&kind| kernel_eval(kind, x, z, hp)).sum()
}

/// Kernel sum together with its gradient with respect to the first
/// `PARAM_COUNT - 1` log parameters (everything except the noise, which only
/// affects the Gram diagonal). Used by the marginal-likelihood gradient.
pub fn kernel_sum_with_grad(
    x: &[f64; INPUT_DIM],
    z: &[f64; INPUT_DIM],
    hp: &Hyperparams,
    grad: &mut [f64; PARAM_COUNT],
) -> f64 {
    grad.fill(0.0);
    let mut total = 0.0;
    for (k, &kind) in KERNEL_KINDS.iter().enumerate() {
        let sigf2 = hp.signal_variance(k);
        let q = scaled_sq_dist(hp, k, x, z);
        match kind {
            KernelKind::SquaredExponential => {
                let v = sigf2 * (-0.5 * q).exp();
                total += v;
                grad[signal_index(k)] = v;
                for m in 0..INPUT_DIM {
                    let d = x[m] - z[m];
                    let l = hp.length_scale(k, m);
                    // d k / d log(sigma_m) = k * d^2 / sigma_m^2
                    grad[length_index(k, m)] = v * (d * d) / (l * l);
                }
            }
            KernelKind::Matern32 => {
                let r = q.sqrt();
                let e = (-SQRT3 * r).exp();
                let v = sigf2 * (1.0 + SQRT3 * r) * e;
                total += v;
                grad[signal_index(k)] = v;
                for m in 0..INPUT_DIM {
                    let d = x[m] - z[m];
                    let l = hp.length_scale(k, m);
                    // d k / d log(sigma_m) = 3 sigma_f^2 e^{-sqrt3 r} d^2 / sigma_m^2
                    grad[length_index(k, m)] = 3.0 * sigf2 * e * (d * d) / (l * l);
                }
            }
            KernelKind::RationalQuadratic => {
                let den = 1.0 + 0.5 * q;
                let v = sigf2 / den;
                total += v;
                grad[signal_index(k)] = v;
                for m in 0..INPUT_DIM {
                    let d = x[m] - z[m];
                    let l = hp.length_scale(k, m);
                    // d k / d log(sigma_m) = sigma_f^2 den^-2 d^2 / sigma_m^2
                    grad[length_index(k, m)] = sigf2 / (den * den) * (d * d) / (l * l);
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_distance_returns_signal_variance() {
        let hp = Hyperparams::from_values(
            [0.5, 1.5, 2.5],
            [[0.3, 0.7, 1.1, 2.0]; KERNEL_COUNT],
            0.02,
        )
        .unwrap();
        let x = [0.4, -0.2, 1.0, 3.3];
        for (k, &kind) in KERNEL_KINDS.iter().enumerate() {
            assert_relative_eq!(kernel_eval(kind, &x, &x, &hp), hp.signal_variance(k), epsilon = 1e-15);
        }
        assert_relative_eq!(kernel_sum(&x, &x, &hp), 4.5, epsilon = 1e-12);
    }

    #[test]
    fn unit_kernels_at_unit_distance() {
        // Frozen by substituting unit hyperparameters into the formulas.
        let hp = Hyperparams::unit(0.02);
        let x = [1.0, 0.0, 0.0, 0.0];
        let z = [0.0; 4];
        let se = kernel_eval(KernelKind::SquaredExponential, &x, &z, &hp);
        assert_relative_eq!(se, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(se, 0.6065306597126334, epsilon = 1e-12);

        let m32 = kernel_eval(KernelKind::Matern32, &x, &z, &hp);
        let want = (1.0 + SQRT3) * (-SQRT3).exp();
        assert_relative_eq!(m32, want, epsilon = 1e-15);
        assert_relative_eq!(m32, 0.4833577245965077, epsilon = 1e-12);

        let rq = kernel_eval(KernelKind::RationalQuadratic, &x, &z, &hp);
        assert_relative_eq!(rq, 1.0 / 1.5, epsilon = 1e-15);
    }

    #[test]
    fn unit_sum_at_zero_distance_is_three() {
        let hp = Hyperparams::unit(0.02);
        let x = [0.2, 0.4, -0.1, 0.9];
        assert_relative_eq!(kernel_sum(&x, &x, &hp), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sum_decays_with_distance() {
        let hp = Hyperparams::unit(0.02);
        let origin = [0.0; 4];
        let near = [1.0, 0.0, 0.0, 0.0];
        let far = [2.0, 0.0, 0.0, 0.0];
        assert!(kernel_sum(&far, &origin, &hp) < kernel_sum(&near, &origin, &hp));
    }

    #[test]
    fn grad_matches_finite_differences() {
        let hp = Hyperparams::from_values(
            [0.7, 1.3, 0.4],
            [[0.5, 0.9, 1.4, 0.8], [1.1, 0.6, 0.7, 1.9], [0.4, 1.5, 0.9, 1.2]],
            0.05,
        )
        .unwrap();
        let x = [0.3, -0.8, 1.2, 0.1];
        let z = [-0.5, 0.4, 0.6, -0.9];
        let mut grad = [0.0; PARAM_COUNT];
        kernel_sum_with_grad(&x, &z, &hp, &mut grad);
        let h = 1e-6;
        for j in 0..PARAM_COUNT - 1 {
            let mut plus = *hp.log_params();
            plus[j] += h;
            let mut minus = *hp.log_params();
            minus[j] -= h;
            let fd = (kernel_sum(&x, &z, &Hyperparams::from_log(plus).unwrap())
                - kernel_sum(&x, &z, &Hyperparams::from_log(minus).unwrap()))
                / (2.0 * h);
            assert!(
                (grad[j] - fd).abs() <= 1e-7 * fd.abs().max(1.0),
                "param {j}: analytic {} vs fd {fd}",
                grad[j]
            );
        }
    }

    proptest! {
        #[test]
        fn kernel_sum_is_symmetric(
            x in proptest::array::uniform4(-3.0f64..3.0),
            z in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let hp = Hyperparams::from_values(
                [0.8, 1.2, 0.5],
                [[0.6, 1.0, 1.7, 0.9]; KERNEL_COUNT],
                0.02,
            ).unwrap();
            let a = kernel_sum(&x, &z, &hp);
            let b = kernel_sum(&z, &x, &hp);
            prop_assert_eq!(a, b);
        }
    }
}
