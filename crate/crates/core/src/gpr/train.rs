//! Hyperparameter optimization: Adam on the log-space parameter vector
//! against the negative log marginal likelihood.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

use super::kernel::{Hyperparams, INPUT_DIM, KERNEL_COUNT, OUTPUT_DIM, PARAM_COUNT};
use super::model::{fit, nll_value_and_grad, Dataset, GpModel};

/// Adam settings. Defaults follow the training recipe: learning rate 0.1,
/// beta1 0.9, beta2 0.999, 50 iterations.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub iterations: usize,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, iterations: 50, epsilon: 1e-8 }
    }
}

/// Result of a training run: the fitted model at the final iterate plus the
/// NLL value observed at the start of every iteration.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GpModel,
    pub nll_trace: Vec<f64>,
}

/// Data-driven starting point: length scales from per-dimension input
/// standard deviations, signal variances from the mean target variance split
/// across the three kernels, noise std as configured.
pub fn init_hyperparams(dataset: &Dataset, noise_std: f64) -> Result<Hyperparams> {
    let n = dataset.len() as f64;
    let mut scale = [1.0; INPUT_DIM];
    for m in 0..INPUT_DIM {
        let mean: f64 = dataset.inputs().iter().map(|x| x[m]).sum::<f64>() / n;
        let var: f64 = dataset.inputs().iter().map(|x| (x[m] - mean).powi(2)).sum::<f64>() / n;
        scale[m] = var.sqrt().max(1e-3);
    }
    let mut target_var = 0.0;
    for o in 0..OUTPUT_DIM {
        let mean: f64 = dataset.targets().iter().map(|y| y[o]).sum::<f64>() / n;
        target_var +=
            dataset.targets().iter().map(|y| (y[o] - mean).powi(2)).sum::<f64>() / n;
    }
    target_var /= OUTPUT_DIM as f64;
    let sigf2 = (target_var / KERNEL_COUNT as f64).max(1e-6);
    Hyperparams::from_values([sigf2; KERNEL_COUNT], [scale; KERNEL_COUNT], noise_std.max(1e-6))
}

/// Runs Adam on the log-space hyperparameters and returns the model fitted
/// at the final iterate. Deterministic: no minibatching, no randomness.
pub fn train(
    dataset: Dataset,
    init: Hyperparams,
    config: &OptimizerConfig,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::input("training dataset is empty"));
    }
    let mut params = *init.log_params();
    let mut m = [0.0; PARAM_COUNT];
    let mut v = [0.0; PARAM_COUNT];
    let mut trace = Vec::with_capacity(config.iterations);

    for iter in 1..=config.iterations {
        let hp = Hyperparams::from_log(params)?;
        let (value, grad) = nll_value_and_grad(&dataset, &hp)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite NLL or gradient at iteration {iter}"
            )));
        }
        trace.push(value);

        let b1t = 1.0 - config.beta1.powi(iter as i32);
        let b2t = 1.0 - config.beta2.powi(iter as i32);
        for p in 0..PARAM_COUNT {
            m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * grad[p];
            v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * grad[p] * grad[p];
            let m_hat = m[p] / b1t;
            let v_hat = v[p] / b2t;
            params[p] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }

    let model = fit(dataset, Hyperparams::from_log(params)?)?;
    Ok(TrainOutcome { model, nll_trace: trace })
}

/// Uniform subsample without replacement when the dataset exceeds
/// `max_points`; identity otherwise. Deterministic per seed; row order of
/// the original dataset is preserved.
pub fn subsample(dataset: &Dataset, max_points: usize, seed: u64) -> Result<Dataset> {
    if max_points < 2 {
        return Err(Error::config("max_points must be at least 2"));
    }
    let n = dataset.len();
    if n <= max_points {
        return Ok(dataset.clone());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n, max_points).into_vec();
    indices.sort_unstable();
    let inputs = indices.iter().map(|&i| dataset.inputs()[i]).collect();
    let targets = indices.iter().map(|&i| dataset.targets()[i]).collect();
    Dataset::new(inputs, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::model::nll;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn noisy_linear_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut inputs = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let v = [rng.gen_range(0.5..1.5), rng.gen_range(-0.2..0.2), rng.gen_range(-0.1..0.1)];
            let x = [
                0.24 * v[0] + 0.24 * v[1] + 0.94 * v[2] + 0.02 * rng.gen_range(-1.0..1.0),
                -0.24 * v[0] + 0.24 * v[1] + 0.94 * v[2] + 0.02 * rng.gen_range(-1.0..1.0),
                -0.24 * v[0] - 0.24 * v[1] + 0.94 * v[2] + 0.02 * rng.gen_range(-1.0..1.0),
                0.24 * v[0] - 0.24 * v[1] + 0.94 * v[2] + 0.02 * rng.gen_range(-1.0..1.0),
            ];
            inputs.push(x);
            targets.push(v);
        }
        Dataset::new(inputs, targets).unwrap()
    }

    #[test]
    fn training_reduces_nll() {
        let ds = noisy_linear_dataset(80, 3);
        let init = init_hyperparams(&ds, 0.02).unwrap();
        let initial_nll = nll(&ds, &init).unwrap();
        let outcome = train(ds.clone(), init, &OptimizerConfig::default()).unwrap();
        assert_eq!(outcome.nll_trace.len(), 50);
        assert!(outcome.nll_trace.iter().all(|v| v.is_finite()));
        let final_nll = nll(&ds, outcome.model.hyperparams()).unwrap();
        assert!(
            final_nll <= initial_nll,
            "final NLL {final_nll} above initial {initial_nll}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = noisy_linear_dataset(40, 4);
        let init = init_hyperparams(&ds, 0.02).unwrap();
        let a = train(ds.clone(), init.clone(), &OptimizerConfig::default()).unwrap();
        let b = train(ds, init, &OptimizerConfig::default()).unwrap();
        assert_eq!(a.model.hyperparams().log_params(), b.model.hyperparams().log_params());
        assert_eq!(a.nll_trace, b.nll_trace);
    }

    #[test]
    fn default_config_runs_fifty_iterations() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cfg.iterations, 50);
        assert_eq!(cfg.learning_rate, 0.1);
        assert_eq!(cfg.beta1, 0.9);
        assert_eq!(cfg.beta2, 0.999);
    }

    #[test]
    fn gradient_norm_small_after_long_run() {
        // Targets drawn from the GP prior itself give the likelihood an
        // interior optimum. Adam hovers within ~lr of it, so the learning
        // rate decays in stages before reading off the gradient.
        use crate::gpr::model::gram_matrix;
        use nalgebra::{DMatrix, DVector};
        use rand_distr::{Distribution, StandardNormal};

        let truth = Hyperparams::from_values(
            [0.4, 0.3, 0.3],
            [[0.8, 1.2, 1.0, 0.9]; KERNEL_COUNT],
            0.05,
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 40;
        let inputs: Vec<[f64; 4]> =
            (0..n).map(|_| [(); 4].map(|_| rng.gen_range(-1.5..1.5))).collect();
        let mut k = gram_matrix(&inputs, &truth);
        for i in 0..n {
            k[(i, i)] += truth.noise_variance();
        }
        let l = k.cholesky().unwrap().unpack();
        let mut target_cols = DMatrix::zeros(n, 3);
        for o in 0..3 {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            target_cols.set_column(o, &(&l * z));
        }
        let targets: Vec<[f64; 3]> =
            (0..n).map(|i| [target_cols[(i, 0)], target_cols[(i, 1)], target_cols[(i, 2)]]).collect();
        let ds = Dataset::new(inputs, targets).unwrap();

        let mut hp = init_hyperparams(&ds, 0.02).unwrap();
        for (lr, iters) in [(0.1, 600), (0.01, 300), (1e-3, 300), (1e-4, 300), (1e-5, 300)] {
            let cfg = OptimizerConfig { learning_rate: lr, iterations: iters, ..Default::default() };
            hp = train(ds.clone(), hp, &cfg).unwrap().model.hyperparams().clone();
        }
        let grad = crate::gpr::model::nll_grad(&ds, &hp).unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 1e-3, "gradient norm {norm} at the settled iterate");
    }

    #[test]
    fn subsample_is_identity_below_cap() {
        let ds = noisy_linear_dataset(100, 5);
        let out = subsample(&ds, 200, 1).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn subsample_draws_without_replacement() {
        let ds = noisy_linear_dataset(500, 6);
        let out = subsample(&ds, 200, 1).unwrap();
        assert_eq!(out.len(), 200);
        for x in out.inputs() {
            assert!(ds.inputs().contains(x));
        }
        // No duplicates beyond what the source contains (inputs are unique here).
        let mut seen = out.inputs().to_vec();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup_by(|a, b| a == b);
        assert_eq!(seen.len(), 200);
        // Determinism.
        assert_eq!(subsample(&ds, 200, 1).unwrap(), out);
        assert_ne!(subsample(&ds, 200, 2).unwrap(), out);
    }

    #[test]
    fn subsample_rejects_tiny_cap() {
        let ds = noisy_linear_dataset(10, 7);
        assert!(subsample(&ds, 1, 0).is_err());
    }
}
