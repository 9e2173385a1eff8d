//! Multi-output GP regression over DVL beams.
//!
//! Three velocity outputs share one input-space kernel with an identity
//! coregionalization matrix, so the 3n x 3n multi-output Gram matrix is
//! block-diagonal `I3 (x) C`. The n x n block is factorized once and reused
//! for every output column, which is mathematically identical to the
//! materialized Kronecker system without ever forming it.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kernel::{
    kernel_sum, kernel_sum_with_grad, noise_index, Hyperparams, INPUT_DIM, OUTPUT_DIM,
    PARAM_COUNT,
};

/// Training pairs: beam measurements (inputs) and DVL-frame velocities
/// (targets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<[f64; INPUT_DIM]>,
    targets: Vec<[f64; OUTPUT_DIM]>,
}

impl Dataset {
    pub fn new(inputs: Vec<[f64; INPUT_DIM]>, targets: Vec<[f64; OUTPUT_DIM]>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::input(format!(
                "dataset has {} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::input("dataset must contain at least one pair"));
        }
        let finite = inputs.iter().flatten().chain(targets.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::input("dataset contains non-finite entries"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[[f64; INPUT_DIM]] {
        &self.inputs
    }

    pub fn targets(&self) -> &[[f64; OUTPUT_DIM]] {
        &self.targets
    }

    /// Targets as an n x 3 matrix.
    pub fn target_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), OUTPUT_DIM, |i, o| self.targets[i][o])
    }
}

/// Noise-free Gram matrix of the kernel sum: entry (i, j) = sum of the three
/// kernels at (x_i, x_j).
pub fn gram_matrix(inputs: &[[f64; INPUT_DIM]], hp: &Hyperparams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_sum(&inputs[i], &inputs[j], hp);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Jitter escalation ladder, as fractions of the mean Gram diagonal.
const JITTER_FACTORS: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Factorizes `C + sigma_n^2 I + jitter I`, escalating the jitter tenfold on
/// Cholesky failure. Returns the factor's lower triangle and the absolute
/// jitter that succeeded.
fn factorize(c: &DMatrix<f64>, noise_var: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = c.nrows();
    let mean_diag = c.trace() / n as f64;
    let mut last_jitter = 0.0;
    for factor in JITTER_FACTORS {
        let jitter = factor * mean_diag;
        last_jitter = jitter;
        let mut k = c.clone();
        for i in 0..n {
            k[(i, i)] += noise_var + jitter;
        }
        if let Some(chol) = k.cholesky() {
            return Ok((chol.unpack(), jitter));
        }
    }
    Err(Error::numerical(format!(
        "Cholesky factorization failed after escalating jitter to {last_jitter:e}"
    )))
}

/// Fitted GP: training data, hyperparameters and the factorized regularized
/// Gram matrix. Immutable once built; safe to share for concurrent predicts.
#[derive(Debug, Clone)]
pub struct GpModel {
    dataset: Dataset,
    hyperparams: Hyperparams,
    /// Lower Cholesky factor of C + sigma_n^2 I + jitter I.
    chol_l: DMatrix<f64>,
    /// (C + sigma_n^2 I + jitter I)^-1 Y for the three target columns.
    alpha: DMatrix<f64>,
    jitter: f64,
}

/// Mean and covariance of the predictive distribution at one test input.
/// Under the identity coregionalization the covariance is a shared scalar
/// variance replicated on the diagonal, plus the learned noise floor.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

/// Fits the GP for fixed hyperparameters.
pub fn fit(dataset: Dataset, hyperparams: Hyperparams) -> Result<GpModel> {
    fit_with_jitter(dataset, hyperparams, None)
}

/// Fits reusing a known jitter (model-file reload path, keeps predictions
/// bitwise identical).
pub fn fit_with_jitter(
    dataset: Dataset,
    hyperparams: Hyperparams,
    jitter: Option<f64>,
) -> Result<GpModel> {
    let c = gram_matrix(dataset.inputs(), &hyperparams);
    let noise_var = hyperparams.noise_variance();
    let (chol_l, jitter) = match jitter {
        Some(j) => {
            let n = c.nrows();
            let mut k = c;
            for i in 0..n {
                k[(i, i)] += noise_var + j;
            }
            let chol = k
                .cholesky()
                .ok_or_else(|| Error::numerical("stored jitter no longer factorizes the Gram matrix"))?;
            (chol.unpack(), j)
        }
        None => factorize(&c, noise_var)?,
    };
    let y = dataset.target_matrix();
    let mut alpha = y;
    solve_in_place(&chol_l, &mut alpha);
    Ok(GpModel { dataset, hyperparams, chol_l, alpha, jitter })
}

/// Solves (L L^T) X = B in place using the lower factor.
fn solve_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    l.solve_lower_triangular_mut(b);
    l.tr_solve_lower_triangular_mut(b);
}

impl GpModel {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    /// Predictive mean and covariance at a test input.
    ///
    /// The variance is clamped at zero before the noise floor sigma_n^2 is
    /// added, so the reported covariance is always positive definite and the
    /// filter never receives a zero measurement noise at training points.
    pub fn predict(&self, input: &[f64; INPUT_DIM]) -> Prediction {
        let n = self.dataset.len();
        let mut cstar = DVector::zeros(n);
        for (i, xi) in self.dataset.inputs().iter().enumerate() {
            cstar[i] = kernel_sum(xi, input, &self.hyperparams);
        }
        let mean = Vector3::from_fn(|o, _| cstar.dot(&self.alpha.column(o).into_owned()));

        let mut w = cstar;
        self.chol_l.solve_lower_triangular_mut(&mut w);
        let prior = kernel_sum(input, input, &self.hyperparams);
        let variance = (prior - w.norm_squared()).max(0.0);
        let covariance = Matrix3::identity() * (variance + self.hyperparams.noise_variance());
        Prediction { mean, covariance }
    }

    /// Serializes the model (data, log hyperparameters, jitter) as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let record = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            log_hyperparams: *self.hyperparams.log_params(),
            jitter: self.jitter,
            inputs: self.dataset.inputs().to_vec(),
            targets: self.dataset.targets().to_vec(),
        };
        let json = serde_json::to_string(&record)
            .map_err(|e| Error::input(format!("model serialization failed: {e}")))?;
        let mut file = std::fs::File::create(path)?;
        file.write_all(json.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Reloads a saved model. Refitting with the stored jitter reproduces
    /// the original factorization exactly.
    pub fn load(path: &Path) -> Result<GpModel> {
        let json = std::fs::read_to_string(path)?;
        let record: ModelFile = serde_json::from_str(&json)
            .map_err(|e| Error::input(format!("model file parse failed: {e}")))?;
        if record.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                record.format_version
            )));
        }
        let dataset = Dataset::new(record.inputs, record.targets)?;
        let hyperparams = Hyperparams::from_log(record.log_hyperparams)?;
        fit_with_jitter(dataset, hyperparams, Some(record.jitter))
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    log_hyperparams: [f64; PARAM_COUNT],
    jitter: f64,
    inputs: Vec<[f64; INPUT_DIM]>,
    targets: Vec<[f64; OUTPUT_DIM]>,
}

/// Negative log marginal likelihood summed over the three output columns,
/// evaluated through one shared Cholesky factorization:
/// `sum_o [ y_o' K^-1 y_o / 2 ] + 3 [ log det K / 2 + (n/2) log 2 pi ]`.
pub fn nll(dataset: &Dataset, hp: &Hyperparams) -> Result<f64> {
    let model = fit(dataset.clone(), hp.clone())?;
    let n = dataset.len() as f64;
    let y = dataset.target_matrix();
    let mut data_fit = 0.0;
    for o in 0..OUTPUT_DIM {
        data_fit += 0.5 * y.column(o).dot(&model.alpha.column(o));
    }
    let log_det_half: f64 = (0..dataset.len()).map(|i| model.chol_l[(i, i)].ln()).sum();
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(data_fit + OUTPUT_DIM as f64 * (log_det_half + 0.5 * n * two_pi.ln()))
}

/// Analytic gradient of [`nll`] with respect to the log-space hyperparameter
/// vector, via the trace identity with per-parameter Gram derivatives:
/// `d nll / d p = tr[(3 K^-1 - sum_o a_o a_o') dK/dp] / 2`.
pub fn nll_grad(dataset: &Dataset, hp: &Hyperparams) -> Result<[f64; PARAM_COUNT]> {
    Ok(nll_value_and_grad(dataset, hp)?.1)
}

/// NLL and its gradient in one pass (shares the factorization).
pub fn nll_value_and_grad(dataset: &Dataset, hp: &Hyperparams) -> Result<(f64, [f64; PARAM_COUNT])> {
    let model = fit(dataset.clone(), hp.clone())?;
    let n = dataset.len();
    let y = dataset.target_matrix();

    let mut value = 0.0;
    for o in 0..OUTPUT_DIM {
        value += 0.5 * y.column(o).dot(&model.alpha.column(o));
    }
    let log_det_half: f64 = (0..n).map(|i| model.chol_l[(i, i)].ln()).sum();
    let two_pi = 2.0 * std::f64::consts::PI;
    value += OUTPUT_DIM as f64 * (log_det_half + 0.5 * n as f64 * two_pi.ln());

    // W = 3 K^-1 - sum_o alpha_o alpha_o'
    let mut w = DMatrix::identity(n, n);
    solve_in_place(&model.chol_l, &mut w);
    w *= OUTPUT_DIM as f64;
    for o in 0..OUTPUT_DIM {
        let a = model.alpha.column(o);
        for i in 0..n {
            for j in 0..n {
                w[(i, j)] -= a[i] * a[j];
            }
        }
    }

    let inputs = dataset.inputs();
    let mut grad = [0.0; PARAM_COUNT];
    let mut pair_grad = [0.0; PARAM_COUNT];
    for i in 0..n {
        for j in i..n {
            kernel_sum_with_grad(&inputs[i], &inputs[j], hp, &mut pair_grad);
            let weight = if i == j { 0.5 * w[(i, i)] } else { w[(i, j)] };
            for (g, pg) in grad.iter_mut().zip(pair_grad.iter()) {
                *g += weight * pg;
            }
        }
    }
    // Noise enters only on the diagonal: dK/d log(sigma_n) = 2 sigma_n^2 I.
    grad[noise_index()] = hp.noise_variance() * w.trace();
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::kernel::KERNEL_COUNT;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let inputs: Vec<[f64; 4]> = (0..n)
            .map(|_| [(); 4].map(|_| rng.gen_range(-2.0..2.0)))
            .collect();
        let targets: Vec<[f64; 3]> = inputs
            .iter()
            .map(|x| {
                [
                    (x[0] + x[3]) * 0.5 + 0.1 * (x[1] * x[2]).sin(),
                    (x[1] - x[2]) * 0.4,
                    0.25 * (x[0] - x[3]) + 0.05 * x[2],
                ]
            })
            .collect();
        Dataset::new(inputs, targets).unwrap()
    }

    fn test_hp() -> Hyperparams {
        Hyperparams::from_values(
            [0.6, 0.9, 0.4],
            [[1.2, 0.8, 1.5, 1.0]; KERNEL_COUNT],
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn gram_single_point_is_prior_variance() {
        let hp = test_hp();
        let c = gram_matrix(&[[0.1, 0.2, 0.3, 0.4]], &hp);
        assert_eq!(c.nrows(), 1);
        assert_relative_eq!(c[(0, 0)], hp.prior_variance(), epsilon = 1e-14);
    }

    #[test]
    fn duplicated_inputs_need_regularization() {
        let x = [0.5, -0.5, 1.0, 0.0];
        let inputs = vec![x, x, [1.0, 0.3, -0.2, 0.8]];
        let hp = test_hp();
        let c = gram_matrix(&inputs, &hp);
        // The raw Gram matrix is singular by construction...
        assert!(c.clone().cholesky().is_none() || c.determinant().abs() < 1e-12);
        // ...but the noise + jitter regularization factorizes fine.
        let ds = Dataset::new(inputs, vec![[0.0; 3]; 3]).unwrap();
        assert!(fit(ds, hp).is_ok());
    }

    #[test]
    fn gram_matrix_is_psd_after_tiny_shift() {
        for seed in 0..5 {
            let ds = random_dataset(50, seed);
            let c = gram_matrix(ds.inputs(), &test_hp());
            let shifted = &c + DMatrix::identity(50, 50) * 1e-6;
            let eig = shifted.symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l >= 0.0), "seed {seed}: min eig {}", eig.min());
        }
    }

    #[test]
    fn chol_reconstructs_regularized_gram() {
        let ds = random_dataset(120, 3);
        let hp = test_hp();
        let model = fit(ds.clone(), hp.clone()).unwrap();
        let n = ds.len();
        let mut k = gram_matrix(ds.inputs(), &hp);
        for i in 0..n {
            k[(i, i)] += hp.noise_variance() + model.jitter();
        }
        let rebuilt = model.cholesky_l() * model.cholesky_l().transpose();
        let rel = (&rebuilt - &k).norm() / k.norm();
        assert!(rel <= 1e-10, "relative reconstruction error {rel}");
    }

    #[test]
    fn single_point_alpha_is_scaled_target() {
        let hp = Hyperparams::from_values(
            [0.5, 0.7, 0.3],
            [[1.0; 4]; KERNEL_COUNT],
            1e-8,
        )
        .unwrap();
        let y = [0.4, -0.2, 0.9];
        let ds = Dataset::new(vec![[0.0; 4]], vec![y]).unwrap();
        let model = fit(ds, hp.clone()).unwrap();
        for o in 0..3 {
            assert_relative_eq!(model.alpha()[(0, o)], y[o] / hp.prior_variance(), epsilon = 1e-6);
        }
    }

    #[test]
    fn predict_interpolates_at_negligible_noise() {
        let hp = Hyperparams::from_values(
            [0.6, 0.9, 0.4],
            [[1.2, 0.8, 1.5, 1.0]; KERNEL_COUNT],
            1e-8,
        )
        .unwrap();
        let ds = random_dataset(40, 9);
        let model = fit(ds.clone(), hp).unwrap();
        for (x, y) in ds.inputs().iter().zip(ds.targets()).step_by(7) {
            let p = model.predict(x);
            for o in 0..3 {
                assert!(
                    (p.mean[o] - y[o]).abs() < 1e-6,
                    "interpolation failed: {} vs {}",
                    p.mean[o],
                    y[o]
                );
            }
        }
    }

    #[test]
    fn predict_reverts_to_prior_far_away() {
        // The rational-quadratic component only decays polynomially, so the
        // point must sit very far outside the data before the prior wins.
        let ds = random_dataset(30, 4);
        let hp = test_hp();
        let model = fit(ds, hp.clone()).unwrap();
        let far = [5e4, -6e4, 5.5e4, -4.5e4];
        let p = model.predict(&far);
        assert!(p.mean.norm() < 1e-6, "mean did not revert to zero: {}", p.mean.norm());
        let want = hp.prior_variance() + hp.noise_variance();
        assert_relative_eq!(p.covariance[(0, 0)], want, epsilon = 1e-9);
    }

    #[test]
    fn variance_never_exceeds_prior() {
        let ds = random_dataset(60, 5);
        let hp = test_hp();
        let model = fit(ds, hp.clone()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..200 {
            let x = [(); 4].map(|_| rng.gen_range(-3.0..3.0));
            let p = model.predict(&x);
            let f_var = p.covariance[(0, 0)] - hp.noise_variance();
            assert!(f_var <= kernel_sum(&x, &x, &hp) + 1e-10);
            assert!(f_var >= 0.0);
        }
    }

    #[test]
    fn nll_single_zero_target() {
        // Scalar Gaussian log-density, hand-evaluated:
        // (3/2) log(2 pi (sum sigma_f^2 + sigma_n^2)).
        let hp = test_hp();
        let ds = Dataset::new(vec![[0.3, 0.1, -0.2, 0.5]], vec![[0.0; 3]]).unwrap();
        let got = nll(&ds, &hp).unwrap();
        let var = hp.prior_variance() + hp.noise_variance();
        let want = 1.5 * (2.0 * std::f64::consts::PI * var).ln();
        // The jitter shifts the variance at the 1e-8 level.
        assert_relative_eq!(got, want, epsilon = 1e-6);
    }

    #[test]
    fn doubling_targets_quadruples_data_fit() {
        let ds = random_dataset(25, 6);
        let hp = test_hp();
        let doubled = Dataset::new(
            ds.inputs().to_vec(),
            ds.targets().iter().map(|t| t.map(|v| 2.0 * v)).collect(),
        )
        .unwrap();
        let n = ds.len() as f64;
        let base = nll(&ds, &hp).unwrap();
        let twice = nll(&doubled, &hp).unwrap();
        // Remove the shared constant + logdet part, compare data-fit terms.
        let model = fit(ds.clone(), hp.clone()).unwrap();
        let logdet_half: f64 = (0..ds.len()).map(|i| model.cholesky_l()[(i, i)].ln()).sum();
        let constant = 3.0 * (logdet_half + 0.5 * n * (2.0 * std::f64::consts::PI).ln());
        assert_relative_eq!(twice - constant, 4.0 * (base - constant), epsilon = 1e-8);
    }

    #[test]
    fn nll_matches_dense_inverse_oracle() {
        let ds = random_dataset(80, 8);
        let hp = test_hp();
        let got = nll(&ds, &hp).unwrap();

        // Dense oracle: explicit inverse and eigenvalue log-determinant.
        let model = fit(ds.clone(), hp.clone()).unwrap();
        let n = ds.len();
        let mut k = gram_matrix(ds.inputs(), &hp);
        for i in 0..n {
            k[(i, i)] += hp.noise_variance() + model.jitter();
        }
        let k_inv = k.clone().try_inverse().unwrap();
        let y = ds.target_matrix();
        let mut want = 0.0;
        for o in 0..3 {
            let yo = y.column(o);
            want += 0.5 * (yo.transpose() * &k_inv * yo)[(0, 0)];
        }
        let logdet: f64 = k.symmetric_eigenvalues().iter().map(|l| l.ln()).sum();
        want += 3.0 * (0.5 * logdet + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln());
        assert!(
            ((got - want) / want).abs() < 1e-8,
            "nll {got} vs dense oracle {want}"
        );
    }

    #[test]
    fn grad_matches_finite_differences() {
        for seed in [1u64, 2, 3] {
            let ds = random_dataset(20, seed);
            let mut rng = ChaCha12Rng::seed_from_u64(seed + 100);
            let log: [f64; PARAM_COUNT] =
                [(); PARAM_COUNT].map(|_| rng.gen_range(-1.5f64..0.5));
            let hp = Hyperparams::from_log(log).unwrap();
            let grad = nll_grad(&ds, &hp).unwrap();
            let h = 1e-5;
            for j in 0..PARAM_COUNT {
                let mut plus = log;
                plus[j] += h;
                let mut minus = log;
                minus[j] -= h;
                let fd = (nll(&ds, &Hyperparams::from_log(plus).unwrap()).unwrap()
                    - nll(&ds, &Hyperparams::from_log(minus).unwrap()).unwrap())
                    / (2.0 * h);
                let tol = 1e-4 * fd.abs().max(1.0);
                assert!(
                    (grad[j] - fd).abs() <= tol,
                    "seed {seed} param {j}: analytic {} vs fd {fd}",
                    grad[j]
                );
            }
        }
    }

    #[test]
    fn noise_gradient_sign_when_underfitting() {
        // Targets with variance far above the model's: pushing sigma_n up
        // must lower the NLL, so the gradient w.r.t. log sigma_n is negative.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let inputs: Vec<[f64; 4]> =
            (0..30).map(|_| [(); 4].map(|_| rng.gen_range(-1.0..1.0))).collect();
        let targets: Vec<[f64; 3]> =
            (0..30).map(|_| [(); 3].map(|_| rng.gen_range(-30.0..30.0))).collect();
        let ds = Dataset::new(inputs, targets).unwrap();
        let hp = Hyperparams::from_values(
            [0.01, 0.01, 0.01],
            [[1.0; 4]; KERNEL_COUNT],
            0.01,
        )
        .unwrap();
        let grad = nll_grad(&ds, &hp).unwrap();
        assert!(grad[noise_index()] < 0.0, "noise gradient {}", grad[noise_index()]);
    }

    #[test]
    fn block_solver_matches_materialized_kronecker() {
        let ds = random_dataset(30, 12);
        let hp = test_hp();
        let model = fit(ds.clone(), hp.clone()).unwrap();
        let n = ds.len();

        // Materialize I3 (x) (C + sigma^2 I + jitter I) and solve the stacked
        // system for all outputs at once.
        let mut k = gram_matrix(ds.inputs(), &hp);
        for i in 0..n {
            k[(i, i)] += hp.noise_variance() + model.jitter();
        }
        let mut big = DMatrix::zeros(3 * n, 3 * n);
        for o in 0..3 {
            big.view_mut((o * n, o * n), (n, n)).copy_from(&k);
        }
        let y = ds.target_matrix();
        let mut stacked = DVector::zeros(3 * n);
        for o in 0..3 {
            for i in 0..n {
                stacked[o * n + i] = y[(i, o)];
            }
        }
        let big_alpha = big.clone().lu().solve(&stacked).unwrap();

        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..20 {
            let x = [(); 4].map(|_| rng.gen_range(-2.0..2.0));
            let p = model.predict(&x);
            let mut cstar = DVector::zeros(n);
            for (i, xi) in ds.inputs().iter().enumerate() {
                cstar[i] = kernel_sum(xi, &x, &hp);
            }
            for o in 0..3 {
                let want: f64 = (0..n).map(|i| cstar[i] * big_alpha[o * n + i]).sum();
                assert!(
                    (p.mean[o] - want).abs() < 1e-10,
                    "output {o}: block {} vs kronecker {want}",
                    p.mean[o]
                );
            }
            // Variance oracle through the materialized system (block 0).
            let w = big.view((0, 0), (n, n)).lu().solve(&cstar).unwrap();
            let var_oracle = (kernel_sum(&x, &x, &hp) - cstar.dot(&w)).max(0.0);
            let got = p.covariance[(0, 0)] - hp.noise_variance();
            assert!((got - var_oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn model_file_round_trips_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let ds = random_dataset(50, 21);
        let model = fit(ds, test_hp()).unwrap();
        model.save(&path).unwrap();
        let loaded = GpModel::load(&path).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let x = [(); 4].map(|_| rng.gen_range(-2.0..2.0));
            let a = model.predict(&x);
            let b = loaded.predict(&x);
            assert!((a.mean - b.mean).norm() <= 1e-12);
            assert!((a.covariance - b.covariance).norm() <= 1e-12);
        }
    }

    #[test]
    fn mismatched_dataset_is_rejected() {
        assert!(Dataset::new(vec![[0.0; 4]], vec![]).is_err());
        assert!(Dataset::new(vec![[f64::NAN; 4]], vec![[0.0; 3]]).is_err());
    }
}
