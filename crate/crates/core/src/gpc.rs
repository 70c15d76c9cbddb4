//! Binary Gaussian process classification with a logistic likelihood and the
//! Laplace approximation.
//!
//! Mode finding is Newton's method in the numerically stable form that only
//! factors `B = I + W^½ K W^½` (never `K` itself). The approximate log
//! marginal likelihood and its gradient with respect to the log kernel
//! parameters drive an optional conjugate-gradient hyperparameter search.
//! Predictive class probabilities average the logistic link over the latent
//! Gaussian with 20-node Gauss-Hermite quadrature.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Class, DataTable, DatasetError, NormalizationParams};
use crate::optim::{conjugate_gradient, CgConfig, LineSearchConfig, OptimError};

pub const DEFAULT_MAX_ROWS: usize = 3000;
pub const NEWTON_MAX_ITERATIONS: usize = 100;
pub const NEWTON_TOLERANCE: f64 = 1e-6;
/// Bound on `‖f - K ∇ log p(y|f)‖∞` required at the mode.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;
const HERMITE_NODES: usize = 20;

#[derive(Debug, Error)]
pub enum GpcError {
    #[error("no training rows")]
    EmptyData,
    #[error("partition of {rows} rows exceeds the GPC size cap of {cap}; group or cluster the data first")]
    PartitionTooLarge { rows: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("Cholesky factorization failed (matrix not positive definite); increase the jitter")]
    CholeskyFailure,
    #[error("Laplace mode search did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(&'static str),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

pub type Result<T> = std::result::Result<T, GpcError>;

/// Squared-exponential kernel `s² exp(-|x - x'|² / (2 l²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub jitter: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            signal_variance: 1.0,
            length_scale: 1.0,
            jitter: 1e-8,
        }
    }
}

impl KernelParams {
    fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(GpcError::InvalidKernel("signal variance must be positive"));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(GpcError::InvalidKernel("length scale must be positive"));
        }
        if !(self.jitter >= 0.0) {
            return Err(GpcError::InvalidKernel("jitter must be non-negative"));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// `(log s², log l)`
    pub fn log_params(&self) -> [f64; 2] {
        [self.signal_variance.ln(), self.length_scale.ln()]
    }

    pub fn from_log_params(theta: &[f64], jitter: f64) -> Self {
        KernelParams {
            signal_variance: theta[0].exp(),
            length_scale: theta[1].exp(),
            jitter,
        }
    }
}

/// Cross-covariance between two point sets (no jitter).
pub fn kernel_matrix(x: &[Vec<f64>], x2: &[Vec<f64>], params: &KernelParams) -> Result<DMatrix<f64>> {
    if let (Some(a), Some(b)) = (x.first(), x2.first()) {
        if a.len() != b.len() {
            return Err(GpcError::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(x.len(), x2.len(), |i, j| params.eval(&x[i], &x2[j])))
}

/// Symmetric covariance of one point set, with jitter on the diagonal.
pub fn gram_matrix(x: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance + params.jitter;
        for j in 0..i {
            let v = params.eval(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `1 / (1 + exp(-f))` without overflow.
pub fn logistic_link(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// `log σ(z)`
fn log_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn log_likelihood(y: &[f64], f: &DVector<f64>) -> f64 {
    y.iter().zip(f.iter()).map(|(yi, fi)| log_logistic(yi * fi)).sum()
}

/// `∇ log p(y|f) = t - π` with `t = (y + 1) / 2`.
fn grad_log_likelihood(y: &[f64], f: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        y.len(),
        y.iter().zip(f.iter()).map(|(yi, fi)| (yi + 1.0) / 2.0 - logistic_link(*fi)),
    )
}

/// `W = -∇∇ log p(y|f) = π(1 - π)`
fn neg_hessian(f: &DVector<f64>) -> DVector<f64> {
    f.map(|fi| {
        let p = logistic_link(fi);
        p * (1.0 - p)
    })
}

/// Lower Cholesky factor of `I + W^½ K W^½`.
fn factor_b(k: &DMatrix<f64>, sqrt_w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    let mut b = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * k[(i, j)] * sqrt_w[j]);
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    b.cholesky().map(|c| c.unpack()).ok_or(GpcError::CholeskyFailure)
}

fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b).expect("Cholesky factor has a positive diagonal")
}

fn solve_upper_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.tr_solve_lower_triangular(b).expect("Cholesky factor has a positive diagonal")
}

#[derive(Debug, Clone)]
pub struct LaplaceFit {
    /// Posterior mode of the latent function at the training inputs.
    pub f_hat: DVector<f64>,
    /// `∇ log p(y|f̂)`; at the mode `f̂ = K alpha`.
    pub alpha: DVector<f64>,
    pub sqrt_w: DVector<f64>,
    /// Lower Cholesky factor of `I + W^½ K W^½` at the mode.
    pub chol: DMatrix<f64>,
    /// Approximate `log q(y | X, θ)`.
    pub log_marginal_likelihood: f64,
    /// `Ψ(f) = log p(y|f) - ½ fᵀ K⁻¹ f` at the start and after each step.
    pub psi_trace: Vec<f64>,
    pub iterations: usize,
    /// `‖f̂ - K ∇ log p(y|f̂)‖∞`
    pub stationarity_residual: f64,
}

/// Newton iteration for the Laplace mode. Steps that would lower `Ψ` are
/// halved until they do not.
pub fn laplace_mode(k: &DMatrix<f64>, y: &[f64]) -> Result<LaplaceFit> {
    let n = y.len();
    if n == 0 {
        return Err(GpcError::EmptyData);
    }
    if k.nrows() != n || k.ncols() != n {
        return Err(GpcError::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    let mut a = DVector::zeros(n);
    let mut f = DVector::zeros(n);
    let mut psi = log_likelihood(y, &f);
    let mut psi_trace = vec![psi];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < NEWTON_MAX_ITERATIONS {
        iterations += 1;
        let w = neg_hessian(&f);
        let sqrt_w = w.map(f64::sqrt);
        let l = factor_b(k, &sqrt_w)?;
        let b = w.component_mul(&f) + grad_log_likelihood(y, &f);
        let kb = k * &b;
        let v = solve_upper_transpose(&l, &solve_lower(&l, &sqrt_w.component_mul(&kb)));
        let a_newton = &b - sqrt_w.component_mul(&v);

        let mut step = 1.0;
        let (mut a_next, mut f_next, mut psi_next);
        loop {
            a_next = &a + (&a_newton - &a) * step;
            f_next = k * &a_next;
            psi_next = log_likelihood(y, &f_next) - 0.5 * a_next.dot(&f_next);
            if psi_next >= psi || step < 1e-10 {
                break;
            }
            step *= 0.5;
        }
        let delta = psi_next - psi;
        a = a_next;
        f = f_next;
        psi = psi_next;
        psi_trace.push(psi);

        let residual = (&f - k * grad_log_likelihood(y, &f)).amax();
        if delta.abs() < NEWTON_TOLERANCE && residual < STATIONARITY_TOLERANCE {
            converged = true;
            break;
        }
        if step < 1e-10 {
            // No ascent left at working precision.
            break;
        }
    }
    if !converged {
        return Err(GpcError::NonConvergence { iterations });
    }

    let alpha = grad_log_likelihood(y, &f);
    let stationarity_residual = (&f - k * &alpha).amax();
    let sqrt_w = neg_hessian(&f).map(f64::sqrt);
    let chol = factor_b(k, &sqrt_w)?;
    let log_det_half: f64 = chol.diagonal().iter().map(|d| d.ln()).sum();
    let log_marginal_likelihood = log_likelihood(y, &f) - 0.5 * a.dot(&f) - log_det_half;
    Ok(LaplaceFit {
        f_hat: f,
        alpha,
        sqrt_w,
        chol,
        log_marginal_likelihood,
        psi_trace,
        iterations,
        stationarity_residual,
    })
}

/// Approximate log marginal likelihood and its gradient with respect to
/// `(log s², log l)`.
pub fn log_marginal_and_gradient(x: &[Vec<f64>], y: &[f64], params: &KernelParams) -> Result<(f64, [f64; 2])> {
    params.validate()?;
    let k = gram_matrix(x, params);
    let fit = laplace_mode(&k, y)?;
    let n = y.len();
    let l = &fit.chol;
    let sw = &fit.sqrt_w;

    // R = W^½ B⁻¹ W^½
    let mut r = l
        .solve_lower_triangular(&DMatrix::from_diagonal(sw))
        .expect("positive diagonal");
    l.tr_solve_lower_triangular_mut(&mut r);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] *= sw[i];
        }
    }
    // C = L⁻¹ W^½ K
    let mut c = k.clone();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= sw[i];
        }
    }
    l.solve_lower_triangular_mut(&mut c);

    // ∂ log q / ∂f̂ = ½ diag(Σ) ∇³ log p, with Σ = (K⁻¹ + W)⁻¹ and
    // diag(Σ) = diag(K) - diag(CᵀC)
    let s2 = DVector::from_fn(n, |i, _| {
        let ctc: f64 = c.column(i).iter().map(|v| v * v).sum();
        let p = logistic_link(fit.f_hat[i]);
        let third = -p * (1.0 - p) * (1.0 - 2.0 * p);
        0.5 * (k[(i, i)] - ctc) * third
    });

    let base = DMatrix::from_fn(n, n, |i, j| params.eval(&x[i], &x[j]));
    let ell2 = params.length_scale * params.length_scale;
    let dk_dlen = DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        base[(i, j)] * d2 / ell2
    });

    let alpha = &fit.alpha;
    let mut grad = [0.0; 2];
    for (g, dk) in grad.iter_mut().zip([&base, &dk_dlen]) {
        let explicit = 0.5 * alpha.dot(&(dk * alpha)) - 0.5 * r.component_mul(dk).sum();
        let b = dk * alpha;
        let s3 = &b - &k * (&r * &b);
        *g = explicit + s2.dot(&s3);
    }
    Ok((fit.log_marginal_likelihood, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpcTrainConfig {
    pub kernel: KernelParams,
    pub optimize_hyperparams: bool,
    pub max_rows: usize,
    pub cg: CgConfig,
    pub ls: LineSearchConfig,
}

impl Default for GpcTrainConfig {
    fn default() -> Self {
        GpcTrainConfig {
            kernel: KernelParams::default(),
            optimize_hyperparams: false,
            max_rows: DEFAULT_MAX_ROWS,
            cg: CgConfig::hyperparameter_default(),
            ls: LineSearchConfig::default(),
        }
    }
}

/// Trained latent state. The Cholesky factor is rebuilt from the stored mode
/// when a model is deserialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LatentRepr", into = "LatentRepr")]
pub struct Latent {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub alpha: Vec<f64>,
    kernel: KernelParams,
    sqrt_w: DVector<f64>,
    chol: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct LatentRepr {
    kernel: KernelParams,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    f_hat: Vec<f64>,
    alpha: Vec<f64>,
}

impl From<Latent> for LatentRepr {
    fn from(l: Latent) -> Self {
        LatentRepr {
            kernel: l.kernel,
            inputs: l.inputs,
            targets: l.targets,
            f_hat: l.f_hat,
            alpha: l.alpha,
        }
    }
}

impl TryFrom<LatentRepr> for Latent {
    type Error = GpcError;

    fn try_from(r: LatentRepr) -> Result<Self> {
        let n = r.inputs.len();
        if r.targets.len() != n || r.f_hat.len() != n || r.alpha.len() != n {
            return Err(GpcError::DimensionMismatch {
                expected: n,
                actual: r.f_hat.len(),
            });
        }
        r.kernel.validate()?;
        let f = DVector::from_vec(r.f_hat.clone());
        let sqrt_w = neg_hessian(&f).map(f64::sqrt);
        let chol = factor_b(&gram_matrix(&r.inputs, &r.kernel), &sqrt_w)?;
        Ok(Latent {
            inputs: r.inputs,
            targets: r.targets,
            f_hat: r.f_hat,
            alpha: r.alpha,
            kernel: r.kernel,
            sqrt_w,
            chol,
        })
    }
}

impl Latent {
    fn from_fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, kernel: KernelParams, fit: LaplaceFit) -> Self {
        Latent {
            inputs,
            targets,
            f_hat: fit.f_hat.iter().copied().collect(),
            alpha: fit.alpha.iter().copied().collect(),
            kernel,
            sqrt_w: fit.sqrt_w,
            chol: fit.chol,
        }
    }

    /// Latent predictive mean and variance at a normalized point.
    pub fn predictive(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| self.kernel.eval(xi, x)));
        let mean = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = solve_lower(&self.chol, &self.sqrt_w.component_mul(&ks));
        let var = (self.kernel.signal_variance - v.dot(&v)).max(0.0);
        (mean, var)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpcState {
    /// Training rows held a single class.
    Constant(Class),
    Laplace(Latent),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpcModel {
    pub kernel: KernelParams,
    pub normalizer: NormalizationParams,
    pub state: GpcState,
    pub seed: u64,
    /// Approximate log marginal likelihood at the trained parameters.
    pub log_marginal_likelihood: Option<f64>,
}

impl GpcModel {
    /// `p(C₁ | x)` for a raw feature vector.
    pub fn predict_prob(&self, raw: &[f64]) -> Result<f64> {
        let x = self.normalizer.apply(raw)?;
        match &self.state {
            GpcState::Constant(c) => Ok(c.indicator()),
            GpcState::Laplace(latent) => {
                let (mean, var) = latent.predictive(&x);
                Ok(expected_logistic(mean, var))
            }
        }
    }

    pub fn classify(&self, raw: &[f64]) -> Result<Class> {
        Ok(decide(self.predict_prob(raw)?))
    }

    pub fn input_size(&self) -> usize {
        self.normalizer.dim()
    }
}

/// Class `1` iff the probability is strictly above one half.
pub fn decide(probability: f64) -> Class {
    if probability > 0.5 {
        Class::Positive
    } else {
        Class::Negative
    }
}

/// Gauss-Hermite nodes and weights (weights normalized to sum to one),
/// exactly symmetric about zero.
fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = HERMITE_NODES;
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                ((i.max(j)) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let j = n - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        (nodes, weights)
    })
}

/// `∫ σ(f) N(f; mean, var) df`
pub fn expected_logistic(mean: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return logistic_link(mean);
    }
    let (nodes, weights) = hermite_rule();
    let scale = (2.0 * var).sqrt();
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * logistic_link(mean + scale * x))
        .sum()
}

/// Trains on raw features; fits and stores its own normalizer. A single-class
/// training set yields a constant classifier.
pub fn train(features: &[Vec<f64>], targets: &[Class], seed: u64, config: &GpcTrainConfig) -> Result<GpcModel> {
    if features.is_empty() {
        return Err(GpcError::EmptyData);
    }
    if features.len() > config.max_rows {
        return Err(GpcError::PartitionTooLarge {
            rows: features.len(),
            cap: config.max_rows,
        });
    }
    config.kernel.validate()?;
    let normalizer = NormalizationParams::fit(features)?;
    if let Some(&only) = targets.first().filter(|&&c| targets.iter().all(|&t| t == c)) {
        return Ok(GpcModel {
            kernel: config.kernel,
            normalizer,
            state: GpcState::Constant(only),
            seed,
            log_marginal_likelihood: None,
        });
    }
    let x = normalizer.apply_all(features)?;
    let y: Vec<f64> = targets.iter().map(|c| c.sign()).collect();

    let mut kernel = config.kernel;
    if config.optimize_hyperparams {
        kernel = optimize_kernel(&x, &y, &config.kernel, &config.cg, &config.ls)?;
    }
    let fit = laplace_mode(&gram_matrix(&x, &kernel), &y)?;
    let lml = fit.log_marginal_likelihood;
    Ok(GpcModel {
        kernel,
        normalizer,
        state: GpcState::Laplace(Latent::from_fit(x, y, kernel, fit)),
        seed,
        log_marginal_likelihood: Some(lml),
    })
}

/// Maximizes the Laplace log marginal likelihood over `(log s², log l)`.
pub fn optimize_kernel(
    x: &[Vec<f64>],
    y: &[f64],
    start: &KernelParams,
    cg: &CgConfig,
    ls: &LineSearchConfig,
) -> Result<KernelParams> {
    const LOG_BOUND: f64 = 8.0;
    let jitter = start.jitter;
    let in_bounds = |t: &[f64]| t.iter().all(|v| v.abs() <= LOG_BOUND);
    let objective = |t: &[f64]| {
        if !in_bounds(t) {
            return f64::INFINITY;
        }
        match log_marginal_and_gradient(x, y, &KernelParams::from_log_params(t, jitter)) {
            Ok((lml, _)) => -lml,
            Err(_) => f64::INFINITY,
        }
    };
    let gradient = |t: &[f64]| match log_marginal_and_gradient(x, y, &KernelParams::from_log_params(t, jitter)) {
        Ok((_, g)) => vec![-g[0], -g[1]],
        Err(_) => vec![0.0, 0.0],
    };
    let result = conjugate_gradient(objective, gradient, &start.log_params(), cg, ls)?;
    Ok(KernelParams::from_log_params(&result.x, jitter))
}

pub fn train_table(table: &DataTable, seed: u64, config: &GpcTrainConfig) -> Result<GpcModel> {
    train(&table.numeric_rows(), &table.targets()?, seed, config)
}
