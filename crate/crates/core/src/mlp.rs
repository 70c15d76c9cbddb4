//! Single-hidden-layer perceptron (`x-y-1`) with logistic units, trained by
//! conjugate gradient on mean squared error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Class, DataTable, DatasetError, NormalizationParams};
use crate::optim::{conjugate_gradient, CgConfig, LineSearchConfig, OptimError};

/// Output bias of a constant classifier; `logistic(20) = 1 - 2.1e-9`.
const CONSTANT_BIAS: f64 = 20.0;

pub const DEFAULT_HIDDEN_CANDIDATES: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("no training rows")]
    EmptyData,
    #[error("hidden layer size must be positive")]
    ZeroHidden,
    #[error("no hidden-size candidates given")]
    NoCandidates,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

pub type Result<T> = std::result::Result<T, MlpError>;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Layer sizes. Flat parameters are laid out as input-to-hidden weights
/// (row-major, one row per hidden unit), hidden biases, hidden-to-output
/// weights, output bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub input: usize,
    pub hidden: usize,
}

impl Shape {
    pub fn param_count(&self) -> usize {
        self.hidden * (self.input + 2) + 1
    }

    fn forward_hidden(&self, params: &[f64], x: &[f64], hidden: &mut [f64]) -> f64 {
        let (w1, rest) = params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        let mut z_out = b2[0];
        for j in 0..self.hidden {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let z = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            hidden[j] = logistic(z);
            z_out += w2[j] * hidden[j];
        }
        logistic(z_out)
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        self.forward_hidden(params, x, &mut hidden)
    }
}

/// Mean squared error against 0/1 targets and its backpropagated gradient.
pub fn loss_and_gradient(shape: Shape, params: &[f64], features: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if features.is_empty() {
        return Err(MlpError::EmptyData);
    }
    let n = features.len() as f64;
    let (h, d) = (shape.hidden, shape.input);
    let mut grad = vec![0.0; shape.param_count()];
    let mut hidden = vec![0.0; h];
    let mut loss = 0.0;
    let w2_off = h * d + h;
    for (x, &t) in features.iter().zip(targets) {
        let o = shape.forward_hidden(params, x, &mut hidden);
        let err = o - t;
        loss += err * err;
        let delta_out = 2.0 * err * o * (1.0 - o) / n;
        for j in 0..h {
            grad[w2_off + j] += delta_out * hidden[j];
            let delta_h = delta_out * params[w2_off + j] * hidden[j] * (1.0 - hidden[j]);
            grad[h * d + j] += delta_h;
            let row = &mut grad[j * d..(j + 1) * d];
            for (g, v) in row.iter_mut().zip(x) {
                *g += delta_h * v;
            }
        }
        grad[w2_off + h] += delta_out;
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub shape: Shape,
    pub params: Vec<f64>,
    pub normalizer: NormalizationParams,
    pub seed: u64,
}

impl MlpModel {
    /// All-zero weights except the output bias.
    pub fn constant(input: usize, hidden: usize, class: Class, normalizer: NormalizationParams, seed: u64) -> Self {
        let shape = Shape { input, hidden };
        let mut params = vec![0.0; shape.param_count()];
        params[shape.param_count() - 1] = class.sign() * CONSTANT_BIAS;
        MlpModel {
            shape,
            params,
            normalizer,
            seed,
        }
    }

    /// `"x-y-1"`
    pub fn architecture(&self) -> String {
        format!("{}-{}-1", self.shape.input, self.shape.hidden)
    }

    /// Network output for an already-normalized vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.shape.input {
            return Err(MlpError::DimensionMismatch {
                expected: self.shape.input,
                actual: x.len(),
            });
        }
        Ok(self.shape.forward(&self.params, x))
    }

    /// Network output for a raw feature vector.
    pub fn output(&self, raw: &[f64]) -> Result<f64> {
        let x = self.normalizer.apply(raw)?;
        self.forward(&x)
    }

    pub fn classify(&self, raw: &[f64]) -> Result<Class> {
        Ok(decide(self.output(raw)?))
    }
}

/// Class `1` iff the output is strictly above one half.
pub fn decide(output: f64) -> Class {
    if output > 0.5 {
        Class::Positive
    } else {
        Class::Negative
    }
}

fn initial_params(shape: Shape, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..shape.param_count()).map(|_| rng.gen_range(-0.5..=0.5)).collect()
}

/// Trains on raw features; fits and stores its own normalizer. A single-class
/// training set yields a constant classifier.
pub fn train(
    features: &[Vec<f64>],
    targets: &[Class],
    hidden: usize,
    seed: u64,
    cg: &CgConfig,
    ls: &LineSearchConfig,
) -> Result<MlpModel> {
    Ok(train_with_trace(features, targets, hidden, seed, cg, ls)?.0)
}

/// As [`train`], also returning the loss trace of the optimizer.
pub fn train_with_trace(
    features: &[Vec<f64>],
    targets: &[Class],
    hidden: usize,
    seed: u64,
    cg: &CgConfig,
    ls: &LineSearchConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    if features.is_empty() {
        return Err(MlpError::EmptyData);
    }
    if hidden == 0 {
        return Err(MlpError::ZeroHidden);
    }
    let normalizer = NormalizationParams::fit(features)?;
    let input = normalizer.dim();
    if let Some(&only) = targets.first().filter(|&&c| targets.iter().all(|&t| t == c)) {
        return Ok((MlpModel::constant(input, hidden, only, normalizer, seed), Vec::new()));
    }
    let x = normalizer.apply_all(features)?;
    let t: Vec<f64> = targets.iter().map(|c| c.indicator()).collect();
    let shape = Shape { input, hidden };
    let objective = |p: &[f64]| loss_and_gradient(shape, p, &x, &t).map(|r| r.0).unwrap_or(f64::INFINITY);
    let gradient = |p: &[f64]| {
        loss_and_gradient(shape, p, &x, &t)
            .map(|r| r.1)
            .unwrap_or_else(|_| vec![0.0; p.len()])
    };
    let result = conjugate_gradient(objective, gradient, &initial_params(shape, seed), cg, ls)?;
    Ok((
        MlpModel {
            shape,
            params: result.x,
            normalizer,
            seed,
        },
        result.trace,
    ))
}

pub fn train_table(table: &DataTable, hidden: usize, seed: u64, cg: &CgConfig, ls: &LineSearchConfig) -> Result<MlpModel> {
    train(&table.numeric_rows(), &table.targets()?, hidden, seed, cg, ls)
}

/// Fraction of rows classified correctly.
pub fn accuracy(model: &MlpModel, features: &[Vec<f64>], targets: &[Class]) -> Result<f64> {
    if features.is_empty() {
        return Err(MlpError::EmptyData);
    }
    let mut hits = 0;
    for (x, &t) in features.iter().zip(targets) {
        if model.classify(x)? == t {
            hits += 1;
        }
    }
    Ok(hits as f64 / features.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenSizeSearch {
    pub best: usize,
    /// `(hidden size, validation accuracy)` per candidate.
    pub table: Vec<(usize, f64)>,
}

/// Highest accuracy wins; ties go to the smallest size.
pub fn pick_hidden_size(table: &[(usize, f64)]) -> Option<usize> {
    table
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .map(|(size, _)| size)
}

pub struct Split<'a> {
    pub features: &'a [Vec<f64>],
    pub targets: &'a [Class],
}

pub fn search_hidden_size(
    train_split: Split<'_>,
    validation: Split<'_>,
    candidates: &[usize],
    seed: u64,
    cg: &CgConfig,
    ls: &LineSearchConfig,
) -> Result<HiddenSizeSearch> {
    if candidates.is_empty() {
        return Err(MlpError::NoCandidates);
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &size in candidates {
        let model = train(train_split.features, train_split.targets, size, seed, cg, ls)?;
        table.push((size, accuracy(&model, validation.features, validation.targets)?));
    }
    let best = pick_hidden_size(&table).expect("non-empty candidate table");
    Ok(HiddenSizeSearch { best, table })
}
