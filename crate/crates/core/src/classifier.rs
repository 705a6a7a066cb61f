//! Logistic-regression scoring on hashed features.
//!
//! An alternative to the two-distribution importance weight: train a binary
//! classifier to separate target text (label 1) from raw text (label 0) on
//! length-normalized bucket counts, then use its probability — optionally
//! Platt-calibrated — as the per-example score. Selection rules built on
//! these probabilities live in [`crate::selection`].
//!
//! Training is deliberately plain: full-batch gradient descent with Armijo
//! backtracking on the regularized mean logistic loss, an l2 grid chosen by
//! held-out accuracy, and class balancing by seeded downsampling. Everything
//! is sequential and seed-determined, so retraining reproduces the exact
//! same parameters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::HashedCounts;
use crate::ngram::read_model_header;
use crate::rng::{fnv1a64, shuffle, splitmix64, SplitMix64};
use crate::{Error, Result};

/// Magic bytes opening a linear model file.
pub const LINEAR_MODEL_MAGIC: &[u8] = b"LINMOD1";

/// Sparse normalized feature vector: `(bucket, count / total)` pairs in
/// ascending bucket order.
pub type SparseVector = Vec<(u32, f64)>;

/// Length-normalize a count vector so its values sum to 1.
///
/// Empty counts cannot be normalized; the caller decides whether that is an
/// error (training, probability scoring) or a neutral score.
pub fn normalize(counts: &HashedCounts) -> Result<SparseVector> {
    if counts.is_empty() {
        return Err(Error::EmptyInput(
            "cannot normalize an empty count vector".into(),
        ));
    }
    let total = counts.total() as f64;
    Ok(counts.iter().map(|(b, c)| (b, c as f64 / total)).collect())
}

/// Sigmoid with the usual two-branch form so large negative inputs do not
/// overflow `exp`.
#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Platt calibration parameters: `p(s) = 1 / (1 + exp(a * s + b))`.
///
/// Fitted on separable scores, `a` comes out negative, making `p`
/// strictly increasing in the score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

/// A trained linear scorer over hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
    l2: f64,
    platt: Option<PlattParams>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinearHeader {
    num_buckets: u32,
    l2: f64,
    platt: Option<PlattParams>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64, l2: f64, platt: Option<PlattParams>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one weight".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::InvalidConfig("model parameters must be finite".into()));
        }
        Ok(LinearModel {
            weights,
            bias,
            l2,
            platt,
        })
    }

    pub fn num_buckets(&self) -> u32 {
        self.weights.len() as u32
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn platt(&self) -> Option<PlattParams> {
        self.platt
    }

    pub fn set_platt(&mut self, platt: Option<PlattParams>) {
        self.platt = platt;
    }

    /// Raw decision value `w . normalize(x) + bias`.
    pub fn decision_value(&self, counts: &HashedCounts) -> Result<f64> {
        if let Some(bucket) = counts.max_bucket() {
            if bucket as usize >= self.weights.len() {
                return Err(Error::BucketOutOfRange {
                    bucket,
                    num_buckets: self.num_buckets(),
                });
            }
        }
        let x = normalize(counts)?;
        Ok(dot_sparse(&self.weights, &x) + self.bias)
    }

    /// Uncalibrated probability `sigmoid(decision_value)`.
    pub fn predict_prob(&self, counts: &HashedCounts) -> Result<f64> {
        Ok(sigmoid(self.decision_value(counts)?))
    }

    /// Calibrated probability when Platt parameters are attached, otherwise
    /// the plain sigmoid probability.
    pub fn calibrated_prob(&self, counts: &HashedCounts) -> Result<f64> {
        let s = self.decision_value(counts)?;
        Ok(match self.platt {
            Some(params) => calibrate(params, s),
            None => sigmoid(s),
        })
    }

    /// Write the model: magic, JSON header line, then `num_buckets + 1`
    /// little-endian `f64`s (weights, then bias). Bits roundtrip exactly.
    pub fn save<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(LINEAR_MODEL_MAGIC)?;
        writer.write_all(b"\n")?;
        let header = LinearHeader {
            num_buckets: self.num_buckets(),
            l2: self.l2,
            platt: self.platt,
        };
        serde_json::to_writer(&mut *writer, &header)?;
        writer.write_all(b"\n")?;
        for &w in &self.weights {
            writer.write_all(&w.to_le_bytes())?;
        }
        writer.write_all(&self.bias.to_le_bytes())?;
        Ok(())
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.save(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::InvalidModel("file too short for magic".into()))?;
        if &magic[..7] != LINEAR_MODEL_MAGIC || magic[7] != b'\n' {
            return Err(Error::InvalidModel("bad magic".into()));
        }
        let header: LinearHeader = read_model_header(reader)?;
        let mut values = vec![0.0f64; header.num_buckets as usize + 1];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::InvalidModel("truncated parameter table".into()))?;
            *v = f64::from_le_bytes(buf);
        }
        if reader.read(&mut buf)? != 0 {
            return Err(Error::InvalidModel("trailing bytes after table".into()));
        }
        let bias = values.pop().expect("table has at least one value");
        LinearModel::new(values, bias, header.l2, header.platt)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self> {
        LinearModel::load(&mut BufReader::new(File::open(path)?))
    }
}

fn dot_sparse(weights: &[f64], x: &SparseVector) -> f64 {
    x.iter().map(|&(b, v)| weights[b as usize] * v).sum()
}

/// Training hyperparameters. The defaults are the ones every pipeline here
/// uses; the grid is searched by held-out accuracy with ties going to the
/// smaller (more regularized toward simpler models is *larger* l2, so ties
/// prefer the smaller value only as a deterministic rule).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2_grid: Vec<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            max_iterations: 10_000,
            gradient_tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l2_grid.is_empty() {
            return Err(Error::InvalidConfig("l2 grid is empty".into()));
        }
        if self.l2_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidConfig(
                "l2 values must be finite and nonnegative".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !self.gradient_tolerance.is_finite() || self.gradient_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("gradient_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// What [`train`] found: the winning model (Platt-calibrated on the held-out
/// half) plus the search trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Held-out accuracy of the winning l2.
    pub held_out_accuracy: f64,
    /// `(l2, held-out accuracy)` for every grid point, in grid order.
    pub grid_accuracies: Vec<(f64, f64)>,
    /// Per-class example count after balancing.
    pub balanced_per_class: usize,
}

/// Mean logistic loss plus `(l2 / 2) * ||w||^2` (bias unregularized).
///
/// This is the exact objective [`train`] minimizes; it is public so callers
/// can audit convergence or verify the analytic gradient externally.
pub fn loss(
    examples: &[SparseVector],
    labels: &[f64],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> f64 {
    let n = examples.len() as f64;
    let mut total = 0.0f64;
    for (x, &y) in examples.iter().zip(labels) {
        let z = dot_sparse(weights, x) + bias;
        // log(1 + exp(z)) - y*z, computed on the stable branch.
        total += if z >= 0.0 {
            (-z).exp().ln_1p() + (1.0 - y) * z
        } else {
            z.exp().ln_1p() - y * z
        };
    }
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>() * (l2 / 2.0);
    total / n + reg
}

/// Gradient of [`loss`]; returns `(grad_weights, grad_bias)`.
pub fn gradient(
    examples: &[SparseVector],
    labels: &[f64],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = examples.len() as f64;
    let mut grad_w = vec![0.0f64; weights.len()];
    let mut grad_b = 0.0f64;
    for (x, &y) in examples.iter().zip(labels) {
        let residual = sigmoid(dot_sparse(weights, x) + bias) - y;
        for &(b, v) in x {
            grad_w[b as usize] += residual * v;
        }
        grad_b += residual;
    }
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (grad_w, grad_b / n)
}

/// Full-batch gradient descent with Armijo backtracking; stops when the
/// gradient infinity-norm drops below the tolerance or the iteration cap is
/// reached.
fn fit_logistic(
    examples: &[SparseVector],
    labels: &[f64],
    num_buckets: u32,
    l2: f64,
    config: &TrainConfig,
) -> (Vec<f64>, f64) {
    let mut weights = vec![0.0f64; num_buckets as usize];
    let mut bias = 0.0f64;
    let mut current_loss = loss(examples, labels, &weights, bias, l2);
    let mut step = 1.0f64;
    for _ in 0..config.max_iterations {
        let (grad_w, grad_b) = gradient(examples, labels, &weights, bias, l2);
        let grad_inf = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < config.gradient_tolerance {
            break;
        }
        let grad_sq: f64 = grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        let mut accepted = false;
        while step >= 1e-20 {
            let trial_w: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w - step * g)
                .collect();
            let trial_b = bias - step * grad_b;
            let trial_loss = loss(examples, labels, &trial_w, trial_b, l2);
            if trial_loss <= current_loss - 1e-4 * step * grad_sq {
                weights = trial_w;
                bias = trial_b;
                current_loss = trial_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // No descent direction at machine precision.
        }
        step = (step * 2.0).min(1e6);
    }
    (weights, bias)
}

fn held_out_accuracy(
    examples: &[SparseVector],
    labels: &[f64],
    weights: &[f64],
    bias: f64,
) -> f64 {
    let correct = examples
        .iter()
        .zip(labels)
        .filter(|(x, &y)| {
            let predicted = if dot_sparse(weights, x) + bias >= 0.0 { 1.0 } else { 0.0 };
            predicted == y
        })
        .count();
    correct as f64 / examples.len() as f64
}

fn normalize_class(class: &str, counts: &[HashedCounts], num_buckets: u32) -> Result<Vec<SparseVector>> {
    counts
        .iter()
        .enumerate()
        .map(|(index, c)| {
            if let Some(bucket) = c.max_bucket() {
                if bucket >= num_buckets {
                    return Err(Error::BucketOutOfRange {
                        bucket,
                        num_buckets,
                    });
                }
            }
            normalize(c).map_err(|_| Error::Unscorable {
                id: format!("{class}[{index}]"),
                reason: "empty feature vector".into(),
            })
        })
        .collect()
}

/// Seeded uniform downsample of `items` to `n`, preserving original order.
fn downsample<T: Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    let mut indices: Vec<usize> = (0..items.len()).collect();
    shuffle(&mut indices, &mut SplitMix64::new(seed));
    indices.truncate(n);
    indices.sort_unstable();
    indices.into_iter().map(|i| items[i].clone()).collect()
}

/// Train the classifier: balance classes by seeded downsampling, split each
/// class in half (first half fits, second half selects the l2 and fits the
/// Platt calibration), grid-search l2 by held-out accuracy with ties to the
/// smaller value, and return the winning model.
///
/// `positives` is the target class (label 1), `negatives` the raw class
/// (label 0). Each class needs at least 2 usable examples so both halves
/// are nonempty. Same seed, same data, same parameters — bit for bit.
pub fn train(
    positives: &[HashedCounts],
    negatives: &[HashedCounts],
    num_buckets: u32,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::EmptyInput(
            "both classes must be nonempty for training".into(),
        ));
    }
    let positives = normalize_class("positive", positives, num_buckets)?;
    let negatives = normalize_class("negative", negatives, num_buckets)?;

    // Balance by downsampling the larger class.
    let per_class = positives.len().min(negatives.len());
    if per_class < 2 {
        return Err(Error::EmptyInput(
            "each class needs at least 2 examples to split off a held-out half".into(),
        ));
    }
    let pos_seed = splitmix64(config.seed ^ fnv1a64(b"downsample-positive"));
    let neg_seed = splitmix64(config.seed ^ fnv1a64(b"downsample-negative"));
    let positives = if positives.len() > per_class {
        downsample(&positives, per_class, pos_seed)
    } else {
        positives
    };
    let negatives = if negatives.len() > per_class {
        downsample(&negatives, per_class, neg_seed)
    } else {
        negatives
    };

    // Split each class in half: first half trains, second half is held out.
    let split = per_class / 2;
    let mut fit_examples: Vec<SparseVector> = Vec::with_capacity(2 * split);
    let mut fit_labels: Vec<f64> = Vec::with_capacity(2 * split);
    let mut held_examples: Vec<SparseVector> = Vec::with_capacity(2 * (per_class - split));
    let mut held_labels: Vec<f64> = Vec::with_capacity(2 * (per_class - split));
    for (class, label) in [(&positives, 1.0), (&negatives, 0.0)] {
        for (i, x) in class.iter().enumerate() {
            if i < split {
                fit_examples.push(x.clone());
                fit_labels.push(label);
            } else {
                held_examples.push(x.clone());
                held_labels.push(label);
            }
        }
    }

    let mut grid_accuracies = Vec::with_capacity(config.l2_grid.len());
    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None; // (acc, l2, w, b)
    for &l2 in &config.l2_grid {
        let (weights, bias) = fit_logistic(&fit_examples, &fit_labels, num_buckets, l2, config);
        let accuracy = held_out_accuracy(&held_examples, &held_labels, &weights, bias);
        grid_accuracies.push((l2, accuracy));
        let better = match &best {
            None => true,
            Some((best_acc, best_l2, _, _)) => {
                accuracy > *best_acc || (accuracy == *best_acc && l2 < *best_l2)
            }
        };
        if better {
            best = Some((accuracy, l2, weights, bias));
        }
    }
    let (accuracy, l2, weights, bias) = best.expect("grid is nonempty");

    // Platt-calibrate on the held-out decision values.
    let held_scores: Vec<f64> = held_examples
        .iter()
        .map(|x| dot_sparse(&weights, x) + bias)
        .collect();
    let held_bool: Vec<bool> = held_labels.iter().map(|&y| y == 1.0).collect();
    let platt = platt_fit(&held_scores, &held_bool)?;

    let model = LinearModel::new(weights, bias, l2, Some(platt))?;
    Ok(TrainOutcome {
        model,
        held_out_accuracy: accuracy,
        grid_accuracies,
        balanced_per_class: per_class,
    })
}

/// Fit Platt calibration `p(s) = 1 / (1 + exp(a*s + b))` by Newton's method
/// with backtracking, using the standard smoothed targets
/// `(n_pos + 1) / (n_pos + 2)` and `1 / (n_neg + 2)` so separable inputs
/// still have a finite optimum. At most 100 iterations, gradient tolerance
/// 1e-9.
pub fn platt_fit(scores: &[f64], labels: &[bool]) -> Result<PlattParams> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::InvalidConfig(
            "platt_fit needs equally many scores and labels, at least one".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("platt_fit scores must be finite".into()));
    }
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi_target = (prior1 + 1.0) / (prior1 + 2.0);
    let lo_target = 1.0 / (prior0 + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&l| if l { hi_target } else { lo_target })
        .collect();

    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| {
                let f = a * s + b;
                if f >= 0.0 {
                    t * f + (-f).exp().ln_1p()
                } else {
                    (t - 1.0) * f + f.exp().ln_1p()
                }
            })
            .sum()
    };

    const SIGMA: f64 = 1e-12; // Hessian ridge for numerical safety.
    const TOLERANCE: f64 = 1e-9;
    const MIN_STEP: f64 = 1e-10;
    let mut a = 0.0f64;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21) = (SIGMA, SIGMA, 0.0f64);
        let (mut g1, mut g2) = (0.0f64, 0.0f64);
        for (&s, &t) in scores.iter().zip(&targets) {
            let f = a * s + b;
            // p = 1 / (1 + exp(f)), q = 1 - p, on the stable branch.
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = t - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < TOLERANCE && g2.abs() < TOLERANCE {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut stepsize = 1.0f64;
        while stepsize >= MIN_STEP {
            let (na, nb) = (a + stepsize * da, b + stepsize * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * stepsize * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            stepsize *= 0.5;
        }
        if stepsize < MIN_STEP {
            break; // Line search exhausted; current point is the answer.
        }
    }
    Ok(PlattParams { a, b })
}

/// Apply Platt calibration to a decision value.
pub fn calibrate(params: PlattParams, score: f64) -> f64 {
    let f = params.a * score + params.b;
    if f >= 0.0 {
        let e = (-f).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + f.exp())
    }
}

/// Log-odds of a probability, with the probability clamped to
/// `[1e-12, 1 - 1e-12]` so boundary values stay finite.
pub fn clf_log_weight(rho: f64) -> f64 {
    let clamped = rho.clamp(1e-12, 1.0 - 1e-12);
    (clamped / (1.0 - clamped)).ln()
}
