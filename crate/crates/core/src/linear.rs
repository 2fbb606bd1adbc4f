//! Logistic models over hashed sparse features, trained by deterministic
//! full-batch gradient descent from an all-zero start.
//!
//! Examples are weighted either uniformly or class-balanced (positives and
//! negatives each carry half of the total weight). The span detector uses
//! balanced weights so rare gold spans among all candidates are not
//! swamped; one-vs-rest models use uniform weights, so a pair or span with
//! no distinguishing signal falls to the majority class.
//!
//! Each coordinate's step is divided by its own curvature bound
//! `d_j = 0.25 * sum_i w_i |x_ij| (|x_i|_1 + 1)` (the bias counts as a
//! constant feature 1). By Cauchy-Schwarz, `(x.v)^2 <= |x|_1 sum_j |x_j| v_j^2`,
//! so `diag(d)` majorises the Hessian of the loss and every learning rate
//! below 2 decreases the objective monotonically. Rare features, whose bound
//! is small, take proportionally larger steps.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{SparseVector, FEATURE_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// log(1 + e^z), stable for large |z|.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

mod sparse_weights {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(weights: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let nz: Vec<(u32, f64)> = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i as u32, *w))
            .collect();
        nz.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let nz: Vec<(u32, f64)> = Vec::deserialize(d)?;
        let mut dense = vec![0.0; FEATURE_DIM];
        for (i, w) in nz {
            let slot = dense
                .get_mut(i as usize)
                .ok_or_else(|| serde::de::Error::custom("weight index out of range"))?;
            *slot = w;
        }
        Ok(dense)
    }
}

/// Binary logistic scorer `σ(w·x + b)`. Weights are stored densely and
/// serialised as non-zero `(index, weight)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLogistic {
    #[serde(with = "sparse_weights")]
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Default for BinaryLogistic {
    fn default() -> Self {
        Self {
            weights: vec![0.0; FEATURE_DIM],
            bias: 0.0,
        }
    }
}

impl BinaryLogistic {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        sigmoid(self.margin(x))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Regularised training objective before each epoch's update, then the
    /// final value (length `epochs + 1`).
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Uniform,
    Balanced,
}

fn uniform_weights(labels: &[bool]) -> Vec<f64> {
    vec![1.0 / labels.len() as f64; labels.len()]
}

fn balanced_weights(labels: &[bool]) -> Vec<f64> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|l| **l).count() as f64;
    let neg = n - pos;
    labels
        .iter()
        .map(|&l| {
            let count = if l { pos } else { neg };
            if count == 0.0 || pos == 0.0 || neg == 0.0 {
                1.0 / n
            } else {
                0.5 / count
            }
        })
        .collect()
}

/// Trains one binary model. `labels[i]` is the target of `xs[i]`.
pub fn train_binary(
    xs: &[SparseVector],
    labels: &[bool],
    weighting: Weighting,
    config: &GdConfig,
) -> (BinaryLogistic, TrainReport) {
    assert_eq!(xs.len(), labels.len());
    let mut model = BinaryLogistic::default();
    let mut report = TrainReport::default();
    if xs.is_empty() {
        return (model, report);
    }
    let sample_weights = match weighting {
        Weighting::Uniform => uniform_weights(labels),
        Weighting::Balanced => balanced_weights(labels),
    };
    // only coordinates that appear in the data can ever become non-zero
    let mut active: Vec<u32> = xs.iter().flat_map(|x| x.entries.iter().map(|e| e.0)).collect();
    active.sort_unstable();
    active.dedup();
    let mut grad = vec![0.0; FEATURE_DIM];
    let mut curvature = vec![0.0; FEATURE_DIM];
    let mut curvature_b = 0.0;
    for (x, &sw) in xs.iter().zip(&sample_weights) {
        let l1 = x.entries.iter().map(|e| e.1.abs()).sum::<f64>() + 1.0;
        curvature_b += 0.25 * sw * l1;
        for &(i, v) in &x.entries {
            curvature[i as usize] += 0.25 * sw * v.abs() * l1;
        }
    }

    for _ in 0..config.epochs {
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for ((x, &y), &sw) in xs.iter().zip(labels).zip(&sample_weights) {
            let z = model.margin(x);
            let target = if y { 1.0 } else { 0.0 };
            loss += sw * (softplus(z) - target * z);
            let g = sw * (sigmoid(z) - target);
            grad_b += g;
            for &(i, v) in &x.entries {
                grad[i as usize] += g * v;
            }
        }
        loss += 0.5 * config.l2 * active.iter().map(|&i| { let w = model.weights[i as usize]; w * w }).sum::<f64>();
        report.loss_curve.push(loss);
        for &i in &active {
            let i = i as usize;
            let w = &mut model.weights[i];
            *w -= config.learning_rate * (grad[i] + config.l2 * *w) / (curvature[i] + config.l2);
            grad[i] = 0.0;
        }
        model.bias -= config.learning_rate * grad_b / curvature_b;
    }
    report.loss_curve.push(objective(&model, xs, labels, &sample_weights, config.l2, &active));
    (model, report)
}

fn objective(
    model: &BinaryLogistic,
    xs: &[SparseVector],
    labels: &[bool],
    sample_weights: &[f64],
    l2: f64,
    active: &[u32],
) -> f64 {
    let data: f64 = xs
        .iter()
        .zip(labels)
        .zip(sample_weights)
        .map(|((x, &y), &sw)| {
            let z = model.margin(x);
            sw * (softplus(z) - if y { z } else { 0.0 })
        })
        .sum();
    data + 0.5 * l2 * active.iter().map(|&i| { let w = model.weights[i as usize]; w * w }).sum::<f64>()
}

/// One-vs-rest multiclass logistic model; predicts the class with the
/// highest binary score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRest {
    pub classes: Vec<String>,
    pub models: Vec<BinaryLogistic>,
}

impl OneVsRest {
    /// `targets[i]` indexes into `classes`.
    pub fn train(classes: Vec<String>, xs: &[SparseVector], targets: &[usize], config: &GdConfig) -> (Self, Vec<TrainReport>) {
        let mut models = Vec::with_capacity(classes.len());
        let mut reports = Vec::with_capacity(classes.len());
        for k in 0..classes.len() {
            let labels: Vec<bool> = targets.iter().map(|&t| t == k).collect();
            let (m, r) = train_binary(xs, &labels, Weighting::Uniform, config);
            models.push(m);
            reports.push(r);
        }
        (Self { classes, models }, reports)
    }

    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        self.models.iter().map(|m| m.score(x)).collect()
    }

    /// Index and score of the best class; ties go to the earlier class.
    pub fn predict(&self, x: &SparseVector) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, m) in self.models.iter().enumerate() {
            let z = m.margin(x);
            if best.is_none_or(|(_, bz)| z > bz) {
                best = Some((k, z));
            }
        }
        best.map(|(k, z)| (k, sigmoid(z)))
    }
}
