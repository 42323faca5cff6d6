//! One-vs-rest linear SVM trained by Pegasos-style stochastic subgradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_EPOCHS: usize = 100;

/// Per-class hyperplanes over mean-centered features.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    /// `weights[c]` is the hyperplane of class `c` against the rest.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Training mean, subtracted before scoring.
    pub mean: Vec<f64>,
    pub lambda: f64,
    pub seed: u64,
}

impl SvmModel {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().flatten().chain(&self.bias).map(|w| w * w).sum::<f64>().sqrt()
    }
}

pub(crate) fn check_matrix(features: &[Vec<f64>]) -> Result<usize> {
    let dim = features.first().ok_or_else(|| Error::InsufficientData("no samples".into()))?.len();
    if let Some(i) = features.iter().position(|f| f.len() != dim) {
        return Err(Error::ShapeMismatch(format!("sample {i} has {} values, expected {dim}", features[i].len())));
    }
    Ok(dim)
}

pub(crate) fn mean_of(features: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let n = features.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Minimizes `lambda/2 |w|^2 + mean hinge` per class with step `1/(lambda t)`.
/// The bias is an extra weight on a constant-1 feature and is regularized with
/// the rest. Sample order is reshuffled every epoch from `seed`.
pub fn svm_train(features: &[Vec<f64>], labels: &[usize], lambda: f64, epochs: usize, seed: u64) -> Result<SvmModel> {
    let dim = check_matrix(features)?;
    if labels.len() != features.len() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} samples", labels.len(), features.len())));
    }
    if !(lambda > 0.0) || epochs == 0 {
        return Err(Error::InvalidConfig(format!("lambda {lambda} and epochs {epochs} must be positive")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let present = (0..classes).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(Error::InsufficientData("svm needs at least two classes".into()));
    }
    let mean = mean_of(features, dim);
    let centered: Vec<Vec<f64>> = features.iter().map(|f| f.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();

    // w = scale * v, so the shrink step is O(1).
    let mut v = vec![vec![0.0; dim + 1]; classes];
    let mut scale = vec![1.0; classes];
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 1.0 / lambda.sqrt();
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &centered[i];
            for c in 0..classes {
                let y = if labels[i] == c { 1.0 } else { -1.0 };
                let vc = &mut v[c];
                let margin = y * scale[c] * (dot(&vc[..dim], x) + vc[dim]);
                if t == 1 {
                    // (1 - eta*lambda) is exactly 0 at t = 1.
                    vc.iter_mut().for_each(|w| *w = 0.0);
                    scale[c] = 1.0;
                } else {
                    scale[c] *= 1.0 - eta * lambda;
                }
                if margin < 1.0 {
                    let step = eta * y / scale[c];
                    for (w, xv) in vc[..dim].iter_mut().zip(x) {
                        *w += step * xv;
                    }
                    vc[dim] += step;
                }
                // Projection onto the ball of radius 1/sqrt(lambda).
                let norm = scale[c] * dot(vc, vc).sqrt();
                if norm > radius {
                    scale[c] *= radius / norm;
                }
            }
        }
    }
    let weights = v.iter().zip(&scale).map(|(vc, s)| vc[..dim].iter().map(|w| w * s).collect()).collect();
    let bias = v.iter().zip(&scale).map(|(vc, s)| vc[dim] * s).collect();
    Ok(SvmModel { weights, bias, mean, lambda, seed })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Predicted label (lowest class on ties) and per-class scores.
pub fn svm_predict(model: &SvmModel, feature: &[f64]) -> Result<(usize, Vec<f64>)> {
    if feature.len() != model.dim() {
        return Err(Error::ShapeMismatch(format!("feature of {} values, model expects {}", feature.len(), model.dim())));
    }
    let centered: Vec<f64> = feature.iter().zip(&model.mean).map(|(x, m)| x - m).collect();
    let scores: Vec<f64> = model.weights.iter().zip(&model.bias).map(|(w, b)| dot(w, &centered) + b).collect();
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    Ok((best, scores))
}

/// Fraction of samples whose predicted label matches.
pub fn svm_accuracy(model: &SvmModel, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let mut correct = 0;
    for (f, &l) in features.iter().zip(labels) {
        if svm_predict(model, f)?.0 == l {
            correct += 1;
        }
    }
    Ok(correct as f64 / features.len().max(1) as f64)
}
