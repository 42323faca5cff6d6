//! Softmax with mean cross-entropy.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct SoftmaxXent {
    pub loss: f64,
    pub probs: Tensor,
    pub grad_logits: Tensor,
}

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let [_, classes] = logits.dims2("softmax logits")?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::from_vec(logits.dims(), out)
}

pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<SoftmaxXent> {
    let [n, classes] = logits.dims2("softmax logits")?;
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0;
    let mut grad = probs.data().to_vec();
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * classes..(i + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[label] - max - log_sum;
        grad[i * classes + label] -= 1.0;
    }
    let scale = 1.0 / n as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok(SoftmaxXent {
        loss: loss * scale,
        probs,
        grad_logits: Tensor::from_vec(&[n, classes], grad)?,
    })
}
