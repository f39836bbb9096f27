use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Scalar loss plus its gradient with respect to the head input.
#[derive(Debug, Clone)]
pub struct HeadOutput {
    pub loss: f64,
    pub grad: Tensor,
}

/// Row-wise softmax of `(M, C)` logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank(2, "softmax")?;
    let c = logits.shape()[1];
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(c.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::new(logits.shape(), out)
}

/// Mean cross-entropy of softmax probabilities against integer labels.
pub fn softmax_cross_entropy_head(logits: &Tensor, labels: &[usize]) -> Result<HeadOutput> {
    logits.expect_rank(2, "softmax head")?;
    let (m, c) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != m {
        return Err(Error::Dimension(format!(
            "{m} logit rows but {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidValue(format!(
            "label {bad} outside {c} classes"
        )));
    }
    let probs = softmax(logits)?;
    let mut grad = probs.into_data();
    let mut loss = 0.0;
    for (row, &label) in grad.chunks_exact_mut(c).zip(labels) {
        loss -= row[label].max(f64::MIN_POSITIVE).ln();
        row[label] -= 1.0;
        for g in row.iter_mut() {
            *g /= m as f64;
        }
    }
    Ok(HeadOutput {
        loss: loss / m as f64,
        grad: Tensor::new(&[m, c], grad)?,
    })
}

/// `sqrt(mean((pred - target)^2))` and its gradient. A zero loss has zero gradient.
pub fn rmse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let rmse = mse.sqrt();
    let grad = if rmse > 0.0 {
        pred.iter()
            .zip(target)
            .map(|(p, t)| (p - t) / (n * rmse))
            .collect()
    } else {
        vec![0.0; pred.len()]
    };
    Ok((rmse, grad))
}

/// RMSE head over a single regression output, `pred` of shape `(M, 1)`.
pub fn linear_rmse_head(pred: &Tensor, targets: &[f64]) -> Result<HeadOutput> {
    pred.expect_rank(2, "regression head")?;
    if pred.shape()[1] != 1 {
        return Err(Error::Dimension(format!(
            "regression head expects one output column, got {:?}",
            pred.shape()
        )));
    }
    let (loss, grad) = rmse_loss(pred.data(), targets)?;
    Ok(HeadOutput {
        loss,
        grad: Tensor::new(pred.shape(), grad)?,
    })
}
