use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Squared Pearson correlation between predictions and targets.
///
/// This is not the coefficient of determination: any affine rescaling of the
/// predictions leaves it unchanged. Constant inputs have no correlation and
/// yield 0 with a warning.
pub fn r_squared(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.len() < 2 {
        return Err(Error::Dimension(format!(
            "R^2 needs equal lengths of at least 2, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut spp, mut stt, mut spt) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(target) {
        let (dp, dt) = (p - mp, t - mt);
        spp += dp * dp;
        stt += dt * dt;
        spt += dp * dt;
    }
    if spp == 0.0 || stt == 0.0 {
        log::warn!("R^2 undefined for constant predictions or targets; reporting 0");
        return Ok(0.0);
    }
    Ok(spt * spt / (spp * stt))
}

/// Fraction of predictions that differ from the labels.
pub fn error_rate(pred: &[usize], labels: &[usize]) -> Result<f64> {
    if pred.len() != labels.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "error rate needs equal non-empty lengths, got {} and {}",
            pred.len(),
            labels.len()
        )));
    }
    let wrong = pred.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Index of the largest entry in each row of an `(M, C)` tensor; first wins ties.
pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    let c = scores.shape().last().copied().unwrap_or(1).max(1);
    scores
        .data()
        .chunks_exact(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::rmse_loss;

    #[test]
    fn hand_computed_values() {
        let pred = [1.0, 2.0, 3.0, 5.0];
        let target = [1.0, 2.0, 3.0, 4.0];
        let (rmse, _) = rmse_loss(&pred, &target).unwrap();
        assert!((rmse - 0.5).abs() < 1e-12);
        // Deviations: pred (-1.75, -0.75, 0.25, 2.25), target (-1.5, -0.5, 0.5, 1.5).
        // spt = 6.5, spp = 8.75, stt = 5.
        let expected = 6.5 * 6.5 / (8.75 * 5.0);
        assert!((r_squared(&pred, &target).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_affine_predictions() {
        let y = [0.3, -1.2, 4.0, 2.2, 0.0];
        let affine: Vec<f64> = y.iter().map(|v| -3.0 * v + 7.0).collect();
        assert!((r_squared(&affine, &y).unwrap() - 1.0).abs() < 1e-12);
        let (rmse, _) = rmse_loss(&y, &y).unwrap();
        assert_eq!(rmse, 0.0);
    }

    #[test]
    fn constant_predictions_report_zero() {
        assert_eq!(r_squared(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(r_squared(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn error_rate_counts_mistakes() {
        assert_eq!(error_rate(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(error_rate(&[1, 2, 3, 4], &[1, 0, 3, 0]).unwrap(), 0.5);
    }

    #[test]
    fn argmax_picks_first_max() {
        let s = Tensor::new(&[2, 3], vec![0.1, 0.5, 0.5, 2.0, -1.0, 0.0]).unwrap();
        assert_eq!(argmax_rows(&s), vec![1, 0]);
    }
}
