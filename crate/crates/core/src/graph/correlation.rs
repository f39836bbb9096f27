use crate::error::{Error, Result};

/// Pearson correlation between the columns of an observation matrix.
///
/// Columns with zero variance have no defined correlation. They are marked
/// invalid and every entry in their row and column is zero, diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n_features: usize,
    corr: Vec<f64>,
    valid: Vec<bool>,
}

impl CorrelationMatrix {
    /// Wraps an existing correlation matrix after checking its invariants.
    pub fn from_raw(n_features: usize, corr: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if corr.len() != n_features * n_features || valid.len() != n_features {
            return Err(Error::Dimension(format!(
                "correlation matrix for {n_features} features needs {} entries and {n_features} flags, got {} and {}",
                n_features * n_features,
                corr.len(),
                valid.len()
            )));
        }
        for (idx, &r) in corr.iter().enumerate() {
            if !r.is_finite() || r.abs() > 1.0 + 1e-12 {
                return Err(Error::InvalidValue(format!(
                    "correlation entry ({}, {}) = {r} outside [-1, 1]",
                    idx / n_features,
                    idx % n_features
                )));
            }
        }
        for i in 0..n_features {
            if valid[i] && corr[i * n_features + i] != 1.0 {
                return Err(Error::InvalidValue(format!(
                    "diagonal entry {i} of a valid feature must be 1"
                )));
            }
        }
        Ok(Self {
            n_features,
            corr,
            valid,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.corr[i * self.n_features + j]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.corr
    }
}

/// Sample Pearson correlation of the columns of a row-major `rows x cols` matrix.
///
/// Means are removed first and the cross products are accumulated on the
/// centered data (two passes), which keeps cancellation error small.
pub fn correlation_from_data(data: &[f64], rows: usize, cols: usize) -> Result<CorrelationMatrix> {
    if rows < 2 {
        return Err(Error::Dimension(format!(
            "correlation needs at least 2 observations, got {rows}"
        )));
    }
    if cols == 0 {
        return Err(Error::Dimension(
            "correlation needs at least 1 feature".into(),
        ));
    }
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "observation matrix {rows}x{cols} needs {} values, got {}",
            rows * cols,
            data.len()
        )));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "non-finite observation at row {}, column {}",
            pos / cols,
            pos % cols
        )));
    }

    let first = &data[..cols];
    let mut valid = vec![false; cols];
    for row in data.chunks_exact(cols).skip(1) {
        for ((flag, &v), &v0) in valid.iter_mut().zip(row).zip(first) {
            *flag |= v != v0;
        }
    }

    let mut mean = vec![0.0; cols];
    for row in data.chunks_exact(cols) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= rows as f64;
    }

    // Upper triangle of the centered cross-product matrix.
    let mut cross = vec![0.0; cols * cols];
    let mut centered = vec![0.0; cols];
    for row in data.chunks_exact(cols) {
        for ((c, &v), &m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for a in 0..cols {
            let xa = centered[a];
            let dst = &mut cross[a * cols + a..(a + 1) * cols];
            for (acc, &xb) in dst.iter_mut().zip(&centered[a..]) {
                *acc += xa * xb;
            }
        }
    }

    let mut corr = vec![0.0; cols * cols];
    for a in 0..cols {
        if !valid[a] {
            continue;
        }
        corr[a * cols + a] = 1.0;
        for b in a + 1..cols {
            if !valid[b] {
                continue;
            }
            let denom = (cross[a * cols + a] * cross[b * cols + b]).sqrt();
            let r = if denom > 0.0 {
                (cross[a * cols + b] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            corr[a * cols + b] = r;
            corr[b * cols + a] = r;
        }
    }

    Ok(CorrelationMatrix {
        n_features: cols,
        corr,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn identical_columns_are_perfectly_correlated() {
        let data = [1.0, 1.0, 3.0, 3.0, -2.0, -2.0];
        let r = correlation_from_data(&data, 3, 2).unwrap();
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(1, 0), 1.0);
    }

    #[test]
    fn constant_column_is_flagged_and_zeroed() {
        let data = [1.0, 5.0, 2.0, 2.0, 5.0, 4.0, 3.0, 5.0, 7.0];
        let r = correlation_from_data(&data, 3, 3).unwrap();
        assert_eq!(r.valid_mask(), &[true, false, true]);
        for j in 0..3 {
            assert_eq!(r.get(1, j), 0.0);
            assert_eq!(r.get(j, 1), 0.0);
        }
        assert_eq!(r.get(0, 0), 1.0);
    }

    #[test]
    fn matches_two_pass_oracle() {
        let data = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 7.0];
        let r = correlation_from_data(&data, 4, 2).unwrap();
        let expected = two_pass_pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 7.0]);
        assert!((r.get(0, 1) - expected).abs() < 1e-12);
        // Closed form: sxy = 8.5, sxx = 5, syy = 14.75.
        assert!((expected - 8.5 / (5.0f64 * 14.75).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_single_observation() {
        let err = correlation_from_data(&[1.0, 2.0], 1, 2).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn from_raw_checks_range() {
        assert!(CorrelationMatrix::from_raw(2, vec![1.0, 1.5, 1.5, 1.0], vec![true; 2]).is_err());
        assert!(CorrelationMatrix::from_raw(2, vec![1.0, -0.5, -0.5, 1.0], vec![true; 2]).is_ok());
    }
}
