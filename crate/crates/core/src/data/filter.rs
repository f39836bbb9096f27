use serde::{Deserialize, Serialize};

use super::{Dataset, Normalization};
use crate::error::{Error, Result};

/// Keeps columns with at least `min_active` nonzero entries and, when
/// `drop_constant` is set, more than one distinct value.
pub fn filter_features(data: &Dataset, min_active: usize, drop_constant: bool) -> Result<Dataset> {
    let n = data.n_features();
    let mut active = vec![0usize; n];
    let mut varies = vec![false; n];
    for i in 0..data.n_obs() {
        let row = data.row(i);
        let first = data.row(0);
        for c in 0..n {
            if row[c] != 0.0 {
                active[c] += 1;
            }
            if row[c] != first[c] {
                varies[c] = true;
            }
        }
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&c| active[c] >= min_active && (!drop_constant || varies[c]))
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    log::debug!("feature filter kept {} of {n} columns", keep.len());
    data.select_columns(&keep)
}

/// Per-feature mean and standard deviation fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population statistics of each column. A zero deviation is an error since
    /// such columns should have been removed by `filter_features`.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let (m, n) = (data.n_obs(), data.n_features());
        if m == 0 {
            return Err(Error::Dimension(
                "cannot standardize an empty dataset".into(),
            ));
        }
        let mut means = vec![0.0; n];
        for i in 0..m {
            for (s, v) in means.iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        means.iter_mut().for_each(|s| *s /= m as f64);
        let mut vars = vec![0.0; n];
        for i in 0..m {
            for ((s, v), mu) in vars.iter_mut().zip(data.row(i)).zip(&means) {
                *s += (v - mu) * (v - mu);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|s| (s / m as f64).sqrt()).collect();
        if let Some(c) = stds.iter().position(|&s| s == 0.0) {
            return Err(Error::Config(format!(
                "feature {} (original column {}) has zero variance; run filter_features with drop_constant first",
                c,
                data.feature_index_map()[c]
            )));
        }
        Ok(Self { means, stds })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let n = data.n_features();
        if n != self.means.len() {
            return Err(Error::Dimension(format!(
                "standardizer fitted on {} features, data has {n}",
                self.means.len()
            )));
        }
        let features = data
            .features()
            .chunks(n)
            .flat_map(|row| {
                row.iter()
                    .zip(&self.means)
                    .zip(&self.stds)
                    .map(|((v, mu), sd)| (v - mu) / sd)
            })
            .collect();
        let out = Dataset::new(features, data.n_obs(), n, data.targets().clone())?;
        Ok(out.with_meta(
            data.feature_index_map().to_vec(),
            Normalization::Standardized {
                means: self.means.clone(),
                stds: self.stds.clone(),
            },
        ))
    }
}

/// Standardizes `train` and `test` with statistics from `train` alone.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train)?, s.apply(test)?, s))
}
