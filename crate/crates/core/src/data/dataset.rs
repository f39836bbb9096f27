use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Targets;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetValues {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl TargetValues {
    pub fn len(&self) -> usize {
        match self {
            TargetValues::Classes(c) => c.len(),
            TargetValues::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            TargetValues::Classes(c) => TargetValues::Classes(rows.iter().map(|&r| c[r]).collect()),
            TargetValues::Values(v) => TargetValues::Values(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    pub fn as_targets(&self) -> Targets<'_> {
        match self {
            TargetValues::Classes(c) => Targets::Labels(c),
            TargetValues::Values(v) => Targets::Values(v),
        }
    }
}

/// Record of the transform applied to the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    None,
    /// Raw bytes divided by 255.
    Scaled255,
    Standardized {
        means: Vec<f64>,
        stds: Vec<f64>,
    },
}

/// `M x N` feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_obs: usize,
    n_features: usize,
    targets: TargetValues,
    /// Original column of every kept column, strictly increasing.
    feature_index_map: Vec<usize>,
    normalization: Normalization,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_obs: usize,
        n_features: usize,
        targets: TargetValues,
    ) -> Result<Self> {
        if features.len() != n_obs * n_features {
            return Err(Error::Dimension(format!(
                "{n_obs}x{n_features} dataset needs {} values, got {}",
                n_obs * n_features,
                features.len()
            )));
        }
        if targets.len() != n_obs {
            return Err(Error::Dimension(format!(
                "{n_obs} observations but {} targets",
                targets.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features.max(1),
                pos % n_features.max(1)
            )));
        }
        if let TargetValues::Values(v) = &targets {
            if let Some(pos) = v.iter().position(|t| !t.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "non-finite target at row {pos}"
                )));
            }
        }
        Ok(Self {
            features,
            n_obs,
            n_features,
            targets,
            feature_index_map: (0..n_features).collect(),
            normalization: Normalization::None,
        })
    }

    pub(crate) fn with_meta(
        mut self,
        feature_index_map: Vec<usize>,
        normalization: Normalization,
    ) -> Self {
        debug_assert_eq!(feature_index_map.len(), self.n_features);
        self.feature_index_map = feature_index_map;
        self.normalization = normalization;
        self
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn targets(&self) -> &TargetValues {
        &self.targets
    }

    pub fn feature_index_map(&self) -> &[usize] {
        &self.feature_index_map
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_obs) {
            return Err(Error::Dimension(format!(
                "row {bad} out of range for {} observations",
                self.n_obs
            )));
        }
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Ok(Self {
            features,
            n_obs: rows.len(),
            n_features: self.n_features,
            targets: self.targets.select(rows),
            feature_index_map: self.feature_index_map.clone(),
            normalization: self.normalization.clone(),
        })
    }

    /// The first `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Self, Self)> {
        let n = n.min(self.n_obs);
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.n_obs).collect();
        Ok((self.subset(&head)?, self.subset(&tail)?))
    }

    /// Keeps the listed columns (positions in this dataset), in increasing order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "selected columns must be strictly increasing".into(),
            ));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::Dimension(format!("column {bad} out of range")));
        }
        let mut features = Vec::with_capacity(self.n_obs * columns.len());
        for i in 0..self.n_obs {
            let row = self.row(i);
            features.extend(columns.iter().map(|&c| row[c]));
        }
        let normalization = match &self.normalization {
            Normalization::Standardized { means, stds } => Normalization::Standardized {
                means: columns.iter().map(|&c| means[c]).collect(),
                stds: columns.iter().map(|&c| stds[c]).collect(),
            },
            other => other.clone(),
        };
        Ok(Self {
            features,
            n_obs: self.n_obs,
            n_features: columns.len(),
            targets: self.targets.clone(),
            feature_index_map: columns.iter().map(|&c| self.feature_index_map[c]).collect(),
            normalization,
        })
    }

    /// Keeps the columns whose original index appears in `original_columns`,
    /// e.g. to apply a training-set feature filter to a test set.
    pub fn select_original_columns(&self, original_columns: &[usize]) -> Result<Self> {
        let positions = original_columns
            .iter()
            .map(|orig| {
                self.feature_index_map
                    .binary_search(orig)
                    .map_err(|_| Error::Dimension(format!("original column {orig} is not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.select_columns(&positions)
    }

    /// Re-inserts dropped columns as zeros, giving `original_width` columns in
    /// original order.
    pub fn restore_dropped(&self, original_width: usize) -> Result<Self> {
        if self
            .feature_index_map
            .last()
            .is_some_and(|&c| c >= original_width)
        {
            return Err(Error::Dimension(
                "original width smaller than kept columns".into(),
            ));
        }
        let mut features = vec![0.0; self.n_obs * original_width];
        for i in 0..self.n_obs {
            for (&orig, &v) in self.feature_index_map.iter().zip(self.row(i)) {
                features[i * original_width + orig] = v;
            }
        }
        Dataset::new(features, self.n_obs, original_width, self.targets.clone())
    }

    /// Features shaped `(M, N, 1)` for a network.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[self.n_obs, self.n_features, 1], self.features.clone())
            .expect("dataset shape is consistent")
    }

    /// Features of the given rows as `(b, N, 1)` and their targets.
    pub fn batch(&self, rows: &[usize]) -> (Tensor, TargetValues) {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        (
            Tensor::new(&[rows.len(), self.n_features, 1], features).expect("consistent shape"),
            self.targets.select(rows),
        )
    }
}
