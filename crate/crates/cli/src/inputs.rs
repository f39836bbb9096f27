//! Loading datasets and build-graph outputs.

use std::fs;
use std::path::{Path, PathBuf};

use graphconv::data::{read_csv_regression, read_idx_limited, Dataset, Standardizer};
use graphconv::graph::NeighborTable;
use graphconv::nn::Task;
use graphconv::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::DataArgs;

pub const TABLE_FILE: &str = "table.gnbt";
pub const FEATURES_FILE: &str = "features.json";
pub const STANDARDIZER_FILE: &str = "standardizer.json";

const MNIST_TRAIN: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
const MNIST_TEST: (&str, &str) = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");

impl DataArgs {
    pub fn task(&self) -> Result<Task> {
        match (&self.mnist_dir, &self.csv) {
            (Some(_), _) => Ok(Task::Classification { classes: 10 }),
            (None, Some(_)) => Ok(Task::Regression),
            (None, None) => Err(Error::Config(
                "give --mnist-dir or --csv with --target".into(),
            )),
        }
    }

    /// Whether features get standardized with training statistics.
    pub fn standardized(&self) -> bool {
        self.csv.is_some()
    }

    pub fn load_train(&self) -> Result<Dataset> {
        self.task()?;
        if let Some(dir) = &self.mnist_dir {
            return read_idx_limited(
                &dir.join(MNIST_TRAIN.0),
                &dir.join(MNIST_TRAIN.1),
                self.train_limit,
            );
        }
        let path = self.csv.as_ref().expect("checked by task()");
        limit(read_csv_regression(path, self.target()?)?, self.train_limit)
    }

    pub fn load_test(&self) -> Result<Option<Dataset>> {
        self.task()?;
        if let Some(dir) = &self.mnist_dir {
            return read_idx_limited(
                &dir.join(MNIST_TEST.0),
                &dir.join(MNIST_TEST.1),
                self.test_limit,
            )
            .map(Some);
        }
        match &self.test_csv {
            Some(path) => Ok(Some(limit(
                read_csv_regression(path, self.target()?)?,
                self.test_limit,
            )?)),
            None => Ok(None),
        }
    }

    fn target(&self) -> Result<&str> {
        self.target
            .as_deref()
            .ok_or_else(|| Error::Config("--csv needs --target".into()))
    }

    /// Every input file, for hashing into a manifest.
    pub fn files(&self) -> Vec<PathBuf> {
        let mut files = Vec::new();
        if let Some(dir) = &self.mnist_dir {
            for name in [MNIST_TRAIN.0, MNIST_TRAIN.1, MNIST_TEST.0, MNIST_TEST.1] {
                files.push(dir.join(name));
            }
        }
        files.extend(self.csv.iter().cloned());
        files.extend(self.test_csv.iter().cloned());
        files.into_iter().filter(|p| p.exists()).collect()
    }
}

fn limit(data: Dataset, n: Option<usize>) -> Result<Dataset> {
    match n {
        Some(n) if n < data.n_obs() => Ok(data.split_at(n)?.0),
        _ => Ok(data),
    }
}

/// Which original columns a table's nodes correspond to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub original_width: usize,
    pub kept_columns: Vec<usize>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// A build-graph output directory.
pub struct GraphDir {
    pub table: NeighborTable,
    pub features: FeatureMap,
}

impl GraphDir {
    pub fn load(dir: &Path) -> Result<Self> {
        let table = NeighborTable::read_file(&dir.join(TABLE_FILE))?;
        let features: FeatureMap = read_json(&dir.join(FEATURES_FILE))?;
        if features.kept_columns.len() != table.n_nodes() {
            return Err(Error::TableMismatch {
                expected: format!("{} nodes", features.kept_columns.len()),
                actual: format!(
                    "{} nodes in {}",
                    table.n_nodes(),
                    dir.join(TABLE_FILE).display()
                ),
            });
        }
        Ok(Self { table, features })
    }

    /// Restricts a dataset to the table's features.
    pub fn select(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.features.original_width {
            return Err(Error::Dimension(format!(
                "graph was built for {} features, data has {}",
                self.features.original_width,
                data.n_features()
            )));
        }
        data.select_original_columns(&self.features.kept_columns)
    }
}

pub fn load_standardizer(path: &Path) -> Result<Standardizer> {
    read_json(path)
}
