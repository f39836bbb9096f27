//! Dataset ingestion and feature preprocessing.

mod csv_io;
mod dataset;
mod filter;
mod idx;
pub mod synthetic;

pub use csv_io::read_csv_regression;
pub use dataset::{Dataset, Normalization, TargetValues};
pub use filter::{filter_features, standardize, Standardizer};
pub use idx::{read_idx, read_idx_limited, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
