//! End-to-end preparation of a train/test split for graph convolution:
//! feature filtering, normalization, and a correlation-graph neighbor table
//! estimated from the training rows only.

use serde::{Deserialize, Serialize};

use crate::data::{filter_features, Dataset, Normalization, Standardizer};
use crate::error::Result;
use crate::graph::{
    correlation_from_data, expected_visits, select_neighbors, similarity_from_correlation,
    transition_from_similarity, ConvVariant, CorrelationMatrix, NeighborTable, TieBreak,
    TransitionMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: u32,
    pub p: usize,
    pub variant: ConvVariant,
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub min_active: usize,
    pub drop_constant: bool,
    /// Standardize with training statistics after filtering.
    pub standardize: bool,
}

/// Neighbor table and the intermediate matrices it came from.
#[derive(Debug, Clone)]
pub struct CorrelationGraph {
    pub correlation: CorrelationMatrix,
    pub transition: TransitionMatrix,
    pub table: NeighborTable,
}

/// Builds the correlation graph of the columns of `train`.
pub fn correlation_graph(train: &Dataset, cfg: &GraphConfig) -> Result<CorrelationGraph> {
    let correlation = correlation_from_data(train.features(), train.n_obs(), train.n_features())?;
    let transition = transition_from_similarity(&similarity_from_correlation(&correlation));
    let visits = expected_visits(&transition, cfg.k);
    let corr = matches!(cfg.variant, ConvVariant::Conv2).then_some(&correlation);
    let table = select_neighbors(&visits, cfg.p, cfg.variant, corr, cfg.tie_break)?;
    Ok(CorrelationGraph {
        correlation,
        transition,
        table,
    })
}

#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub graph: CorrelationGraph,
    /// Original column index of every kept feature.
    pub kept_columns: Vec<usize>,
}

/// Filters and normalizes both splits with training-set decisions and builds
/// the neighbor table from the training features alone.
pub fn prepare_split(
    train: &Dataset,
    test: &Dataset,
    features: &FeatureConfig,
    graph: &GraphConfig,
) -> Result<PreparedSplit> {
    let mut train = filter_features(train, features.min_active, features.drop_constant)?;
    let kept_columns = train.feature_index_map().to_vec();
    let mut test = test.select_original_columns(&kept_columns)?;
    if features.standardize {
        let s = Standardizer::fit(&train)?;
        train = s.apply(&train)?;
        test = s.apply(&test)?;
    } else if let Normalization::Standardized { .. } = train.normalization() {
        log::debug!("input already standardized");
    }
    let graph = correlation_graph(&train, graph)?;
    Ok(PreparedSplit {
        train,
        test,
        graph,
        kept_columns,
    })
}
