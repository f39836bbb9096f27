//! Graph construction and random-walk neighbor selection.
//!
//! The pipeline is `data -> CorrelationMatrix -> SimilarityGraph -> TransitionMatrix
//! -> VisitMatrix -> NeighborTable`. Large sparse graphs can skip the dense
//! matrices entirely through [`sparse_neighbors_bfs`], which produces the same
//! table as the dense path.

mod correlation;
mod neighbors;
mod similarity;
mod table_io;
mod walk;

pub use correlation::{correlation_from_data, CorrelationMatrix};
pub use neighbors::{select_neighbors, sparse_neighbors_bfs, ConvVariant, NeighborTable, TieBreak};
pub use similarity::{grid_graph, similarity_from_correlation, SimilarityGraph, StorageKind};
pub use table_io::{TableJson, TABLE_FORMAT_VERSION, TABLE_MAGIC};
pub use walk::{
    expected_visits, stationary_ratio_check, transition_from_similarity, RowKind,
    StationaryDiagnostic, StationaryReport, TransitionMatrix, VisitMatrix,
};
