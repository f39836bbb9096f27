//! Graph convolutions driven by random-walk neighborhoods.
//!
//! The crate is organised the way data flows through it:
//!
//! - [`graph`]: similarity graphs (from correlations or grids), the random-walk
//!   transition matrix, expected-visit matrices and the [`graph::NeighborTable`]
//!   that fixes, for every node, the ordered list of `p` nodes a convolution
//!   reads from.
//! - [`tensor`]: a small dense row-major tensor plus the gather / tensor-dot /
//!   scatter-add kernels the convolution is built from.
//! - [`nn`]: layers with analytic backward passes, the architecture grammar
//!   (`C20-FC512`) and checkpoints.
//! - [`train`]: losses, metrics, Adam and the seeded mini-batch loop.
//! - [`data`]: IDX and CSV ingestion, feature filtering and standardization.
//! - [`pipeline`]: wiring that builds a correlation graph from the training
//!   split only.
//!
//! Preprocessing and training both run in `f64`.

mod codec;
pub mod data;
pub mod digest;
pub mod error;
pub mod graph;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorKind, Result};
