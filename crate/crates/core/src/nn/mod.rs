//! Layers with analytic gradients and the networks built from them.

mod activation;
mod checkpoint;
mod dense;
mod flatten;
mod graph_conv;
mod heads;
mod init;
mod network;

pub use activation::{apply_mask, relu_backward, relu_forward, Dropout, Mode};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC};
pub use dense::{DenseGrads, DenseLayer};
pub use flatten::{flatten_nodes, unflatten_nodes};
pub use graph_conv::{GraphConvGrads, GraphConvLayer};
pub use heads::{linear_rmse_head, rmse_loss, softmax, softmax_cross_entropy_head, HeadOutput};
pub use init::glorot_uniform;
pub use network::{
    count_parameters, parse_architecture, parse_hidden_layers, HiddenLayer, Layer, Network,
    NetworkConfig, NetworkGrads, Targets, Task, Trace,
};
