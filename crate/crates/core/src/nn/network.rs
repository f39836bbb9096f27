use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{relu_backward, relu_forward, Dropout, Mode};
use super::dense::DenseLayer;
use super::flatten::{flatten_nodes, unflatten_nodes};
use super::graph_conv::GraphConvLayer;
use super::heads::{linear_rmse_head, softmax_cross_entropy_head, HeadOutput};
use crate::error::{Error, Result};
use crate::graph::NeighborTable;
use crate::rng::{stream_rng, INIT_STREAM};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    Classification { classes: usize },
    Regression,
}

impl Task {
    pub fn n_outputs(&self) -> usize {
        match self {
            Task::Classification { classes } => *classes,
            Task::Regression => 1,
        }
    }
}

/// Everything besides the architecture string that fixes a network's shape
/// and initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_nodes: usize,
    pub d_input: usize,
    pub task: Task,
    pub dropout_rate: f64,
    pub seed: u64,
}

/// One token of the architecture grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenLayer {
    /// `C<k>`: graph convolution with `k` feature maps.
    Conv(usize),
    /// `FC<k>`: fully connected layer with `k` units.
    Fc(usize),
}

/// Parses `LAYER ("-" LAYER)*` with `LAYER := "C" int | "FC" int`.
/// The empty string means no hidden layers.
pub fn parse_hidden_layers(architecture: &str) -> Result<Vec<HiddenLayer>> {
    if architecture.is_empty() {
        return Ok(Vec::new());
    }
    let mut layers = Vec::new();
    let mut pos = 0;
    for token in architecture.split('-') {
        let (kind, digits, offset): (fn(usize) -> HiddenLayer, &str, usize) =
            if let Some(rest) = token.strip_prefix("FC") {
                (HiddenLayer::Fc, rest, 2)
            } else if let Some(rest) = token.strip_prefix('C') {
                (HiddenLayer::Conv, rest, 1)
            } else {
                return Err(Error::Parse {
                    position: pos,
                    message: format!("expected C<int> or FC<int>, found {token:?}"),
                });
            };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            let bad = digits
                .bytes()
                .position(|b| !b.is_ascii_digit())
                .unwrap_or(0);
            return Err(Error::Parse {
                position: pos + offset + bad,
                message: format!("expected a positive integer in {token:?}"),
            });
        }
        let width: usize = digits.parse().map_err(|_| Error::Parse {
            position: pos + offset,
            message: format!("width {digits:?} is too large"),
        })?;
        if width == 0 {
            return Err(Error::Parse {
                position: pos + offset,
                message: "layer width must be positive".into(),
            });
        }
        layers.push(kind(width));
        pos += token.len() + 1;
    }
    Ok(layers)
}

#[derive(Debug, Clone)]
pub enum Layer {
    GraphConv(GraphConvLayer),
    Dense(DenseLayer),
    Relu,
    Dropout(Dropout),
    Flatten,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::GraphConv(_) => "graph_conv",
            Layer::Dense(_) => "dense",
            Layer::Relu => "relu",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten => "flatten",
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::GraphConv(l) => l.parameter_count(),
            Layer::Dense(l) => l.parameter_count(),
            _ => 0,
        }
    }
}

/// Saved intermediate values for one layer's backward pass.
#[derive(Debug, Clone)]
enum Cache {
    GraphConv { gathered: Tensor },
    Dense { input: Tensor },
    Relu { output: Tensor },
    Dropout { mask: Option<Vec<f64>> },
    Flatten { n_nodes: usize, depth: usize },
}

/// Forward-pass record consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
}

/// Targets for one batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Values(&'a [f64]),
}

/// Gradients in the order of [`Network::parameters`], plus the input gradient.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

/// A stack of layers ending in a linear map to the task outputs.
#[derive(Debug, Clone)]
pub struct Network {
    architecture: String,
    config: NetworkConfig,
    table: Option<Arc<NeighborTable>>,
    layers: Vec<Layer>,
}

/// Builds a network from the architecture grammar.
///
/// Every `C<k>` becomes graph conv + ReLU + dropout, every `FC<k>` becomes
/// (flatten) + dense + ReLU + dropout, and the task head (dense to the output
/// count) is appended without dropout. A graph convolution after a fully
/// connected layer is rejected because the node axis is gone by then.
pub fn parse_architecture(
    architecture: &str,
    config: &NetworkConfig,
    table: Option<Arc<NeighborTable>>,
) -> Result<Network> {
    let hidden = parse_hidden_layers(architecture)?;
    Dropout::new(config.dropout_rate)?;
    if config.n_nodes == 0 || config.d_input == 0 {
        return Err(Error::Dimension(
            "network input must have nodes and depth".into(),
        ));
    }
    let mut rng = stream_rng(config.seed, INIT_STREAM);
    let mut layers = Vec::new();
    // Some((n, d)) while the node axis exists, None once flattened.
    let mut nodes = Some((config.n_nodes, config.d_input));
    let mut flat_width = 0;
    for (idx, h) in hidden.iter().enumerate() {
        match *h {
            HiddenLayer::Conv(k) => {
                let Some((n, d)) = nodes else {
                    return Err(Error::UnsupportedComposition(format!(
                        "graph convolution at layer {} follows a fully connected layer",
                        idx + 1
                    )));
                };
                let table = table.as_ref().ok_or_else(|| {
                    Error::Config("graph convolution layers need a neighbor table".into())
                })?;
                if table.n_nodes() != n {
                    return Err(Error::Dimension(format!(
                        "neighbor table has {} nodes, input has {n}",
                        table.n_nodes()
                    )));
                }
                layers.push(Layer::GraphConv(GraphConvLayer::new(
                    Arc::clone(table),
                    d,
                    k,
                    &mut rng,
                )));
                nodes = Some((n, k));
            }
            HiddenLayer::Fc(k) => {
                if let Some((n, d)) = nodes.take() {
                    layers.push(Layer::Flatten);
                    flat_width = n * d;
                }
                layers.push(Layer::Dense(DenseLayer::new(flat_width, k, &mut rng)));
                flat_width = k;
            }
        }
        layers.push(Layer::Relu);
        layers.push(Layer::Dropout(Dropout::new(config.dropout_rate)?));
    }
    if let Some((n, d)) = nodes {
        layers.push(Layer::Flatten);
        flat_width = n * d;
    }
    layers.push(Layer::Dense(DenseLayer::new(
        flat_width,
        config.task.n_outputs(),
        &mut rng,
    )));
    Ok(Network {
        architecture: architecture.to_string(),
        config: config.clone(),
        table,
        layers,
    })
}

pub fn count_parameters(net: &Network) -> usize {
    net.layers.iter().map(Layer::parameter_count).sum()
}

impl Network {
    pub fn architecture(&self) -> &str {
        &self.architecture
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.config.task
    }

    pub fn table(&self) -> Option<&Arc<NeighborTable>> {
        self.table.as_ref()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        count_parameters(self)
    }

    /// Parameter tensors in layer order, weights before bias.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::GraphConv(c) => vec![c.weights(), c.bias()],
                Layer::Dense(d) => vec![d.weights(), d.bias()],
                _ => vec![],
            })
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| match l {
                Layer::GraphConv(c) => c.params_mut().into_iter().collect::<Vec<_>>(),
                Layer::Dense(d) => d.params_mut().into_iter().collect(),
                _ => vec![],
            })
            .collect()
    }

    /// `layer<i>.<kind>.<weights|bias>` for every parameter tensor.
    pub fn parameter_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.parameter_count() > 0)
            .flat_map(|(i, l)| ["weights", "bias"].map(|p| format!("layer{i}.{}.{p}", l.kind())))
            .collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        x.expect_rank(3, "network input")?;
        if x.shape()[1..] != [self.config.n_nodes, self.config.d_input] {
            return Err(Error::Dimension(format!(
                "network expects (M, {}, {}), got {:?}",
                self.config.n_nodes,
                self.config.d_input,
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor, Trace)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, cache) = match layer {
                Layer::GraphConv(c) => {
                    let (out, gathered) = c.forward(&cur)?;
                    (out, Cache::GraphConv { gathered })
                }
                Layer::Dense(d) => {
                    let out = d.forward(&cur)?;
                    (out, Cache::Dense { input: cur })
                }
                Layer::Relu => {
                    let out = relu_forward(&cur);
                    (out.clone(), Cache::Relu { output: out })
                }
                Layer::Dropout(d) => {
                    let (out, mask) = d.forward(&cur, mode, rng);
                    (out, Cache::Dropout { mask })
                }
                Layer::Flatten => {
                    let (n_nodes, depth) = (cur.shape()[1], cur.shape()[2]);
                    (flatten_nodes(&cur)?, Cache::Flatten { n_nodes, depth })
                }
            };
            caches.push(cache);
            cur = next;
        }
        Ok((cur, Trace { caches }))
    }

    /// Eval-mode forward pass without keeping a trace.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::GraphConv(c) => c.forward(&cur)?.0,
                Layer::Dense(d) => d.forward(&cur)?,
                Layer::Relu => relu_forward(&cur),
                Layer::Dropout(_) => cur,
                Layer::Flatten => flatten_nodes(&cur)?,
            };
        }
        Ok(cur)
    }

    pub fn loss(&self, output: &Tensor, targets: Targets<'_>) -> Result<HeadOutput> {
        match (self.config.task, targets) {
            (Task::Classification { .. }, Targets::Labels(labels)) => {
                softmax_cross_entropy_head(output, labels)
            }
            (Task::Regression, Targets::Values(values)) => linear_rmse_head(output, values),
            _ => Err(Error::Config(
                "targets do not match the network task".into(),
            )),
        }
    }

    pub fn backward(&self, trace: &Trace, grad_output: &Tensor) -> Result<NetworkGrads> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::Config(
                "trace does not belong to this network".into(),
            ));
        }
        let mut grads: Vec<Tensor> = Vec::new();
        let mut cur = grad_output.clone();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            cur = match (layer, cache) {
                (Layer::GraphConv(c), Cache::GraphConv { gathered }) => {
                    let g = c.backward(gathered, &cur)?;
                    grads.push(g.bias);
                    grads.push(g.weights);
                    g.input
                }
                (Layer::Dense(d), Cache::Dense { input }) => {
                    let g = d.backward(input, &cur)?;
                    grads.push(g.bias);
                    grads.push(g.weights);
                    g.input
                }
                (Layer::Relu, Cache::Relu { output }) => relu_backward(output, &cur)?,
                (Layer::Dropout(d), Cache::Dropout { mask }) => d.backward(mask.as_deref(), &cur),
                (Layer::Flatten, Cache::Flatten { n_nodes, depth }) => {
                    unflatten_nodes(&cur, *n_nodes, *depth)?
                }
                _ => {
                    return Err(Error::Config(
                        "trace does not belong to this network".into(),
                    ))
                }
            };
        }
        grads.reverse();
        Ok(NetworkGrads {
            params: grads,
            input: cur,
        })
    }
}
