use std::sync::Arc;

use rand::Rng;

use super::init::glorot_uniform;
use crate::error::{Error, Result};
use crate::graph::{ConvVariant, NeighborTable};
use crate::tensor::{
    gather_neighbors, scatter_add_grad, tensor_dot, tensor_dot_input_grad, tensor_dot_weight_grad,
    Tensor,
};

/// Shared-weight convolution over the neighbor table.
///
/// Weight position `j` always multiplies the `j`-th closest neighbor, so the
/// same `(p, d_in, d_out)` filter bank applies at every node. Conv2 differs
/// from conv1 only through the multipliers its table carries.
#[derive(Debug, Clone)]
pub struct GraphConvLayer {
    table: Arc<NeighborTable>,
    weights: Tensor,
    bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct GraphConvGrads {
    pub weights: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

impl GraphConvLayer {
    pub fn new<R: Rng + ?Sized>(
        table: Arc<NeighborTable>,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Self {
        let p = table.p();
        let weights = glorot_uniform(p * d_in, d_out, p * d_in * d_out, rng);
        Self {
            table,
            weights: Tensor::new(&[p, d_in, d_out], weights).expect("shape matches"),
            bias: Tensor::zeros(&[d_out]),
        }
    }

    pub fn with_params(table: Arc<NeighborTable>, weights: Tensor, bias: Tensor) -> Result<Self> {
        weights.expect_rank(3, "graph conv weights")?;
        bias.expect_rank(1, "graph conv bias")?;
        if weights.shape()[0] != table.p() || bias.shape()[0] != weights.shape()[2] {
            return Err(Error::Dimension(format!(
                "weights {:?} / bias {:?} do not fit a table with p = {}",
                weights.shape(),
                bias.shape(),
                table.p()
            )));
        }
        Ok(Self {
            table,
            weights,
            bias,
        })
    }

    pub fn table(&self) -> &Arc<NeighborTable> {
        &self.table
    }

    pub fn variant(&self) -> ConvVariant {
        self.table.variant()
    }

    pub fn d_in(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn d_out(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weights, &mut self.bias]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Returns the output and the gathered input needed by [`Self::backward`].
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        x.expect_rank(3, "graph conv")?;
        if x.shape()[2] != self.d_in() {
            return Err(Error::Dimension(format!(
                "graph conv expects depth {}, got input {:?}",
                self.d_in(),
                x.shape()
            )));
        }
        let gathered = gather_neighbors(x, &self.table)?;
        let mut out = tensor_dot(&gathered, &self.weights)?;
        let b = self.bias.data();
        for row in out.data_mut().chunks_exact_mut(b.len().max(1)) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        Ok((out, gathered))
    }

    pub fn backward(&self, gathered: &Tensor, upstream: &Tensor) -> Result<GraphConvGrads> {
        upstream.expect_rank(3, "graph conv upstream")?;
        if upstream.shape()[2] != self.d_out() {
            return Err(Error::Dimension(format!(
                "graph conv upstream {:?} has wrong depth",
                upstream.shape()
            )));
        }
        let weights = tensor_dot_weight_grad(gathered, upstream)?;
        let mut bias = vec![0.0; self.d_out()];
        for row in upstream.data().chunks_exact(self.d_out().max(1)) {
            for (g, &u) in bias.iter_mut().zip(row) {
                *g += u;
            }
        }
        let grad_gathered = tensor_dot_input_grad(upstream, &self.weights)?;
        let input = scatter_add_grad(&grad_gathered, &self.table)?;
        Ok(GraphConvGrads {
            weights,
            bias: Tensor::new(&[self.d_out()], bias)?,
            input,
        })
    }
}
