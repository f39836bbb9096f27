use rand::Rng;

use super::init::glorot_uniform;
use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b_acc, Tensor};

/// Fully connected layer, `y = x W + b` with `W` of shape `(n_in, n_out)`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    weights: Tensor,
    bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            weights: Tensor::new(
                &[n_in, n_out],
                glorot_uniform(n_in, n_out, n_in * n_out, rng),
            )
            .expect("shape matches"),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    pub fn with_params(weights: Tensor, bias: Tensor) -> Result<Self> {
        weights.expect_rank(2, "dense weights")?;
        bias.expect_rank(1, "dense bias")?;
        if bias.shape()[0] != weights.shape()[1] {
            return Err(Error::Dimension("dense bias does not match weights".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[1]
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

    fn check_input(&self, x: &Tensor) -> Result<()> {
        x.expect_rank(2, "dense")?;
        if x.shape()[1] != self.n_in() {
            return Err(Error::Dimension(format!(
                "dense layer expects {} inputs, got {:?}",
                self.n_in(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let (m, n_out) = (x.shape()[0], self.n_out());
        let mut out = vec![0.0; m * n_out];
        matmul(x.data(), self.weights.data(), self.n_in(), n_out, &mut out);
        let b = self.bias.data();
        for row in out.chunks_exact_mut(n_out.max(1)) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        Tensor::new(&[m, n_out], out)
    }

    pub fn backward(&self, x: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
        self.check_input(x)?;
        let (m, n_in, n_out) = (x.shape()[0], self.n_in(), self.n_out());
        if upstream.shape() != [m, n_out] {
            return Err(Error::Dimension(format!(
                "dense upstream {:?} should be [{m}, {n_out}]",
                upstream.shape()
            )));
        }
        let mut gw = vec![0.0; n_in * n_out];
        matmul_at_b_acc(x.data(), upstream.data(), n_in, n_out, &mut gw);
        let mut gb = vec![0.0; n_out];
        for row in upstream.data().chunks_exact(n_out.max(1)) {
            for (g, &u) in gb.iter_mut().zip(row) {
                *g += u;
            }
        }
        let mut gx = vec![0.0; m * n_in];
        matmul_a_bt(upstream.data(), self.weights.data(), n_in, n_out, &mut gx);
        Ok(DenseGrads {
            weights: Tensor::new(&[n_in, n_out], gw)?,
            bias: Tensor::new(&[n_out], gb)?,
            input: Tensor::new(&[m, n_in], gx)?,
        })
    }
}
