use crate::error::Result;
use crate::tensor::Tensor;

/// `(M, N, d) -> (M, N * d)`; node `i`, channel `c` lands in column `i * d + c`.
pub fn flatten_nodes(x: &Tensor) -> Result<Tensor> {
    x.expect_rank(3, "flatten_nodes")?;
    let (m, n, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    x.clone().reshape(&[m, n * d])
}

/// Inverse of [`flatten_nodes`].
pub fn unflatten_nodes(x: &Tensor, n_nodes: usize, depth: usize) -> Result<Tensor> {
    x.expect_rank(2, "unflatten_nodes")?;
    x.clone().reshape(&[x.shape()[0], n_nodes, depth])
}
