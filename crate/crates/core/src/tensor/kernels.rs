use rayon::prelude::*;

use super::Tensor;
use crate::error::{Error, Result};
use crate::graph::NeighborTable;

/// `out[r, :] = sum_q a[r, q] * b[q, :]` for row-major `a (rows x inner)` and
/// `b (inner x cols)`. Rows are independent, so splitting them across threads
/// does not change any value.
pub(crate) fn matmul(a: &[f64], b: &[f64], inner: usize, cols: usize, out: &mut [f64]) {
    if inner == 0 || cols == 0 {
        out.fill(0.0);
        return;
    }
    out.par_chunks_mut(cols)
        .zip(a.par_chunks(inner))
        .for_each(|(out_row, a_row)| {
            out_row.fill(0.0);
            for (&av, b_row) in a_row.iter().zip(b.chunks_exact(cols)) {
                if av == 0.0 {
                    continue;
                }
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        });
}

/// `acc[q, :] += sum_r a[r, q] * u[r, :]`. The sum over `r` runs in order.
pub(crate) fn matmul_at_b_acc(a: &[f64], u: &[f64], inner: usize, cols: usize, acc: &mut [f64]) {
    if inner == 0 || cols == 0 {
        return;
    }
    for (a_row, u_row) in a.chunks_exact(inner).zip(u.chunks_exact(cols)) {
        for (&av, acc_row) in a_row.iter().zip(acc.chunks_exact_mut(cols)) {
            if av == 0.0 {
                continue;
            }
            for (g, &uv) in acc_row.iter_mut().zip(u_row) {
                *g += av * uv;
            }
        }
    }
}

/// `out[r, q] = sum_f u[r, f] * b[q, f]`.
pub(crate) fn matmul_a_bt(u: &[f64], b: &[f64], inner: usize, cols: usize, out: &mut [f64]) {
    if inner == 0 || cols == 0 {
        out.fill(0.0);
        return;
    }
    out.par_chunks_mut(inner)
        .zip(u.par_chunks(cols))
        .for_each(|(out_row, u_row)| {
            for (o, b_row) in out_row.iter_mut().zip(b.chunks_exact(cols)) {
                *o = u_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            }
        });
}

fn check_table(x_nodes: usize, table: &NeighborTable) -> Result<()> {
    if table.n_nodes() != x_nodes {
        return Err(Error::Dimension(format!(
            "neighbor table covers {} nodes, tensor has {x_nodes}",
            table.n_nodes()
        )));
    }
    Ok(())
}

/// `(M, N, d) -> (M, N, p, d)`: `out[m, i, j, :] = x[m, indices[i][j], :]`,
/// scaled by the table multiplier (conv2 weight, or zero for padding).
pub fn gather_neighbors(x: &Tensor, table: &NeighborTable) -> Result<Tensor> {
    x.expect_rank(3, "gather_neighbors")?;
    let (m, n, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    check_table(n, table)?;
    let p = table.p();
    let mult = table.multipliers();
    let idx = table.indices();
    let mut out = vec![0.0; m * n * p * d];
    let sample_out = n * p * d;
    if sample_out > 0 {
        out.par_chunks_mut(sample_out)
            .zip(x.data().par_chunks(n * d))
            .for_each(|(dst, src)| {
                for ((cell, &j), &w) in dst.chunks_exact_mut(d.max(1)).zip(idx).zip(&mult) {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &v) in cell.iter_mut().zip(&src[j * d..(j + 1) * d]) {
                        *o = w * v;
                    }
                }
            });
    }
    Tensor::new(&[m, n, p, d], out)
}

/// Contracts `(M, N, p, d)` with `(p, d, d_new)` over the `(p, d)` axes.
pub fn tensor_dot(a: &Tensor, w: &Tensor) -> Result<Tensor> {
    a.expect_rank(4, "tensor_dot input")?;
    w.expect_rank(3, "tensor_dot weights")?;
    let (m, n, p, d) = (a.shape()[0], a.shape()[1], a.shape()[2], a.shape()[3]);
    if w.shape()[0] != p || w.shape()[1] != d {
        return Err(Error::Dimension(format!(
            "cannot contract input {:?} with weights {:?} over (p, d)",
            a.shape(),
            w.shape()
        )));
    }
    let d_new = w.shape()[2];
    let mut out = vec![0.0; m * n * d_new];
    matmul(a.data(), w.data(), p * d, d_new, &mut out);
    Tensor::new(&[m, n, d_new], out)
}

/// Gradient of [`tensor_dot`] with respect to its weights:
/// `g[j, c, f] = sum_{m, i} a[m, i, j, c] * upstream[m, i, f]`.
pub fn tensor_dot_weight_grad(a: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    a.expect_rank(4, "tensor_dot_weight_grad input")?;
    upstream.expect_rank(3, "tensor_dot_weight_grad upstream")?;
    let (m, n, p, d) = (a.shape()[0], a.shape()[1], a.shape()[2], a.shape()[3]);
    if upstream.shape()[..2] != [m, n] {
        return Err(Error::Dimension(format!(
            "upstream {:?} does not match input {:?}",
            upstream.shape(),
            a.shape()
        )));
    }
    let d_new = upstream.shape()[2];
    let mut g = vec![0.0; p * d * d_new];
    matmul_at_b_acc(a.data(), upstream.data(), p * d, d_new, &mut g);
    Tensor::new(&[p, d, d_new], g)
}

/// Gradient of [`tensor_dot`] with respect to its input:
/// `g[m, i, j, c] = sum_f upstream[m, i, f] * w[j, c, f]`.
pub fn tensor_dot_input_grad(upstream: &Tensor, w: &Tensor) -> Result<Tensor> {
    upstream.expect_rank(3, "tensor_dot_input_grad upstream")?;
    w.expect_rank(3, "tensor_dot_input_grad weights")?;
    let (m, n, d_new) = (
        upstream.shape()[0],
        upstream.shape()[1],
        upstream.shape()[2],
    );
    let (p, d) = (w.shape()[0], w.shape()[1]);
    if w.shape()[2] != d_new {
        return Err(Error::Dimension(format!(
            "upstream {:?} does not match weights {:?}",
            upstream.shape(),
            w.shape()
        )));
    }
    let mut g = vec![0.0; m * n * p * d];
    matmul_a_bt(upstream.data(), w.data(), p * d, d_new, &mut g);
    Tensor::new(&[m, n, p, d], g)
}

/// Adjoint of [`gather_neighbors`]: `(M, N, p, d) -> (M, N, d)` where every
/// cell `(i, j)` adds `multiplier * g[m, i, j, :]` into node `indices[i][j]`.
///
/// Samples are independent and each is reduced in cell order, so the result
/// does not depend on how the batch is split across threads.
pub fn scatter_add_grad(g: &Tensor, table: &NeighborTable) -> Result<Tensor> {
    g.expect_rank(4, "scatter_add_grad")?;
    let (m, n, p, d) = (g.shape()[0], g.shape()[1], g.shape()[2], g.shape()[3]);
    check_table(n, table)?;
    if table.p() != p {
        return Err(Error::Dimension(format!(
            "gradient has {p} neighbor slots, table has {}",
            table.p()
        )));
    }
    let mult = table.multipliers();
    let idx = table.indices();
    let mut out = vec![0.0; m * n * d];
    if n * d > 0 {
        out.par_chunks_mut(n * d)
            .zip(g.data().par_chunks(n * p * d))
            .for_each(|(dst, src)| {
                for ((cell, &j), &w) in src.chunks_exact(d).zip(idx).zip(&mult) {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &v) in dst[j * d..(j + 1) * d].iter_mut().zip(cell) {
                        *o += w * v;
                    }
                }
            });
    }
    Tensor::new(&[m, n, d], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ConvVariant, TieBreak};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain_table() -> NeighborTable {
        NeighborTable::from_parts(
            3,
            2,
            1,
            ConvVariant::Conv1,
            TieBreak::Deterministic,
            vec![0, 1, 1, 0, 2, 1],
            None,
            vec![false; 6],
        )
        .unwrap()
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(
            shape,
            (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn gather_chain_by_hand() {
        let x = Tensor::new(&[1, 3, 1], vec![10.0, 20.0, 30.0]).unwrap();
        let out = gather_neighbors(&x, &chain_table()).unwrap();
        assert_eq!(out.shape(), &[1, 3, 2, 1]);
        assert_eq!(out.data(), &[10.0, 20.0, 20.0, 10.0, 30.0, 20.0]);
    }

    #[test]
    fn identity_gather_and_scatter() {
        let x = Tensor::new(&[2, 3, 2], (0..12).map(f64::from).collect()).unwrap();
        let t = NeighborTable::identity(3);
        let out = gather_neighbors(&x, &t).unwrap();
        assert_eq!(out.data(), x.data());
        let ones = Tensor::new(&[2, 3, 1, 2], vec![1.0; 12]).unwrap();
        assert_eq!(scatter_add_grad(&ones, &t).unwrap().data(), &[1.0; 12]);
    }

    #[test]
    fn padded_row_is_zero() {
        let t = NeighborTable::from_parts(
            2,
            2,
            0,
            ConvVariant::Conv1,
            TieBreak::Deterministic,
            vec![0, 0, 1, 1],
            None,
            vec![false, true, true, true],
        )
        .unwrap();
        let x = Tensor::new(&[1, 2, 1], vec![3.0, 4.0]).unwrap();
        let out = gather_neighbors(&x, &t).unwrap();
        assert_eq!(out.data(), &[3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn scatter_sums_shared_targets() {
        // Rows 0 and 1 both read node 0 in slot 0.
        let t = NeighborTable::from_parts(
            3,
            1,
            1,
            ConvVariant::Conv1,
            TieBreak::Deterministic,
            vec![0, 0, 2],
            None,
            vec![false; 3],
        )
        .unwrap();
        let g = Tensor::new(&[1, 3, 1, 1], vec![1.5, 2.5, 7.0]).unwrap();
        assert_eq!(scatter_add_grad(&g, &t).unwrap().data(), &[4.0, 0.0, 7.0]);
    }

    #[test]
    fn scalar_and_selector_dot() {
        let a = Tensor::new(&[1, 1, 1, 1], vec![3.0]).unwrap();
        let w = Tensor::new(&[1, 1, 1], vec![2.0]).unwrap();
        assert_eq!(tensor_dot(&a, &w).unwrap().data(), &[6.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(&mut rng, &[2, 3, 2, 2]);
        let mut w = Tensor::zeros(&[2, 2, 3]);
        // one-hot at (j0, c0, f0) = (1, 0, 2); row j0 * d + c0 = 2
        w.data_mut()[2 * 3 + 2] = 1.0;
        let out = tensor_dot(&a, &w).unwrap();
        for r in 0..6 {
            assert_eq!(out.data()[r * 3 + 2], a.data()[r * 4 + 2]);
            assert_eq!(out.data()[r * 3], 0.0);
        }
    }

    #[test]
    fn tensor_dot_matches_loop_oracle() {
        let (m, n, p, d, dn) = (2, 4, 3, 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_tensor(&mut rng, &[m, n, p, d]);
        let w = random_tensor(&mut rng, &[p, d, dn]);
        let out = tensor_dot(&a, &w).unwrap();
        for mi in 0..m {
            for i in 0..n {
                for f in 0..dn {
                    let mut s = 0.0;
                    for j in 0..p {
                        for c in 0..d {
                            s += a.data()[((mi * n + i) * p + j) * d + c]
                                * w.data()[(j * d + c) * dn + f];
                        }
                    }
                    assert!((out.data()[(mi * n + i) * dn + f] - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let x = Tensor::zeros(&[1, 4, 1]);
        assert!(gather_neighbors(&x, &chain_table()).is_err());
        let a = Tensor::zeros(&[1, 1, 2, 1]);
        assert!(tensor_dot(&a, &Tensor::zeros(&[3, 1, 1])).is_err());
        assert!(scatter_add_grad(&Tensor::zeros(&[1, 3, 1, 1]), &chain_table()).is_err());
    }

    #[test]
    fn scatter_is_independent_of_thread_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let p = 4;
        let idx: Vec<usize> = (0..n * p).map(|_| rng.random_range(0..n)).collect();
        let t = NeighborTable::from_parts(
            n,
            p,
            1,
            ConvVariant::Conv1,
            TieBreak::Deterministic,
            idx,
            None,
            vec![false; n * p],
        )
        .unwrap();
        let g = random_tensor(&mut rng, &[16, n, p, 3]);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| scatter_add_grad(&g, &t).unwrap())
        };
        let one = run(1);
        let many = run(4);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&one), bits(&many));
    }
}
