//! Gather / tensor-dot / scatter-add checked against naive loops and each other.

use graphconv::graph::{
    expected_visits, select_neighbors, similarity_from_correlation, transition_from_similarity,
    ConvVariant, CorrelationMatrix, NeighborTable, TieBreak,
};
use graphconv::tensor::{gather_neighbors, scatter_add_grad, tensor_dot, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(
        shape,
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// A table over `n` nodes from a random sparse correlation pattern, so rows
/// differ in how much padding they need.
fn random_table(n: usize, p: usize, k: u32, conv2: bool, rng: &mut ChaCha8Rng) -> NeighborTable {
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        r[i * n + i] = 1.0;
        for j in i + 1..n {
            if rng.random_bool(0.3) {
                let v = rng.random_range(-0.9..0.9);
                r[i * n + j] = v;
                r[j * n + i] = v;
            }
        }
    }
    let corr = CorrelationMatrix::from_raw(n, r, vec![true; n]).unwrap();
    let q = expected_visits(
        &transition_from_similarity(&similarity_from_correlation(&corr)),
        k,
    );
    let (variant, c) = if conv2 {
        (ConvVariant::Conv2, Some(&corr))
    } else {
        (ConvVariant::Conv1, None)
    };
    select_neighbors(&q, p.min(n), variant, c, TieBreak::Deterministic).unwrap()
}

#[derive(Debug, Clone)]
struct Case {
    m: usize,
    n: usize,
    p: usize,
    d: usize,
    k: u32,
    conv2: bool,
    seed: u64,
}

fn case_strategy() -> impl Strategy<Value = Case> {
    (
        1usize..4,
        1usize..10,
        1usize..6,
        1usize..4,
        0u32..3,
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(m, n, p, d, k, conv2, seed)| Case {
            m,
            n,
            p: p.min(n),
            d,
            k,
            conv2,
            seed,
        })
}

fn naive_dot(a: &Tensor, w: &Tensor) -> Vec<f64> {
    let [m, n, p, d] = a.shape().try_into().unwrap();
    let f = w.shape()[2];
    let mut out = vec![0.0; m * n * f];
    for mi in 0..m {
        for i in 0..n {
            for ff in 0..f {
                let mut s = 0.0;
                for j in 0..p {
                    for c in 0..d {
                        s += a.data()[((mi * n + i) * p + j) * d + c]
                            * w.data()[(j * d + c) * f + ff];
                    }
                }
                out[(mi * n + i) * f + ff] = s;
            }
        }
    }
    out
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scatter_is_the_adjoint_of_gather(c in case_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let table = random_table(c.n, c.p, c.k, c.conv2, &mut rng);
        let x = random_tensor(&[c.m, c.n, c.d], &mut rng);
        let g = random_tensor(&[c.m, c.n, table.p(), c.d], &mut rng);
        let lhs = gather_neighbors(&x, &table).unwrap().dot(&g);
        let rhs = x.dot(&scatter_add_grad(&g, &table).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn tensor_dot_matches_loops_and_is_bilinear(c in case_strategy(), f in 1usize..5, s in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let a = random_tensor(&[c.m, c.n, c.p, c.d], &mut rng);
        let b = random_tensor(&[c.m, c.n, c.p, c.d], &mut rng);
        let w = random_tensor(&[c.p, c.d, f], &mut rng);
        let v = random_tensor(&[c.p, c.d, f], &mut rng);
        let out = tensor_dot(&a, &w).unwrap();
        prop_assert_eq!(out.shape(), &[c.m, c.n, f][..]);
        prop_assert!(close(out.data(), &naive_dot(&a, &w), 1e-12));

        let combine = |x: &Tensor, y: &Tensor| {
            let data = x.data().iter().zip(y.data()).map(|(p, q)| s * p + q).collect();
            Tensor::new(x.shape(), data).unwrap()
        };
        let lin_a = tensor_dot(&combine(&a, &b), &w).unwrap();
        let expect_a: Vec<f64> = out
            .data()
            .iter()
            .zip(tensor_dot(&b, &w).unwrap().data())
            .map(|(p, q)| s * p + q)
            .collect();
        prop_assert!(close(lin_a.data(), &expect_a, 1e-12));

        let lin_w = tensor_dot(&a, &combine(&w, &v)).unwrap();
        let expect_w: Vec<f64> = out
            .data()
            .iter()
            .zip(tensor_dot(&a, &v).unwrap().data())
            .map(|(p, q)| s * p + q)
            .collect();
        prop_assert!(close(lin_w.data(), &expect_w, 1e-12));
    }

    #[test]
    fn scattering_ones_counts_table_occurrences(c in case_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let table = random_table(c.n, c.p, c.k, c.conv2, &mut rng);
        let p = table.p();
        let ones = Tensor::new(&[c.m, c.n, p, c.d], vec![1.0; c.m * c.n * p * c.d]).unwrap();
        let out = scatter_add_grad(&ones, &table).unwrap();

        // Counting oracle: walk the table cell by cell.
        let mut weighted = vec![0.0; c.n];
        let mut count = vec![0usize; c.n];
        for cell in 0..c.n * p {
            let v = table.indices()[cell];
            weighted[v] += table.multiplier(cell);
            if !table.pad_mask()[cell] {
                count[v] += 1;
            }
        }
        for mi in 0..c.m {
            for v in 0..c.n {
                for ch in 0..c.d {
                    let got = out.data()[(mi * c.n + v) * c.d + ch];
                    prop_assert!((got - weighted[v]).abs() <= 1e-12);
                    if !c.conv2 {
                        prop_assert_eq!(got, count[v] as f64);
                    }
                }
            }
        }
    }
}
