use rayon::prelude::*;
use serde::Serialize;

use super::SimilarityGraph;
use crate::error::{Error, Result};

const POWER_ITERATION_TOL: f64 = 1e-12;
const POWER_ITERATION_MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Stochastic,
    /// Isolated node whose row was replaced by `e_i`.
    SelfLoop,
}

/// Row-stochastic one-step transition probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n_nodes: usize,
    probs: Vec<f64>,
    row_kind: Vec<RowKind>,
}

impl TransitionMatrix {
    /// Wraps a row-major matrix, checking entries lie in `[0, 1]` and rows sum to 1.
    pub fn from_rows(n_nodes: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_nodes * n_nodes {
            return Err(Error::Dimension(format!(
                "transition matrix over {n_nodes} nodes needs {} entries, got {}",
                n_nodes * n_nodes,
                probs.len()
            )));
        }
        for (i, row) in probs.chunks_exact(n_nodes.max(1)).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidValue(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidValue(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self {
            n_nodes,
            probs,
            row_kind: vec![RowKind::Stochastic; n_nodes],
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n_nodes + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    pub fn row_kind(&self, i: usize) -> RowKind {
        self.row_kind[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Row-normalized similarity, `P = D^-1 S`. Rows with zero degree become self-loops.
pub fn transition_from_similarity(graph: &SimilarityGraph) -> TransitionMatrix {
    let n = graph.n_nodes();
    let mut probs = vec![0.0; n * n];
    let mut row_kind = vec![RowKind::Stochastic; n];
    for (i, kind) in row_kind.iter_mut().enumerate() {
        let (entries, degree) = normalized_row(graph, i);
        let dst = &mut probs[i * n..(i + 1) * n];
        if degree > 0.0 {
            for (j, p) in entries {
                dst[j] = p;
            }
        } else {
            dst[i] = 1.0;
            *kind = RowKind::SelfLoop;
        }
    }
    TransitionMatrix {
        n_nodes: n,
        probs,
        row_kind,
    }
}

/// Nonzero entries of row `i` of `P` plus the row degree. Degrees are summed
/// in increasing column order so dense and sparse storage agree bit for bit.
pub(crate) fn normalized_row(graph: &SimilarityGraph, i: usize) -> (Vec<(usize, f64)>, f64) {
    let entries = graph.row_entries(i);
    let degree: f64 = entries.iter().map(|&(_, w)| w).fold(0.0, |acc, w| acc + w);
    if degree > 0.0 {
        (
            entries.into_iter().map(|(j, w)| (j, w / degree)).collect(),
            degree,
        )
    } else {
        (vec![(i, 1.0)], 0.0)
    }
}

/// `Q^(k) = I + P + ... + P^k`: expected visits of a `k`-step walk, start included.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitMatrix {
    n_nodes: usize,
    k: u32,
    visits: Vec<f64>,
}

impl VisitMatrix {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.visits[i * self.n_nodes + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.visits[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.visits
    }
}

/// `acc_row = a_row * P`, summing over the middle index in increasing order.
fn row_times(a_row: &[f64], p: &TransitionMatrix, out: &mut [f64]) {
    out.fill(0.0);
    for (u, &a) in a_row.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, &pv) in out.iter_mut().zip(p.row(u)) {
            *o += a * pv;
        }
    }
}

/// Accumulates `Q <- Q + A` with `A <- A P`, starting from `A = Q = I`.
pub fn expected_visits(p: &TransitionMatrix, k: u32) -> VisitMatrix {
    let n = p.n_nodes;
    let mut visits = vec![0.0; n * n];
    visits
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, q_row)| {
            let mut a = vec![0.0; n];
            let mut next = vec![0.0; n];
            a[i] = 1.0;
            q_row[i] = 1.0;
            for _ in 0..k {
                row_times(&a, p, &mut next);
                std::mem::swap(&mut a, &mut next);
                for (q, &v) in q_row.iter_mut().zip(&a) {
                    *q += v;
                }
            }
        });
    VisitMatrix {
        n_nodes: n,
        k,
        visits,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    pub k: u32,
    pub stationary: Vec<f64>,
    /// `max_j |Q_ij / k - pi_j|` for every start node `i`.
    pub per_node_max_deviation: Vec<f64>,
    pub max_deviation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StationaryDiagnostic {
    Converged(StationaryReport),
    /// Power iteration did not settle, e.g. for a periodic chain.
    Unavailable {
        iterations: usize,
        residual: f64,
    },
}

impl StationaryDiagnostic {
    pub fn max_deviation(&self) -> Option<f64> {
        match self {
            StationaryDiagnostic::Converged(r) => Some(r.max_deviation),
            StationaryDiagnostic::Unavailable { .. } => None,
        }
    }
}

/// Compares `Q^(k) / k` with the stationary distribution of `P`.
///
/// Large deviations mean the walk still carries local structure; values near
/// zero mean `k` is large enough that every row looks like the stationary
/// distribution. The stationary distribution is found by power iteration on
/// `P^T` started from `e_0`.
pub fn stationary_ratio_check(p: &TransitionMatrix, k: u32) -> Result<StationaryDiagnostic> {
    if k == 0 {
        return Err(Error::Config("stationary diagnostic needs k >= 1".into()));
    }
    let n = p.n_nodes;
    if n == 0 {
        return Err(Error::Dimension("empty transition matrix".into()));
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < POWER_ITERATION_MAX_STEPS {
        iterations += 1;
        row_times(&pi, p, &mut next);
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < POWER_ITERATION_TOL {
            break;
        }
    }
    if residual >= POWER_ITERATION_TOL {
        return Ok(StationaryDiagnostic::Unavailable {
            iterations,
            residual,
        });
    }

    let q = expected_visits(p, k);
    let kf = f64::from(k);
    let per_node_max_deviation: Vec<f64> = (0..n)
        .map(|i| {
            q.row(i)
                .iter()
                .zip(&pi)
                .map(|(qv, s)| (qv / kf - s).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let max_deviation = per_node_max_deviation.iter().copied().fold(0.0, f64::max);
    Ok(StationaryDiagnostic::Converged(StationaryReport {
        k,
        stationary: pi,
        per_node_max_deviation,
        max_deviation,
        iterations,
    }))
}
