use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::walk::normalized_row;
use super::{CorrelationMatrix, SimilarityGraph, StorageKind, VisitMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvVariant {
    /// Plain gather of neighbor values.
    Conv1,
    /// Gathered values are scaled by `sign(R_ij) * Q_ij`.
    Conv2,
}

/// How equal visit counts are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "policy", content = "seed")]
pub enum TieBreak {
    /// Higher count first. The node itself wins a tie for the largest count;
    /// every other tie goes to the lower index.
    Deterministic,
    /// Higher count first; ties ordered by a hash of `(seed, row, column)`.
    Seeded(u64),
}

/// For every node, the `p` nodes its convolution reads, closest first.
///
/// Rows with fewer than `p` reachable nodes are padded with the node's own
/// index. Padded slots have a zero multiplier so they never contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub(crate) n_nodes: usize,
    pub(crate) p: usize,
    pub(crate) k: u32,
    pub(crate) variant: ConvVariant,
    pub(crate) tie_break: TieBreak,
    pub(crate) indices: Vec<usize>,
    pub(crate) weights: Option<Vec<f64>>,
    pub(crate) pad_mask: Vec<bool>,
}

impl NeighborTable {
    /// Assembles a table from raw parts, validating shapes and index ranges.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_nodes: usize,
        p: usize,
        k: u32,
        variant: ConvVariant,
        tie_break: TieBreak,
        indices: Vec<usize>,
        weights: Option<Vec<f64>>,
        pad_mask: Vec<bool>,
    ) -> Result<Self> {
        let cells = n_nodes * p;
        if indices.len() != cells || pad_mask.len() != cells {
            return Err(Error::Dimension(format!(
                "table {n_nodes}x{p} needs {cells} indices and pad flags, got {} and {}",
                indices.len(),
                pad_mask.len()
            )));
        }
        match (&weights, variant) {
            (Some(w), ConvVariant::Conv2) if w.len() == cells => {
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidValue("non-finite table weight".into()));
                }
            }
            (None, ConvVariant::Conv1) => {}
            _ => {
                return Err(Error::Config(
                    "weights must be present with matching shape exactly for conv2 tables".into(),
                ))
            }
        }
        if let Some(pos) = indices.iter().position(|&j| j >= n_nodes) {
            return Err(Error::Dimension(format!(
                "neighbor index {} at row {} out of range",
                indices[pos],
                pos / p
            )));
        }
        Ok(Self {
            n_nodes,
            p,
            k,
            variant,
            tie_break,
            indices,
            weights,
            pad_mask,
        })
    }

    /// Every node reads only itself.
    pub fn identity(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            p: 1,
            k: 0,
            variant: ConvVariant::Conv1,
            tie_break: TieBreak::Deterministic,
            indices: (0..n_nodes).collect(),
            weights: None,
            pad_mask: vec![false; n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn variant(&self) -> ConvVariant {
        self.variant
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn pad_mask(&self) -> &[bool] {
        &self.pad_mask
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.p..(i + 1) * self.p]
    }

    /// Indices of row `i` excluding padding.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.row(i)
            .iter()
            .zip(&self.pad_mask[i * self.p..(i + 1) * self.p])
            .filter(|(_, &pad)| !pad)
            .map(|(&j, _)| j)
            .collect()
    }

    pub fn is_padded(&self, i: usize, slot: usize) -> bool {
        self.pad_mask[i * self.p + slot]
    }

    pub fn pad_count(&self) -> usize {
        self.pad_mask.iter().filter(|&&pad| pad).count()
    }

    /// Factor applied to the gathered value in `(i, slot)`: zero for padding,
    /// the carried weight for conv2 tables and one otherwise.
    #[inline]
    pub fn multiplier(&self, cell: usize) -> f64 {
        if self.pad_mask[cell] {
            0.0
        } else {
            self.weights.as_ref().map_or(1.0, |w| w[cell])
        }
    }

    /// Multipliers for every cell, row-major.
    pub fn multipliers(&self) -> Vec<f64> {
        (0..self.indices.len())
            .map(|c| self.multiplier(c))
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tie_key(tie: TieBreak, row: usize, col: usize) -> u64 {
    match tie {
        TieBreak::Deterministic => col as u64,
        TieBreak::Seeded(seed) => splitmix64(seed ^ splitmix64((row as u64) << 32 ^ col as u64)),
    }
}

/// Total order on candidates `(column, visits)` of row `row`, where `top` is
/// the row's largest count.
fn order(row: usize, top: f64, tie: TieBreak, a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| match tie {
            TieBreak::Deterministic if a.1 == top => (b.0 == row).cmp(&(a.0 == row)),
            _ => Ordering::Equal,
        })
        .then_with(|| tie_key(tie, row, a.0).cmp(&tie_key(tie, row, b.0)))
        .then_with(|| a.0.cmp(&b.0))
}

struct RowSelection {
    indices: Vec<usize>,
    weights: Vec<f64>,
    pad: Vec<bool>,
}

/// Top-`p` of the candidates with positive visit count, padded with `row`.
fn select_row(
    row: usize,
    mut candidates: Vec<(usize, f64)>,
    p: usize,
    tie: TieBreak,
    signs: Option<&CorrelationMatrix>,
) -> RowSelection {
    candidates.retain(|&(_, q)| q > 0.0);
    let top = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let cmp = |a: &(usize, f64), b: &(usize, f64)| order(row, top, tie, *a, *b);
    if candidates.len() > p {
        candidates.select_nth_unstable_by(p - 1, cmp);
        candidates.truncate(p);
    }
    candidates.sort_unstable_by(cmp);

    let mut sel = RowSelection {
        indices: Vec::with_capacity(p),
        weights: Vec::with_capacity(p),
        pad: Vec::with_capacity(p),
    };
    for &(j, q) in &candidates {
        sel.indices.push(j);
        sel.pad.push(false);
        let sign = match signs {
            Some(r) if r.get(row, j) < 0.0 => -1.0,
            _ => 1.0,
        };
        sel.weights.push(sign * q);
    }
    while sel.indices.len() < p {
        sel.indices.push(row);
        sel.pad.push(true);
        sel.weights.push(0.0);
    }
    sel
}

fn check_variant(
    variant: ConvVariant,
    corr: Option<&CorrelationMatrix>,
    n: usize,
) -> Result<Option<&CorrelationMatrix>> {
    match (variant, corr) {
        (ConvVariant::Conv1, _) => Ok(None),
        (ConvVariant::Conv2, None) => Err(Error::Config(
            "conv2 neighbor weights need a correlation matrix for their signs".into(),
        )),
        (ConvVariant::Conv2, Some(r)) if r.n_features() != n => Err(Error::Dimension(format!(
            "correlation covers {} features, graph has {n} nodes",
            r.n_features()
        ))),
        (ConvVariant::Conv2, Some(r)) => Ok(Some(r)),
    }
}

fn assemble(
    n: usize,
    p: usize,
    k: u32,
    variant: ConvVariant,
    tie_break: TieBreak,
    rows: Vec<RowSelection>,
) -> NeighborTable {
    let mut indices = Vec::with_capacity(n * p);
    let mut weights = Vec::with_capacity(n * p);
    let mut pad_mask = Vec::with_capacity(n * p);
    for r in rows {
        indices.extend(r.indices);
        weights.extend(r.weights);
        pad_mask.extend(r.pad);
    }
    NeighborTable {
        n_nodes: n,
        p,
        k,
        variant,
        tie_break,
        indices,
        weights: (variant == ConvVariant::Conv2).then_some(weights),
        pad_mask,
    }
}

fn check_p(p: usize, n: usize) -> Result<()> {
    if p == 0 || p > n {
        return Err(Error::Dimension(format!(
            "neighbors per node must be in 1..={n}, got {p}"
        )));
    }
    Ok(())
}

/// Orders each row of `Q` in descending visit count and keeps the first `p`.
pub fn select_neighbors(
    q: &VisitMatrix,
    p: usize,
    variant: ConvVariant,
    corr: Option<&CorrelationMatrix>,
    tie_break: TieBreak,
) -> Result<NeighborTable> {
    let n = q.n_nodes();
    check_p(p, n)?;
    let signs = check_variant(variant, corr, n)?;
    let rows: Vec<RowSelection> = (0..n)
        .into_par_iter()
        .map(|i| {
            let candidates = q.row(i).iter().copied().enumerate().collect();
            select_row(i, candidates, p, tie_break, signs)
        })
        .collect();
    Ok(assemble(n, p, q.k(), variant, tie_break, rows))
}

struct WalkScratch {
    mass: Vec<f64>,
    next: Vec<f64>,
    visits: Vec<f64>,
    in_next: Vec<bool>,
    seen: Vec<bool>,
}

impl WalkScratch {
    fn new(n: usize) -> Self {
        Self {
            mass: vec![0.0; n],
            next: vec![0.0; n],
            visits: vec![0.0; n],
            in_next: vec![false; n],
            seen: vec![false; n],
        }
    }

    /// Row `start` of `Q^(k)` restricted to nodes within `k` hops.
    /// Scratch buffers are left zeroed on return.
    fn visit_row(
        &mut self,
        start: usize,
        k: u32,
        trans: &[Vec<(usize, f64)>],
    ) -> Vec<(usize, f64)> {
        let mut frontier = vec![start];
        let mut touched = vec![start];
        self.mass[start] = 1.0;
        self.visits[start] = 1.0;
        self.seen[start] = true;
        for _ in 0..k {
            let mut next_frontier = Vec::new();
            for &u in &frontier {
                let a = self.mass[u];
                if a == 0.0 {
                    continue;
                }
                for &(v, pv) in &trans[u] {
                    if !self.in_next[v] {
                        self.in_next[v] = true;
                        next_frontier.push(v);
                    }
                    self.next[v] += a * pv;
                }
            }
            for &u in &frontier {
                self.mass[u] = 0.0;
            }
            next_frontier.sort_unstable();
            for &v in &next_frontier {
                self.in_next[v] = false;
                self.mass[v] = self.next[v];
                self.next[v] = 0.0;
                if !self.seen[v] {
                    self.seen[v] = true;
                    touched.push(v);
                }
                self.visits[v] += self.mass[v];
            }
            frontier = next_frontier;
        }
        for &u in &frontier {
            self.mass[u] = 0.0;
        }
        touched
            .into_iter()
            .map(|v| {
                let q = self.visits[v];
                self.visits[v] = 0.0;
                self.seen[v] = false;
                (v, q)
            })
            .collect()
    }
}

/// Neighbor selection on a sparse graph without forming any dense matrix.
///
/// Each row of `Q^(k)` is obtained by pushing walk mass outward from the node
/// for `k` steps, visiting only nodes within `k` hops. Frontier nodes are
/// processed in increasing index order, which reproduces the summation order
/// of [`super::expected_visits`]; the resulting table is identical to the one
/// from the dense path.
pub fn sparse_neighbors_bfs(
    graph: &SimilarityGraph,
    k: u32,
    p: usize,
    variant: ConvVariant,
    corr: Option<&CorrelationMatrix>,
    tie_break: TieBreak,
) -> Result<NeighborTable> {
    if graph.storage_kind() != StorageKind::Sparse {
        return Err(Error::Config(
            "walk-based selection needs sparse storage; use expected_visits + select_neighbors for dense graphs".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Config("walk-based selection needs k >= 1".into()));
    }
    let n = graph.n_nodes();
    check_p(p, n)?;
    let signs = check_variant(variant, corr, n)?;
    debug_assert!(graph.sparse_rows().is_some());
    let trans: Vec<Vec<(usize, f64)>> = (0..n).map(|i| normalized_row(graph, i).0).collect();
    let rows: Vec<RowSelection> = (0..n)
        .into_par_iter()
        .map_init(
            || WalkScratch::new(n),
            |scratch, i| {
                let candidates = scratch.visit_row(i, k, &trans);
                select_row(i, candidates, p, tie_break, signs)
            },
        )
        .collect();
    Ok(assemble(n, p, k, variant, tie_break, rows))
}
