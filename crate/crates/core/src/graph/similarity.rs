use serde::{Deserialize, Serialize};

use super::CorrelationMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    /// Per-row `(column, weight)` pairs, columns strictly increasing, weights nonzero.
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// Nonnegative weighted graph over `n` nodes, stored densely or as adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n_nodes: usize,
    storage: Storage,
    symmetric: bool,
}

fn check_weight(i: usize, j: usize, w: f64) -> Result<()> {
    if !w.is_finite() {
        return Err(Error::InvalidValue(format!(
            "weight ({i}, {j}) is not finite"
        )));
    }
    if w < 0.0 {
        return Err(Error::InvalidValue(format!(
            "weight ({i}, {j}) = {w} is negative"
        )));
    }
    Ok(())
}

impl SimilarityGraph {
    /// Dense symmetric graph. Asymmetric input is rejected; use
    /// [`SimilarityGraph::from_directed_dense`] to accept it on purpose.
    pub fn from_dense(n_nodes: usize, weights: Vec<f64>) -> Result<Self> {
        let graph = Self::dense_unchecked(n_nodes, weights)?;
        let Storage::Dense(w) = &graph.storage else {
            unreachable!()
        };
        for i in 0..n_nodes {
            for j in i + 1..n_nodes {
                if w[i * n_nodes + j] != w[j * n_nodes + i] {
                    return Err(Error::InvalidValue(format!(
                        "similarity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(graph)
    }

    /// Dense graph whose weights may be asymmetric. Symmetry is not checked.
    pub fn from_directed_dense(n_nodes: usize, weights: Vec<f64>) -> Result<Self> {
        log::warn!("accepting a directed similarity matrix; symmetry checks are skipped");
        let mut graph = Self::dense_unchecked(n_nodes, weights)?;
        graph.symmetric = false;
        Ok(graph)
    }

    fn dense_unchecked(n_nodes: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_nodes * n_nodes {
            return Err(Error::Dimension(format!(
                "dense similarity over {n_nodes} nodes needs {} weights, got {}",
                n_nodes * n_nodes,
                weights.len()
            )));
        }
        for (idx, &w) in weights.iter().enumerate() {
            check_weight(idx / n_nodes.max(1), idx % n_nodes.max(1), w)?;
        }
        Ok(Self {
            n_nodes,
            storage: Storage::Dense(weights),
            symmetric: true,
        })
    }

    /// Sparse undirected graph from an edge list. Each `(i, j, w)` sets both
    /// `S_ij` and `S_ji`; zero-weight edges are dropped.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
        for &(i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::Dimension(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            check_weight(i, j, w)?;
            if w == 0.0 {
                continue;
            }
            rows[i].push((j, w));
            if i != j {
                rows[j].push((i, w));
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(pair) = row.windows(2).find(|pair| pair[0].0 == pair[1].0) {
                return Err(Error::InvalidValue(format!(
                    "duplicate edge ({i}, {})",
                    pair[0].0
                )));
            }
        }
        Ok(Self {
            n_nodes,
            storage: Storage::Sparse(rows),
            symmetric: true,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn storage_kind(&self) -> StorageKind {
        match self.storage {
            Storage::Dense(_) => StorageKind::Dense,
            Storage::Sparse(_) => StorageKind::Sparse,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(w) => w[i * self.n_nodes + j],
            Storage::Sparse(rows) => rows[i]
                .binary_search_by_key(&j, |&(c, _)| c)
                .map(|pos| rows[i][pos].1)
                .unwrap_or(0.0),
        }
    }

    /// Nonzero entries of row `i` in increasing column order.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(w) => w[i * self.n_nodes..(i + 1) * self.n_nodes]
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect(),
            Storage::Sparse(rows) => rows[i].clone(),
        }
    }

    pub(crate) fn sparse_rows(&self) -> Option<&[Vec<(usize, f64)>]> {
        match &self.storage {
            Storage::Sparse(rows) => Some(rows),
            Storage::Dense(_) => None,
        }
    }

    /// Number of distinct neighbors `j != i` with positive weight.
    pub fn degree(&self, i: usize) -> usize {
        self.row_entries(i).iter().filter(|&&(j, _)| j != i).count()
    }

    pub fn to_dense(&self) -> Self {
        let n = self.n_nodes;
        let weights = match &self.storage {
            Storage::Dense(w) => w.clone(),
            Storage::Sparse(rows) => {
                let mut w = vec![0.0; n * n];
                for (i, row) in rows.iter().enumerate() {
                    for &(j, v) in row {
                        w[i * n + j] = v;
                    }
                }
                w
            }
        };
        Self {
            n_nodes: n,
            storage: Storage::Dense(weights),
            symmetric: self.symmetric,
        }
    }

    pub fn to_sparse(&self) -> Self {
        let rows = (0..self.n_nodes).map(|i| self.row_entries(i)).collect();
        Self {
            n_nodes: self.n_nodes,
            storage: Storage::Sparse(rows),
            symmetric: self.symmetric,
        }
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_nodes {
            return Err(Error::Dimension(
                "permutation length differs from node count".into(),
            ));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_nodes];
        for i in 0..self.n_nodes {
            rows[perm[i]] = self
                .row_entries(i)
                .into_iter()
                .map(|(j, w)| (perm[j], w))
                .collect();
            rows[perm[i]].sort_by_key(|&(j, _)| j);
        }
        let sparse = Self {
            n_nodes: self.n_nodes,
            storage: Storage::Sparse(rows),
            symmetric: self.symmetric,
        };
        Ok(match self.storage {
            Storage::Dense(_) => sparse.to_dense(),
            Storage::Sparse(_) => sparse,
        })
    }
}

/// `S_ij = |R_ij|`, with `S_ii = 1` for valid features and all-zero rows for
/// features whose correlation is undefined.
pub fn similarity_from_correlation(corr: &CorrelationMatrix) -> SimilarityGraph {
    let n = corr.n_features();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        if !corr.is_valid(i) {
            continue;
        }
        for j in 0..n {
            if corr.is_valid(j) {
                weights[i * n + j] = if i == j { 1.0 } else { corr.get(i, j).abs() };
            }
        }
    }
    SimilarityGraph {
        n_nodes: n,
        storage: Storage::Dense(weights),
        symmetric: true,
    }
}

/// Pixel grid with unit weights between 8-connected neighbors.
/// Node `r * width + c` is the pixel in row `r`, column `c`.
pub fn grid_graph(height: usize, width: usize) -> Result<SimilarityGraph> {
    if height == 0 || width == 0 {
        return Err(Error::Dimension(format!(
            "grid dimensions must be positive, got {height}x{width}"
        )));
    }
    let mut rows = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let mut row = Vec::with_capacity(8);
            for nr in r.saturating_sub(1)..=(r + 1).min(height - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(width - 1) {
                    if (nr, nc) != (r, c) {
                        row.push((nr * width + nc, 1.0));
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(SimilarityGraph {
        n_nodes: height * width,
        storage: Storage::Sparse(rows),
        symmetric: true,
    })
}
