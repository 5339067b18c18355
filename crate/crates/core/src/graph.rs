//! Sparse undirected labelled graph and first-order homophily measures.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Simple undirected graph with integer class labels and optional node
/// features. Adjacency is stored symmetrically in CSR form with no
/// self-loops and no duplicate edges.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    k: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    labels: Vec<usize>,
    features: Option<DMatrix<f64>>,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of classes (max label + 1).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> Option<&DMatrix<f64>> {
        self.features.as_ref()
    }

    pub fn set_features(&mut self, features: Option<DMatrix<f64>>) -> Result<()> {
        if let Some(x) = &features {
            if x.nrows() != self.n {
                return Err(Error::FeatureRowMismatch {
                    got: x.nrows(),
                    expected: self.n,
                });
            }
        }
        self.features = features;
        Ok(())
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        self.neighbors.len() as f64 / self.n as f64
    }

    /// Undirected edge list with u < v.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    /// Adjacency as a CSR matrix with unit weights.
    pub fn adjacency(&self) -> CsrMatrix {
        let triplets: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|u| self.neighbors(u).iter().map(move |&v| (u, v, 1.0)))
            .collect();
        CsrMatrix::from_triplets(self.n, self.n, &triplets)
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.degree(i) == 0).collect()
    }

    /// Per-class indicator vectors.
    pub fn class_indicators(&self) -> Vec<Vec<f64>> {
        let mut ind = vec![vec![0.0; self.n]; self.k];
        for (i, &y) in self.labels.iter().enumerate() {
            ind[y][i] = 1.0;
        }
        ind
    }

    /// Empirical class proportions.
    pub fn class_proportions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.k];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

/// Builds a graph from an edge list. Edges are symmetrized, duplicates and
/// self-loops dropped. The node count is the label vector's length and the
/// class count is the largest label + 1.
pub fn build_graph(
    edges: &[(usize, usize)],
    labels: &[usize],
    features: Option<DMatrix<f64>>,
) -> Result<Graph> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    if let Some(x) = &features {
        if x.nrows() != n {
            return Err(Error::FeatureRowMismatch {
                got: x.nrows(),
                expected: n,
            });
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n {
            return Err(Error::NodeOutOfRange { id: u, n });
        }
        if v >= n {
            return Err(Error::NodeOutOfRange { id: v, n });
        }
        if u == v {
            continue;
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut offsets = vec![0usize; n + 1];
    let mut neighbors = Vec::new();
    for (u, list) in adj.iter_mut().enumerate() {
        list.sort_unstable();
        list.dedup();
        neighbors.extend_from_slice(list);
        offsets[u + 1] = neighbors.len();
    }
    Ok(Graph {
        n,
        k,
        offsets,
        neighbors,
        labels: labels.to_vec(),
        features,
    })
}

/// Fraction of edges joining same-class endpoints.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    if g.edge_count() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let mut same = 0usize;
    for (u, v) in g.edge_list() {
        if g.labels[u] == g.labels[v] {
            same += 1;
        }
    }
    Ok(same as f64 / g.edge_count() as f64)
}

/// Mean fraction of same-class neighbors, averaged over non-isolated nodes.
pub fn node_homophily(g: &Graph) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..g.n() {
        let d = g.degree(i);
        if d == 0 {
            continue;
        }
        let same = g
            .neighbors(i)
            .iter()
            .filter(|&&j| g.labels[j] == g.labels[i])
            .count();
        total += same as f64 / d as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    Ok(total / counted as f64)
}

/// Weighted homophily h(S) = (1/n) sum_ij S_ij [y_i == y_j], the
/// unnormalized form.
pub fn weighted_homophily(s: &CsrMatrix, labels: &[usize]) -> Result<f64> {
    if s.nrows() != s.ncols() || s.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted_homophily",
            got: s.nrows(),
            expected: labels.len(),
        });
    }
    let n = labels.len() as f64;
    let mut acc = 0.0;
    for (i, j, v) in s.iter_entries() {
        if labels[i] == labels[j] {
            acc += v;
        }
    }
    Ok(acc / n)
}

/// Dense-matrix variant of [`weighted_homophily`].
pub fn weighted_homophily_dense(s: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    if s.nrows() != s.ncols() || s.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted_homophily",
            got: s.nrows(),
            expected: labels.len(),
        });
    }
    let n = labels.len() as f64;
    let mut acc = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == labels[j] {
                acc += s[(i, j)];
            }
        }
    }
    Ok(acc / n)
}
