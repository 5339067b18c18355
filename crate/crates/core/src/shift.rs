//! Graph shift operators and matrix-power application.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::CsrMatrix;

/// Base normalization of the shift operator. Combined with the self-loop
/// flag of [`shift_operator`] this resolves to one of the stored
/// [`ShiftKind`] variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// D^{-1/2} A D^{-1/2}
    Symmetric,
    /// D^{-1} A
    RandomWalk,
    /// A / <d>
    MeanDegreeScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftKind {
    SymNormalizedWithSelfLoops,
    SymNormalizedRaw,
    RandomWalk,
    RandomWalkWithSelfLoops,
    MeanDegreeScaled,
    MeanDegreeScaledWithSelfLoops,
}

impl ShiftKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShiftKind::SymNormalizedWithSelfLoops => "sym-normalized-with-self-loops",
            ShiftKind::SymNormalizedRaw => "sym-normalized-raw",
            ShiftKind::RandomWalk => "random-walk",
            ShiftKind::RandomWalkWithSelfLoops => "random-walk-with-self-loops",
            ShiftKind::MeanDegreeScaled => "mean-degree-scaled",
            ShiftKind::MeanDegreeScaledWithSelfLoops => "mean-degree-scaled-with-self-loops",
        }
    }
}

/// A sparse real shift operator derived from a graph.
#[derive(Debug, Clone)]
pub struct ShiftOperator {
    pub kind: ShiftKind,
    pub matrix: CsrMatrix,
    pub symmetric: bool,
}

impl ShiftOperator {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Wraps an arbitrary square matrix; symmetry is detected entrywise.
    /// Useful for the modified operators of the anisotropic bounds.
    pub fn from_matrix(matrix: CsrMatrix, kind: ShiftKind) -> Self {
        let symmetric = matrix.is_symmetric();
        ShiftOperator {
            kind,
            matrix,
            symmetric,
        }
    }
}

/// Builds the requested shift operator. Self-loops, when enabled, are added
/// to the adjacency before degrees are computed. Degree-normalized kinds
/// reject graphs with isolated nodes unless self-loops are on.
pub fn shift_operator(g: &Graph, norm: Normalization, add_self_loops: bool) -> Result<ShiftOperator> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = g.n();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(g.edge_count() * 2 + n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            triplets.push((u, v, 1.0));
        }
    }
    if add_self_loops {
        for i in 0..n {
            triplets.push((i, i, 1.0));
        }
    }
    let degrees: Vec<f64> = {
        let mut d = vec![0.0; n];
        for &(u, _, w) in &triplets {
            d[u] += w;
        }
        d
    };

    let needs_degrees = !matches!(norm, Normalization::MeanDegreeScaled);
    if needs_degrees {
        let isolated: Vec<usize> = (0..n).filter(|&i| degrees[i] == 0.0).collect();
        if !isolated.is_empty() {
            return Err(Error::DegenerateDegree { nodes: isolated });
        }
    }

    let (kind, symmetric) = match (norm, add_self_loops) {
        (Normalization::Symmetric, true) => (ShiftKind::SymNormalizedWithSelfLoops, true),
        (Normalization::Symmetric, false) => (ShiftKind::SymNormalizedRaw, true),
        (Normalization::RandomWalk, true) => (ShiftKind::RandomWalkWithSelfLoops, false),
        (Normalization::RandomWalk, false) => (ShiftKind::RandomWalk, false),
        (Normalization::MeanDegreeScaled, true) => (ShiftKind::MeanDegreeScaledWithSelfLoops, true),
        (Normalization::MeanDegreeScaled, false) => (ShiftKind::MeanDegreeScaled, true),
    };

    match norm {
        Normalization::Symmetric => {
            for t in &mut triplets {
                t.2 /= (degrees[t.0] * degrees[t.1]).sqrt();
            }
        }
        Normalization::RandomWalk => {
            for t in &mut triplets {
                t.2 /= degrees[t.0];
            }
        }
        Normalization::MeanDegreeScaled => {
            let total: f64 = degrees.iter().sum();
            if total == 0.0 {
                return Err(Error::EmptyEdgeSet);
            }
            let mean_degree = total / n as f64;
            for t in &mut triplets {
                t.2 /= mean_degree;
            }
        }
    }

    let matrix = CsrMatrix::from_triplets(n, n, &triplets);
    Ok(ShiftOperator {
        kind,
        matrix,
        symmetric,
    })
}

/// s.matrix^r * v, by r repeated sparse products.
pub fn apply_power(s: &ShiftOperator, v: &[f64], r: usize) -> Result<Vec<f64>> {
    if v.len() != s.n() {
        return Err(Error::DimensionMismatch {
            context: "apply_power",
            got: v.len(),
            expected: s.n(),
        });
    }
    Ok(s.matrix.pow_matvec(v, r))
}

/// s.matrix^r * M for an n x d matrix.
pub fn apply_power_matrix(s: &ShiftOperator, m: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    if m.nrows() != s.n() {
        return Err(Error::DimensionMismatch {
            context: "apply_power_matrix",
            got: m.nrows(),
            expected: s.n(),
        });
    }
    let mut out = m.clone();
    for _ in 0..r {
        out = s.matrix.matmul_dense(&out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn single_edge_sym_raw() {
        let g = build_graph(&[(0, 1)], &[0, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, false).unwrap();
        assert_eq!(s.kind, ShiftKind::SymNormalizedRaw);
        let d = s.matrix.to_dense();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], 1.0);
        assert_eq!(d[(0, 0)], 0.0);
    }

    #[test]
    fn single_edge_sym_self_loops() {
        let g = build_graph(&[(0, 1)], &[0, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let d = s.matrix.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn path_random_walk_row() {
        let g = build_graph(&[(0, 1), (1, 2)], &[0, 0, 0], None).unwrap();
        let s = shift_operator(&g, Normalization::RandomWalk, false).unwrap();
        let d = s.matrix.to_dense();
        assert!((d[(1, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(d[(1, 1)], 0.0);
        assert!((d[(1, 2)] - 0.5).abs() < 1e-15);
        // rows sum to 1 for non-isolated nodes
        for i in 0..3 {
            let sum: f64 = (0..3).map(|j| d[(i, j)]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_node_rejected_without_self_loops() {
        let g = build_graph(&[(0, 1)], &[0, 1, 0], None).unwrap();
        let err = shift_operator(&g, Normalization::Symmetric, false).unwrap_err();
        match err {
            Error::DegenerateDegree { nodes } => assert_eq!(nodes, vec![2]),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(shift_operator(&g, Normalization::Symmetric, true).is_ok());
    }

    #[test]
    fn apply_power_identity_and_single() {
        let g = build_graph(&[(0, 1), (1, 2), (2, 3)], &[0, 0, 1, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let v = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(apply_power(&s, &v, 0).unwrap(), v);
        let direct = s.matrix.matvec(&v);
        assert_eq!(apply_power(&s, &v, 1).unwrap(), direct);
    }

    #[test]
    fn apply_power_matches_dense_oracle() {
        let g = build_graph(&[(0, 1), (1, 2), (2, 3)], &[0, 0, 1, 1], None).unwrap();
        let s = shift_operator(&g, Normalization::Symmetric, true).unwrap();
        let dense = s.matrix.to_dense();
        let dense_sq = &dense * &dense;
        let v = vec![1.0, -1.0, 0.5, 2.0];
        let via_sparse = apply_power(&s, &v, 2).unwrap();
        for i in 0..4 {
            let expect: f64 = (0..4).map(|j| dense_sq[(i, j)] * v[j]).sum();
            assert!((via_sparse[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sym_kinds_are_bitwise_symmetric() {
        let g = build_graph(&[(0, 1), (1, 2), (0, 3), (2, 3), (1, 3)], &[0, 1, 0, 1], None).unwrap();
        for loops in [false, true] {
            let s = shift_operator(&g, Normalization::Symmetric, loops).unwrap();
            assert!(s.symmetric);
            assert!(s.matrix.is_symmetric());
        }
    }
}
