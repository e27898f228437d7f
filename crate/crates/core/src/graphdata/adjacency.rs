use std::sync::Arc;

use super::graph::Graph;
use crate::diffcore::{CsrMatrix, Tensor};
use crate::error::Result;

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` where `D̂` holds the degrees of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: Arc<CsrMatrix>,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Arc<CsrMatrix> {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn to_dense(&self) -> Tensor {
        self.matrix.to_dense()
    }

    /// Plain sparse-dense product, outside any tape.
    pub fn spmm(&self, x: &Tensor) -> Result<Tensor> {
        self.matrix.matmul_dense(x)
    }
}

pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|u| (g.degree(u) + 1) as f64).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.csr_targets().len() + n);
    let mut values = Vec::with_capacity(g.csr_targets().len() + n);
    offsets.push(0);
    for u in 0..n {
        let neigh = g.neighbors(u);
        let split = neigh.partition_point(|&v| v < u);
        let row = neigh[..split]
            .iter()
            .copied()
            .chain(std::iter::once(u))
            .chain(neigh[split..].iter().copied());
        for v in row {
            indices.push(v);
            values.push(1.0 / (deg[u] * deg[v]).sqrt());
        }
        offsets.push(indices.len());
    }
    let matrix =
        CsrMatrix::new(n, n, offsets, indices, values).expect("well-formed by construction");
    NormalizedAdjacency {
        matrix: Arc::new(matrix),
    }
}
