use crate::diffcore::Tensor;
use crate::error::{Result, SignaError};

/// Undirected, unweighted graph in CSR form with node features and optional
/// class labels.
///
/// Neighbor lists are sorted, symmetric and contain neither self-loops nor
/// duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: Tensor,
    labels: Option<Vec<usize>>,
    num_classes: Option<usize>,
}

/// What was discarded while building a graph from raw edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

impl Graph {
    /// Builds a graph from possibly directed, duplicated edges. Edges are
    /// symmetrized; self-loops are dropped.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Tensor,
        labels: Option<Vec<usize>>,
    ) -> Result<(Graph, BuildStats)> {
        let (rows, _) = features.dims2()?;
        if rows != num_nodes {
            return Err(SignaError::Dimension {
                op: "graph features",
                left: vec![num_nodes],
                right: features.shape().to_vec(),
            });
        }
        let mut stats = BuildStats::default();
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(SignaError::InvalidArgument(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            directed.push((u, v));
            directed.push((v, u));
        }
        directed.sort_unstable();
        let before = directed.len();
        directed.dedup();
        stats.duplicates_merged = (before - directed.len()) / 2;

        let mut offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &directed {
            offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let targets = directed.into_iter().map(|(_, v)| v).collect();

        let num_classes = match &labels {
            Some(l) if l.len() != num_nodes => {
                return Err(SignaError::Dimension {
                    op: "graph labels",
                    left: vec![num_nodes],
                    right: vec![l.len()],
                })
            }
            Some(l) => Some(l.iter().max().map_or(0, |m| m + 1)),
            None => None,
        };
        Ok((
            Graph {
                num_nodes,
                offsets,
                targets,
                features,
                labels,
                num_classes,
            },
            stats,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|u| self.degree(u)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes)
            .map(|u| self.degree(u))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.num_classes
    }

    /// Same structure with labels removed.
    pub fn without_labels(&self) -> Graph {
        Graph {
            labels: None,
            num_classes: None,
            ..self.clone()
        }
    }

    /// Every stored `(u, v)` has its reverse `(v, u)`.
    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|u| self.neighbors(u).iter().all(|&v| self.has_edge(v, u)))
    }
}
