use serde::Serialize;

use crate::diffcore::{RngStream, Tensor};
use crate::error::{Result, SignaError};
use crate::graphdata::Graph;

/// Above this many nodes the full pair enumeration needs an explicit
/// subsample size.
pub const MAX_FULL_PAIRS_NODES: usize = 5000;

/// Binned cosine similarities over unordered node pairs on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityHistograms {
    pub bin_edges: Vec<f64>,
    pub neighbor: Vec<u64>,
    pub non_neighbor: Vec<u64>,
    pub same_label: Option<Vec<u64>>,
    pub diff_label: Option<Vec<u64>>,
    pub num_pairs: u64,
}

impl SimilarityHistograms {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,neighbor,non_neighbor,same_label,diff_label\n");
        for b in 0..self.neighbor.len() {
            let label =
                |h: &Option<Vec<u64>>| h.as_ref().map_or(String::new(), |v| v[b].to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.bin_edges[b],
                self.bin_edges[b + 1],
                self.neighbor[b],
                self.non_neighbor[b],
                label(&self.same_label),
                label(&self.diff_label),
            ));
        }
        out
    }
}

fn bin_of(cos: f64, bins: usize) -> usize {
    let t = ((cos + 1.0) / 2.0 * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

/// Histograms of pairwise cosine similarity split by adjacency and, when
/// the graph has labels, by label agreement. `subsample` draws that many
/// random unordered pairs instead of enumerating all of them, and is
/// required above [`MAX_FULL_PAIRS_NODES`] nodes.
pub fn similarity_histograms(
    embeddings: &Tensor,
    graph: &Graph,
    bins: usize,
    subsample: Option<(usize, &mut RngStream)>,
) -> Result<SimilarityHistograms> {
    let (n, d) = embeddings.dims2()?;
    if n != graph.num_nodes() {
        return Err(SignaError::Dimension {
            op: "similarity_histograms",
            left: vec![n],
            right: vec![graph.num_nodes()],
        });
    }
    if bins == 0 {
        return Err(SignaError::InvalidArgument("need at least one bin".into()));
    }
    if n < 2 {
        return Err(SignaError::Analysis("need at least two nodes".into()));
    }
    if n > MAX_FULL_PAIRS_NODES && subsample.is_none() {
        return Err(SignaError::InvalidArgument(format!(
            "{n} nodes exceed {MAX_FULL_PAIRS_NODES}; pass a pair subsample size"
        )));
    }
    let mut unit = Vec::with_capacity(n * d);
    for i in 0..n {
        let row = embeddings.row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(SignaError::DegenerateEmbedding { row: i });
        }
        unit.extend(row.iter().map(|v| v / norm));
    }
    let labels = graph.labels();
    let mut h = SimilarityHistograms {
        bin_edges: (0..=bins)
            .map(|b| -1.0 + 2.0 * b as f64 / bins as f64)
            .collect(),
        neighbor: vec![0; bins],
        non_neighbor: vec![0; bins],
        same_label: labels.map(|_| vec![0; bins]),
        diff_label: labels.map(|_| vec![0; bins]),
        num_pairs: 0,
    };
    let mut record = |u: usize, v: usize| {
        let cos: f64 = unit[u * d..(u + 1) * d]
            .iter()
            .zip(&unit[v * d..(v + 1) * d])
            .map(|(a, b)| a * b)
            .sum();
        let b = bin_of(cos.clamp(-1.0, 1.0), bins);
        if graph.has_edge(u, v) {
            h.neighbor[b] += 1;
        } else {
            h.non_neighbor[b] += 1;
        }
        if let Some(l) = labels {
            let target = if l[u] == l[v] {
                &mut h.same_label
            } else {
                &mut h.diff_label
            };
            target.as_mut().expect("labels present")[b] += 1;
        }
        h.num_pairs += 1;
    };
    match subsample {
        None => {
            for u in 0..n {
                for v in u + 1..n {
                    record(u, v);
                }
            }
        }
        Some((count, rng)) => {
            for _ in 0..count {
                let u = rng.below(n);
                let mut v = rng.below(n - 1);
                if v >= u {
                    v += 1;
                }
                record(u.min(v), u.max(v));
            }
        }
    }
    Ok(h)
}
