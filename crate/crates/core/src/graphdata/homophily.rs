use serde::Serialize;

use super::graph::Graph;
use crate::error::{Result, SignaError};

/// Number of unit-width count bins; the last bin collects counts ≥ 50.
pub const COUNT_OVERFLOW_BIN: usize = 50;
/// Uniform bins for local ratios on `[0, 1]`.
pub const RATIO_BINS: usize = 20;

/// Global and local homophily of a labeled graph.
///
/// Isolated nodes have count 0 and a NaN ratio (serialized as `null`) and
/// are left out of both histograms.
#[derive(Debug, Clone, Serialize)]
pub struct HomophilyReport {
    /// `None` when the graph has no edges.
    pub global_ratio: Option<f64>,
    pub num_edges: usize,
    pub local_counts: Vec<usize>,
    pub local_ratios: Vec<f64>,
    /// `count_histogram[k]` = nodes with count `k`; index 50 means `≥ 50`.
    pub count_histogram: Vec<usize>,
    /// `ratio_histogram[k]` covers `[k/20, (k+1)/20)`, the last bin is closed.
    pub ratio_histogram: Vec<usize>,
}

impl HomophilyReport {
    pub fn count_histogram_csv(&self) -> String {
        let mut out = String::from("count,nodes\n");
        for (k, n) in self.count_histogram.iter().enumerate() {
            if k == COUNT_OVERFLOW_BIN {
                out.push_str(&format!("{k}+,{n}\n"));
            } else {
                out.push_str(&format!("{k},{n}\n"));
            }
        }
        out
    }

    pub fn ratio_histogram_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,nodes\n");
        for (k, n) in self.ratio_histogram.iter().enumerate() {
            let lo = k as f64 / RATIO_BINS as f64;
            let hi = (k + 1) as f64 / RATIO_BINS as f64;
            out.push_str(&format!("{lo},{hi},{n}\n"));
        }
        out
    }

    pub fn per_node_csv(&self) -> String {
        let mut out = String::from("node,local_count,local_ratio\n");
        for (u, (c, r)) in self.local_counts.iter().zip(&self.local_ratios).enumerate() {
            if r.is_nan() {
                out.push_str(&format!("{u},{c},\n"));
            } else {
                out.push_str(&format!("{u},{c},{r}\n"));
            }
        }
        out
    }
}

fn labels_of(g: &Graph) -> Result<&[usize]> {
    g.labels()
        .ok_or_else(|| SignaError::Analysis("homophily requires node labels".into()))
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn global_homophily(g: &Graph) -> Result<f64> {
    let labels = labels_of(g)?;
    if g.num_edges() == 0 {
        return Err(SignaError::Analysis(
            "global homophily is undefined for a graph without edges".into(),
        ));
    }
    let same = g.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / g.num_edges() as f64)
}

pub fn local_homophily(g: &Graph) -> Result<HomophilyReport> {
    let labels = labels_of(g)?;
    let n = g.num_nodes();
    let mut local_counts = Vec::with_capacity(n);
    let mut local_ratios = Vec::with_capacity(n);
    let mut count_histogram = vec![0usize; COUNT_OVERFLOW_BIN + 1];
    let mut ratio_histogram = vec![0usize; RATIO_BINS];
    for u in 0..n {
        let neigh = g.neighbors(u);
        let count = neigh.iter().filter(|&&v| labels[v] == labels[u]).count();
        local_counts.push(count);
        if neigh.is_empty() {
            local_ratios.push(f64::NAN);
            continue;
        }
        let ratio = count as f64 / neigh.len() as f64;
        local_ratios.push(ratio);
        count_histogram[count.min(COUNT_OVERFLOW_BIN)] += 1;
        let bin = ((ratio * RATIO_BINS as f64) as usize).min(RATIO_BINS - 1);
        ratio_histogram[bin] += 1;
    }
    let global_ratio = if g.num_edges() == 0 {
        None
    } else {
        Some(global_homophily(g)?)
    };
    Ok(HomophilyReport {
        global_ratio,
        num_edges: g.num_edges(),
        local_counts,
        local_ratios,
        count_histogram,
        ratio_histogram,
    })
}
