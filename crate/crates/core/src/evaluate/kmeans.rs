use serde::{Deserialize, Serialize};

use crate::diffcore::{RngStream, Tensor};
use crate::error::{Result, SignaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            restarts: 10,
            max_iters: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Tensor,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: the first centroid uniformly, later ones with
/// probability proportional to the squared distance to the nearest chosen
/// centroid.
fn seed_centroids(x: &Tensor, k: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centroids = vec![x.row(rng.below(n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        let c = x.row(pick).to_vec();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(x: &Tensor, centroids: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, slot) in out.iter_mut().enumerate() {
        let (best, dist) = centroids
            .iter()
            .enumerate()
            .map(|(c, mu)| (c, sq_dist(x.row(i), mu)))
            .fold(
                (0, f64::INFINITY),
                |acc, cur| if cur.1 < acc.1 { cur } else { acc },
            );
        *slot = best;
        inertia += dist;
    }
    inertia
}

fn lloyd(x: &Tensor, k: usize, cfg: &KmeansConfig, rng: &mut RngStream) -> KmeansResult {
    let (n, d) = (x.rows(), x.cols());
    let mut centroids = seed_centroids(x, k, rng);
    let mut assignments = vec![0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let inertia = assign(x, &centroids, &mut assignments);
        history.push(inertia);
        iterations += 1;
        if iterations > cfg.max_iters {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] == 0 {
                // empty cluster: move to the point farthest from its centroid
                let far = (0..n)
                    .map(|i| (i, sq_dist(x.row(i), &centroids[assignments[i]])))
                    .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                    .0;
                x.row(far).to_vec()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift = shift.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift < cfg.tol {
            let inertia = assign(x, &centroids, &mut assignments);
            history.push(inertia);
            break;
        }
    }
    let inertia = *history.last().expect("at least one assignment");
    let flat = centroids.concat();
    KmeansResult {
        assignments,
        centroids: Tensor::new(vec![k, d], flat).expect("k×d centroids"),
        inertia,
        inertia_history: history,
        iterations,
    }
}

/// Best of `cfg.restarts` Lloyd runs by final inertia.
pub fn kmeans(
    x: &Tensor,
    k: usize,
    cfg: &KmeansConfig,
    rng: &mut RngStream,
) -> Result<KmeansResult> {
    let (n, _) = x.dims2()?;
    if k == 0 || k > n {
        return Err(SignaError::InvalidArgument(format!(
            "k = {k} must lie in [1, {n}]"
        )));
    }
    if cfg.restarts == 0 || cfg.tol.is_nan() || cfg.tol < 0.0 {
        return Err(SignaError::InvalidArgument(
            "k-means needs at least one restart and a non-negative tolerance".into(),
        ));
    }
    if !x.is_finite() {
        return Err(SignaError::NonFinite { op: "kmeans" });
    }
    let mut best: Option<KmeansResult> = None;
    for _ in 0..cfg.restarts {
        let run = lloyd(x, k, cfg, rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
