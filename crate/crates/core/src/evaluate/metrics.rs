use std::collections::HashMap;

use crate::error::{Result, SignaError};

/// Fraction of matching entries.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / pred.len() as f64)
}

/// Micro-averaged F1 from true positives, false positives and false
/// negatives pooled over all classes.
pub fn micro_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let classes = pred.iter().chain(truth).copied().max().unwrap_or(0) + 1;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let tp: usize = tp.iter().sum();
    let fp: usize = fp.iter().sum();
    let fn_: usize = fn_.iter().sum();
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() {
        return Err(SignaError::Analysis("empty input".into()));
    }
    if a.len() != b.len() {
        return Err(SignaError::Dimension {
            op: "partition",
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    Ok(())
}

/// Entropy in nats of a count vector. Counts are summed in sorted order so
/// equal multisets give bit-identical results.
fn entropy(counts: impl IntoIterator<Item = usize>, n: usize) -> f64 {
    let mut counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let n = n as f64;
    -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

struct Entropies {
    clusters: f64,
    classes: f64,
    joint: f64,
}

fn entropies(assignments: &[usize], labels: &[usize]) -> Result<Entropies> {
    check_lengths(assignments, labels)?;
    let n = assignments.len();
    let mut a: HashMap<usize, usize> = HashMap::new();
    let mut b: HashMap<usize, usize> = HashMap::new();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&k, &c) in assignments.iter().zip(labels) {
        *a.entry(k).or_default() += 1;
        *b.entry(c).or_default() += 1;
        *joint.entry((k, c)).or_default() += 1;
    }
    Ok(Entropies {
        clusters: entropy(a.into_values(), n),
        classes: entropy(b.into_values(), n),
        joint: entropy(joint.into_values(), n),
    })
}

/// Mutual information normalized by the arithmetic mean of both entropies.
/// Two single-cell partitions count as identical and score 1.
pub fn nmi(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    let h = entropies(assignments, labels)?;
    let mean = (h.clusters + h.classes) / 2.0;
    if mean == 0.0 {
        return Ok(1.0);
    }
    let mi = (h.clusters + h.classes - h.joint).max(0.0);
    Ok((mi / mean).clamp(0.0, 1.0))
}

/// `1 - H(C|K) / H(C)`, and 1 when the labels have zero entropy.
pub fn homogeneity(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    let h = entropies(assignments, labels)?;
    if h.classes == 0.0 {
        return Ok(1.0);
    }
    let conditional = (h.joint - h.clusters).max(0.0);
    Ok((1.0 - conditional / h.classes).clamp(0.0, 1.0))
}
