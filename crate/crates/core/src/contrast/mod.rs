//! Stochastic neighbor masking and the contrastive objectives.
//!
//! Every anchor `u` contrasts its positives `P_u` (itself plus the
//! neighbors that survived masking) against all remaining nodes
//! `Q_u = V \ P_u`. Three estimators are available: the normalized
//! discriminator `D = (cos + 1) / 2` with a Jensen-Shannon style loss, the
//! same loss with `D = sigmoid(z_u · z_v)`, and an InfoNCE variant.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Precision, RngStream, Tape, Tensor, Var};
use crate::error::{Result, SignaError};
use crate::graphdata::Graph;


pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;
pub const DEFAULT_TEMPERATURE: f64 = 0.5;

/// Positive sets drawn for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastDraw {
    positives: Vec<Vec<usize>>,
    mask_rate: f64,
    epoch: usize,
}

impl ContrastDraw {
    /// Builds a draw from explicit positive sets. Each set is sorted and
    /// must contain its anchor.
    pub fn from_positives(
        positives: Vec<Vec<usize>>,
        mask_rate: f64,
        epoch: usize,
    ) -> Result<Self> {
        let n = positives.len();
        let mut positives = positives;
        for (u, p) in positives.iter_mut().enumerate() {
            p.sort_unstable();
            p.dedup();
            if p.binary_search(&u).is_err() {
                return Err(SignaError::InvalidArgument(format!(
                    "positive set of node {u} does not contain it"
                )));
            }
            if p.last().is_some_and(|&v| v >= n) {
                return Err(SignaError::InvalidArgument(format!(
                    "positive set of node {u} has an index out of range"
                )));
            }
        }
        Ok(ContrastDraw {
            positives,
            mask_rate,
            epoch,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.positives.len()
    }

    /// Sorted `P_u`, always containing `u`.
    pub fn positives(&self, u: usize) -> &[usize] {
        &self.positives[u]
    }

    pub fn is_positive(&self, u: usize, v: usize) -> bool {
        self.positives[u].binary_search(&v).is_ok()
    }

    /// `|Q_u|`.
    pub fn negative_count(&self, u: usize) -> usize {
        self.num_nodes() - self.positives[u].len()
    }

    pub fn negatives(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(move |&v| !self.is_positive(u, v))
    }

    pub fn mask_rate(&self) -> f64 {
        self.mask_rate
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }
}

/// Keeps each directed neighbor pair `(u, v)` with probability `1 - α`.
/// One uniform draw is consumed per directed pair, in CSR order.
pub fn draw_masks(
    graph: &Graph,
    alpha: f64,
    epoch: usize,
    rng: &mut RngStream,
) -> Result<ContrastDraw> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SignaError::InvalidArgument(format!(
            "mask rate {alpha} outside [0, 1]"
        )));
    }
    let positives = (0..graph.num_nodes())
        .map(|u| {
            let mut p = Vec::with_capacity(graph.degree(u) + 1);
            let mut self_added = false;
            for &v in graph.neighbors(u) {
                if !self_added && v > u {
                    p.push(u);
                    self_added = true;
                }
                if rng.uniform() >= alpha {
                    p.push(v);
                }
            }
            if !self_added {
                p.push(u);
            }
            p
        })
        .collect();
    Ok(ContrastDraw {
        positives,
        mask_rate: alpha,
        epoch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    NormJsd,
    Jsd,
    InfoNce,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_clamp_eps() -> f64 {
    DEFAULT_CLAMP_EPS
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_clamp_eps")]
    pub clamp_eps: f64,
    #[serde(default = "one")]
    pub target_pos: f64,
    #[serde(default)]
    pub target_neg: f64,
    /// Uniformly sampled negatives per anchor instead of all of `Q_u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_samples: Option<usize>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec::new(EstimatorKind::NormJsd)
    }
}

impl EstimatorSpec {
    pub const FIELDS: &'static [&'static str] = &[
        "kind",
        "temperature",
        "clamp_eps",
        "target_pos",
        "target_neg",
        "negative_samples",
    ];

    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorSpec {
            kind,
            temperature: DEFAULT_TEMPERATURE,
            clamp_eps: DEFAULT_CLAMP_EPS,
            target_pos: 1.0,
            target_neg: 0.0,
            negative_samples: None,
        }
    }

    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            out.push(format!(
                "estimator.temperature: {} must be positive",
                self.temperature
            ));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            out.push(format!(
                "estimator.clamp_eps: {} outside (0, 0.5)",
                self.clamp_eps
            ));
        }
        if self.kind == EstimatorKind::NormJsd && (self.target_pos != 1.0 || self.target_neg != 0.0)
        {
            out.push(
                "estimator.target_pos/target_neg: norm_jsd targets are fixed at 1 and 0".into(),
            );
        }
        match (self.kind, self.negative_samples) {
            (_, Some(0)) => out.push("estimator.negative_samples: must be at least 1".into()),
            (EstimatorKind::InfoNce, Some(_)) => {
                out.push("estimator.negative_samples: not supported for info_nce".into())
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SignaError::Config(issues))
        }
    }

    /// Records the configured loss for projections `z` on `tape`. `rng` is
    /// only drawn from when negatives are subsampled.
    pub fn loss_on_tape(
        &self,
        tape: &mut Tape,
        z: Var,
        draw: &ContrastDraw,
        rng: &mut RngStream,
    ) -> Result<Var> {
        self.validate()?;
        match (self.kind, self.negative_samples) {
            (EstimatorKind::InfoNce, _) => info_nce_on_tape(tape, z, draw, self.temperature),
            (kind, Some(k)) => {
                let negatives = sample_negatives(draw, k, rng)?;
                sampled_jsd_on_tape(tape, z, draw, &negatives, kind, self.clamp_eps)
            }
            (EstimatorKind::NormJsd, None) => norm_jsd_on_tape(tape, z, draw, self.clamp_eps),
            (EstimatorKind::Jsd, None) => jsd_on_tape(tape, z, draw, self.clamp_eps),
        }
    }
}

/// `(cos(z_u, z_v) + 1) / 2`.
pub fn discriminator_norm(zu: &[f64], zv: &[f64]) -> Result<f64> {
    if zu.len() != zv.len() {
        return Err(SignaError::Dimension {
            op: "discriminator_norm",
            left: vec![zu.len()],
            right: vec![zv.len()],
        });
    }
    let nu = zu.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = zv.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu < 1e-12 {
        return Err(SignaError::DegenerateEmbedding { row: 0 });
    }
    if nv < 1e-12 {
        return Err(SignaError::DegenerateEmbedding { row: 1 });
    }
    let dot: f64 = zu.iter().zip(zv).map(|(a, b)| a * b).sum();
    let cos = (dot / (nu * nv)).clamp(-1.0, 1.0);
    Ok((cos + 1.0) / 2.0)
}

/// Row weights `1/|P_u|` on positives and `1/|Q_u|` on negatives.
fn pair_weights(draw: &ContrastDraw) -> Result<(Tensor, Tensor)> {
    let n = draw.num_nodes();
    let mut wpos = vec![0.0; n * n];
    let mut wneg = vec![0.0; n * n];
    for u in 0..n {
        let q = draw.negative_count(u);
        if q == 0 {
            return Err(SignaError::DegenerateGraph(format!(
                "node {u} has no negatives; the graph needs more nodes than max degree + 1"
            )));
        }
        let row_neg = &mut wneg[u * n..(u + 1) * n];
        row_neg.fill(1.0 / q as f64);
        let p = draw.positives(u);
        let wp = 1.0 / p.len() as f64;
        for &v in p {
            wpos[u * n + v] = wp;
            row_neg[v] = 0.0;
        }
    }
    Ok((
        Tensor::new(vec![n, n], wpos)?,
        Tensor::new(vec![n, n], wneg)?,
    ))
}

fn check_rows(tape: &Tape, z: Var, draw: &ContrastDraw) -> Result<usize> {
    let (n, _) = tape.value(z).dims2()?;
    if n != draw.num_nodes() {
        return Err(SignaError::Dimension {
            op: "contrast",
            left: vec![n],
            right: vec![draw.num_nodes()],
        });
    }
    Ok(n)
}

/// `-(1/n) Σ_u [Σ_v wpos log D + Σ_v wneg log(1 - D)]` with `D` clamped.
fn weighted_jsd(
    tape: &mut Tape,
    d: Var,
    wpos: Tensor,
    wneg: Tensor,
    n: usize,
    eps: f64,
) -> Result<Var> {
    let d = tape.clamp(d, eps, 1.0 - eps)?;
    let log_d = tape.log(d)?;
    let neg_d = tape.scalar_mul(d, -1.0)?;
    let one_minus = tape.add_scalar(neg_d, 1.0)?;
    let log_1m = tape.log(one_minus)?;
    let wpos = tape.constant(wpos)?;
    let wneg = tape.constant(wneg)?;
    let pos = tape.hadamard(wpos, log_d)?;
    let neg = tape.hadamard(wneg, log_1m)?;
    let pos = tape.sum(pos)?;
    let neg = tape.sum(neg)?;
    let total = tape.add(pos, neg)?;
    tape.scalar_mul(total, -1.0 / n as f64)
}

fn cosine_matrix(tape: &mut Tape, z: Var) -> Result<Var> {
    let zn = tape.rows_l2_normalize(z)?;
    let znt = tape.transpose(zn)?;
    tape.matmul(zn, znt)
}

pub fn norm_jsd_on_tape(tape: &mut Tape, z: Var, draw: &ContrastDraw, eps: f64) -> Result<Var> {
    let n = check_rows(tape, z, draw)?;
    let (wpos, wneg) = pair_weights(draw)?;
    let cos = cosine_matrix(tape, z)?;
    norm_jsd_from_cosine(tape, cos, wpos, wneg, n, eps)
}

fn norm_jsd_from_cosine(
    tape: &mut Tape,
    cos: Var,
    wpos: Tensor,
    wneg: Tensor,
    n: usize,
    eps: f64,
) -> Result<Var> {
    let half = tape.scalar_mul(cos, 0.5)?;
    let d = tape.add_scalar(half, 0.5)?;
    weighted_jsd(tape, d, wpos, wneg, n, eps)
}

pub fn jsd_on_tape(tape: &mut Tape, z: Var, draw: &ContrastDraw, eps: f64) -> Result<Var> {
    let n = check_rows(tape, z, draw)?;
    let (wpos, wneg) = pair_weights(draw)?;
    let zt = tape.transpose(z)?;
    let logits = tape.matmul(z, zt)?;
    let d = tape.sigmoid(logits)?;
    weighted_jsd(tape, d, wpos, wneg, n, eps)
}

/// Per anchor `u` with `k_u = |P_u \ {u}| > 0`:
/// `-(1/k_u) Σ_{v ∈ P_u \ {u}} log softmax_{w ≠ u}(cos(z_u, z_w) / τ)_v`.
/// Anchors without neighbor positives contribute zero; the result is the
/// mean over all anchors.
pub fn info_nce_on_tape(
    tape: &mut Tape,
    z: Var,
    draw: &ContrastDraw,
    temperature: f64,
) -> Result<Var> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(SignaError::InvalidArgument(format!(
            "temperature {temperature} must be positive"
        )));
    }
    let n = check_rows(tape, z, draw)?;
    if n < 2 {
        return Err(SignaError::DegenerateGraph(
            "contrast needs at least two nodes".into(),
        ));
    }
    let mut wpos = vec![0.0; n * n];
    let mut active = vec![0.0; n];
    let mut offdiag = Tensor::ones(&[n, n]);
    for u in 0..n {
        offdiag.data_mut()[u * n + u] = 0.0;
        let k = draw.positives(u).len() - 1;
        if k == 0 {
            continue;
        }
        active[u] = 1.0;
        for &v in draw.positives(u).iter().filter(|&&v| v != u) {
            wpos[u * n + v] = 1.0 / k as f64;
        }
    }
    let cos = cosine_matrix(tape, z)?;
    let logits = tape.scalar_mul(cos, 1.0 / temperature)?;
    let lse = tape.row_logsumexp_masked(logits, &offdiag)?;
    let wpos = tape.constant(Tensor::new(vec![n, n], wpos)?)?;
    let active = tape.constant(Tensor::new(vec![n, 1], active)?)?;
    let pos = tape.hadamard(wpos, logits)?;
    let pos = tape.sum(pos)?;
    let norm = tape.hadamard(active, lse)?;
    let norm = tape.sum(norm)?;
    let total = tape.sub(pos, norm)?;
    tape.scalar_mul(total, -1.0 / n as f64)
}

/// `k` negatives per anchor, drawn uniformly with replacement from `Q_u`.
pub fn sample_negatives(
    draw: &ContrastDraw,
    k: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    let n = draw.num_nodes();
    (0..n)
        .map(|u| {
            if draw.negative_count(u) == 0 {
                return Err(SignaError::DegenerateGraph(format!(
                    "node {u} has no negatives"
                )));
            }
            Ok((0..k)
                .map(|_| loop {
                    let w = rng.below(n);
                    if !draw.is_positive(u, w) {
                        break w;
                    }
                })
                .collect())
        })
        .collect()
}

/// Same objective as the dense estimators, with the negative average taken
/// over the given samples. Memory is linear in the number of pairs.
pub fn sampled_jsd_on_tape(
    tape: &mut Tape,
    z: Var,
    draw: &ContrastDraw,
    negatives: &[Vec<usize>],
    kind: EstimatorKind,
    eps: f64,
) -> Result<Var> {
    let n = check_rows(tape, z, draw)?;
    if negatives.len() != n {
        return Err(SignaError::Dimension {
            op: "sampled_jsd",
            left: vec![n],
            right: vec![negatives.len()],
        });
    }
    let mut pairs = Vec::new();
    let mut wpos = Vec::new();
    let mut wneg = Vec::new();
    for (u, negs) in negatives.iter().enumerate() {
        let p = draw.positives(u);
        for &v in p {
            pairs.push((u, v));
            wpos.push(1.0 / p.len() as f64);
            wneg.push(0.0);
        }
        let k = negs.len();
        if k == 0 {
            return Err(SignaError::InvalidArgument(format!(
                "node {u} has no sampled negatives"
            )));
        }
        for &w in negs {
            pairs.push((u, w));
            wpos.push(0.0);
            wneg.push(1.0 / k as f64);
        }
    }
    let m = pairs.len();
    let pairs = Arc::new(pairs);
    let d = match kind {
        EstimatorKind::NormJsd => {
            let zn = tape.rows_l2_normalize(z)?;
            let cos = tape.pair_dots(zn, &pairs)?;
            let half = tape.scalar_mul(cos, 0.5)?;
            tape.add_scalar(half, 0.5)?
        }
        EstimatorKind::Jsd => {
            let dots = tape.pair_dots(z, &pairs)?;
            tape.sigmoid(dots)?
        }
        EstimatorKind::InfoNce => {
            return Err(SignaError::InvalidArgument(
                "negative sampling is not available for info_nce".into(),
            ))
        }
    };
    weighted_jsd(
        tape,
        d,
        Tensor::new(vec![m], wpos)?,
        Tensor::new(vec![m], wneg)?,
        n,
        eps,
    )
}

fn eval_loss(z: &Tensor, f: impl FnOnce(&mut Tape, Var) -> Result<Var>) -> Result<f64> {
    let mut tape = Tape::new(Precision::F64);
    let zv = tape.constant(z.clone())?;
    let loss = f(&mut tape, zv)?;
    tape.value(loss).item()
}

/// Value of the normalized-discriminator loss.
pub fn loss_norm_jsd(z: &Tensor, draw: &ContrastDraw, eps: f64) -> Result<f64> {
    eval_loss(z, |t, zv| norm_jsd_on_tape(t, zv, draw, eps))
}

/// Value of the sigmoid inner-product discriminator loss.
pub fn loss_jsd_ablation(z: &Tensor, draw: &ContrastDraw, eps: f64) -> Result<f64> {
    eval_loss(z, |t, zv| jsd_on_tape(t, zv, draw, eps))
}

/// Value of the InfoNCE loss.
pub fn loss_info_nce_ablation(z: &Tensor, draw: &ContrastDraw, temperature: f64) -> Result<f64> {
    eval_loss(z, |t, zv| info_nce_on_tape(t, zv, draw, temperature))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub mask_rate: f64,
    pub target_pos: f64,
    pub target_neg: f64,
    pub num_trials: usize,
    pub neighbor_mean: f64,
    pub non_neighbor_mean: f64,
    pub expected_neighbor: f64,
    pub expected_non_neighbor: f64,
    /// Three binomial standard errors of the neighbor mean.
    pub tolerance: f64,
    pub passed: bool,
}

pub const MIN_THEOREM_TRIALS: usize = 1000;

/// Monte Carlo check of the expected targets under masking: a neighbor's
/// expected target is `δ(1-α) + λα` and a non-neighbor's is `λ`.
pub fn verify_theorem(
    alpha: f64,
    target_pos: f64,
    target_neg: f64,
    num_trials: usize,
    rng: &mut RngStream,
) -> Result<TheoremReport> {
    if num_trials < MIN_THEOREM_TRIALS {
        return Err(SignaError::InvalidArgument(format!(
            "need at least {MIN_THEOREM_TRIALS} trials, got {num_trials}"
        )));
    }
    // anchor 0, neighbor 1, non-neighbor 2
    let graph = Graph::from_edges(3, &[(0, 1)], Tensor::zeros(&[3, 1]), None)?.0;
    let mut kept = 0usize;
    let mut non_neighbor_positive = 0usize;
    for epoch in 0..num_trials {
        let draw = draw_masks(&graph, alpha, epoch, rng)?;
        kept += usize::from(draw.is_positive(0, 1));
        non_neighbor_positive += usize::from(draw.is_positive(0, 2));
    }
    let n = num_trials as f64;
    let frac = kept as f64 / n;
    let neighbor_mean = target_pos * frac + target_neg * (1.0 - frac);
    let nn_frac = non_neighbor_positive as f64 / n;
    let non_neighbor_mean = target_pos * nn_frac + target_neg * (1.0 - nn_frac);
    let expected_neighbor = target_pos * (1.0 - alpha) + target_neg * alpha;
    let tolerance = 3.0 * (target_pos - target_neg).abs() * (alpha * (1.0 - alpha) / n).sqrt();
    let passed = (neighbor_mean - expected_neighbor).abs() <= tolerance
        && (non_neighbor_mean - target_neg).abs() <= tolerance;
    Ok(TheoremReport {
        mask_rate: alpha,
        target_pos,
        target_neg,
        num_trials,
        neighbor_mean,
        non_neighbor_mean,
        expected_neighbor,
        expected_non_neighbor: target_neg,
        tolerance,
        passed,
    })
}
