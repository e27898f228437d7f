use log::warn;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, micro_f1};
use super::split::Split;
use crate::diffcore::{Adam, ParamStore, Precision, Tape, Tensor};
use crate::error::{Result, SignaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            learning_rate: 0.01,
            epochs: 300,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub micro_f1: f64,
    pub accuracy: f64,
    pub val_micro_f1: f64,
    /// Number of completed updates at the selected point.
    pub best_epoch: usize,
}

fn gather(x: &Tensor, idx: &[usize]) -> Tensor {
    let d = x.cols();
    let data = idx.iter().flat_map(|&i| x.row(i).iter().copied()).collect();
    Tensor::new(vec![idx.len(), d], data).expect("gathered rows")
}

fn predict(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    let logits = x.matmul(w)?;
    Ok((0..logits.rows())
        .map(|i| {
            logits
                .row(i)
                .iter()
                .zip(b.data())
                .map(|(l, bias)| l + bias)
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (c, v)| if v > acc.1 { (c, v) } else { acc },
                )
                .0
        })
        .collect())
}

/// Per-column mean and standard deviation over the given rows. Constant
/// columns get unit scale.
fn column_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows() as f64, x.cols());
    let mut mean = vec![0.0; d];
    for i in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for i in 0..x.rows() {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

fn standardize(x: &mut Tensor, mean: &[f64], scale: &[f64]) {
    let d = x.cols();
    for (j, v) in x.data_mut().iter_mut().enumerate() {
        *v = (*v - mean[j % d]) / scale[j % d];
    }
}

/// Multinomial logistic regression on frozen embeddings. Inputs are
/// standardized with training-node statistics, weights start at zero and
/// are trained with full-batch Adam on the training nodes; the
/// parameters with the best validation micro-F1 (latest on ties) are
/// scored on the test nodes.
pub fn linear_probe(
    embeddings: &Tensor,
    labels: &[usize],
    split: &Split,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    let (n, d) = embeddings.dims2()?;
    if labels.len() != n {
        return Err(SignaError::Dimension {
            op: "linear_probe",
            left: vec![n],
            right: vec![labels.len()],
        });
    }
    if !embeddings.is_finite() {
        return Err(SignaError::NonFinite { op: "linear_probe" });
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut present = vec![false; classes];
    for &i in &split.train {
        present[labels[i]] = true;
    }
    let absent: Vec<usize> = (0..classes).filter(|&c| !present[c]).collect();
    if !absent.is_empty() {
        warn!("classes {absent:?} have no training nodes");
    }

    let mut x_train = gather(embeddings, &split.train);
    let mut x_val = gather(embeddings, &split.val);
    let mut x_test = gather(embeddings, &split.test);
    let (mean, scale) = column_stats(&x_train);
    for x in [&mut x_train, &mut x_val, &mut x_test] {
        standardize(x, &mean, &scale);
    }
    let pick = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| labels[i]).collect() };
    let (y_train, y_val, y_test) = (pick(&split.train), pick(&split.val), pick(&split.test));

    let m = split.train.len();
    let mut onehot = Tensor::zeros(&[m, classes]);
    for (r, &y) in y_train.iter().enumerate() {
        onehot.data_mut()[r * classes + y] = 1.0;
    }
    let all = Tensor::ones(&[m, classes]);

    let mut store = ParamStore::new(Precision::F64);
    let w_id = store.add("probe.weight", Tensor::zeros(&[d, classes]))?;
    let b_id = store.add("probe.bias", Tensor::zeros(&[classes]))?;
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay)?;

    let score = |store: &ParamStore| -> Result<f64> {
        micro_f1(
            &predict(&x_val, store.value(w_id), store.value(b_id))?,
            &y_val,
        )
    };
    let mut best_val = score(&store)?;
    let mut best_epoch = 0;
    let mut best = (store.value(w_id).clone(), store.value(b_id).clone());

    for epoch in 1..=cfg.epochs {
        let mut tape = Tape::new(Precision::F64);
        let x = tape.constant(x_train.clone())?;
        let w = tape.param(&store, w_id)?;
        let b = tape.param(&store, b_id)?;
        let logits = tape.matmul(x, w)?;
        let logits = tape.add_row_bias(logits, b)?;
        let lse = tape.row_logsumexp_masked(logits, &all)?;
        let y = tape.constant(onehot.clone())?;
        let picked = tape.hadamard(y, logits)?;
        let picked = tape.sum(picked)?;
        let norm = tape.sum(lse)?;
        let total = tape.sub(norm, picked)?;
        let loss = tape.scalar_mul(total, 1.0 / m as f64)?;
        tape.backward(loss, &mut store)?;
        adam.step(&mut store)?;
        let val = score(&store)?;
        if val >= best_val {
            best_val = val;
            best_epoch = epoch;
            best = (store.value(w_id).clone(), store.value(b_id).clone());
        }
    }
    let pred = predict(&x_test, &best.0, &best.1)?;
    Ok(ProbeResult {
        micro_f1: micro_f1(&pred, &y_test)?,
        accuracy: accuracy(&pred, &y_test)?,
        val_micro_f1: best_val,
        best_epoch,
    })
}
