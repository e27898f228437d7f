use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoder::{BaseEncoder, EncoderState};
use crate::error::{Result, SignaError};
use crate::graphdata::{normalized_adjacency, Graph};

pub const WARMUP_PASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub encoder_kind: BaseEncoder,
    /// Median over the timed repeats.
    pub wall_millis: f64,
    pub samples_millis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub repeats: usize,
    pub warmup: usize,
    pub entries: Vec<TimingEntry>,
    /// Graph-convolution median divided by linear median.
    pub gcn_over_mlp: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Times one full inference pass with the linear and the graph-convolution
/// base encoder over the same parameters. The normalized adjacency is
/// built once, outside the timed region.
pub fn timing_harness(graph: &Graph, state: &EncoderState, repeats: usize) -> Result<TimingReport> {
    if repeats == 0 {
        return Err(SignaError::InvalidArgument(
            "repeats must be at least 1".into(),
        ));
    }
    let adj = normalized_adjacency(graph);
    let mut entries = Vec::new();
    for kind in [BaseEncoder::Linear, BaseEncoder::Gconv] {
        let variant = state.with_base_encoder(kind);
        let adj = (kind == BaseEncoder::Gconv).then_some(&adj);
        for _ in 0..WARMUP_PASSES {
            std::hint::black_box(variant.inference_with(graph.features(), adj)?);
        }
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            std::hint::black_box(variant.inference_with(graph.features(), adj)?);
            samples.push(start.elapsed().as_secs_f64() * 1e3);
        }
        entries.push(TimingEntry {
            encoder_kind: kind,
            wall_millis: median(&samples),
            samples_millis: samples,
        });
    }
    let ratio = entries[1].wall_millis / entries[0].wall_millis.max(f64::MIN_POSITIVE);
    Ok(TimingReport {
        repeats,
        warmup: WARMUP_PASSES,
        entries,
        gcn_over_mlp: ratio,
    })
}
