//! Downstream evaluation of frozen embeddings: linear probing, k-means
//! clustering scores, similarity histograms and inference timing.

mod kmeans;
mod metrics;
mod probe;
mod similarity;
mod split;
mod timing;

pub use kmeans::{kmeans, KmeansConfig, KmeansResult};
pub use metrics::{accuracy, homogeneity, micro_f1, nmi};
pub use probe::{linear_probe, ProbeConfig, ProbeResult};
pub use similarity::{similarity_histograms, SimilarityHistograms, MAX_FULL_PAIRS_NODES};
pub use split::{make_splits, Split, SplitRatios};
pub use timing::{timing_harness, TimingEntry, TimingReport, WARMUP_PASSES};

use serde::{Deserialize, Serialize};

use crate::diffcore::{Purpose, RngStream, Tensor};
use crate::error::{Result, SignaError};

/// Mean and, for two or more values, the sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub runs: Vec<ProbeResult>,
    pub micro_f1: Stat,
    pub accuracy: Stat,
    pub ratios: SplitRatios,
    pub probe: ProbeConfig,
}

/// Linear probe over `num_runs` random splits derived from `seed`.
pub fn evaluate_classification(
    embeddings: &Tensor,
    labels: &[usize],
    ratios: SplitRatios,
    num_runs: usize,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<ClassificationSummary> {
    if num_runs == 0 {
        return Err(SignaError::InvalidArgument(
            "runs must be at least 1".into(),
        ));
    }
    let splits = make_splits(labels.len(), ratios, num_runs, seed)?;
    classify_on_splits(embeddings, labels, &splits, ratios, probe)
}

/// Linear probe on given splits.
pub fn classify_on_splits(
    embeddings: &Tensor,
    labels: &[usize],
    splits: &[Split],
    ratios: SplitRatios,
    probe: &ProbeConfig,
) -> Result<ClassificationSummary> {
    let runs = splits
        .iter()
        .map(|s| linear_probe(embeddings, labels, s, probe))
        .collect::<Result<Vec<_>>>()?;
    let f1: Vec<f64> = runs.iter().map(|r| r.micro_f1).collect();
    let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    Ok(ClassificationSummary {
        micro_f1: Stat::from_values(&f1)
            .ok_or_else(|| SignaError::InvalidArgument("no splits".into()))?,
        accuracy: Stat::from_values(&acc).expect("same length as f1"),
        runs,
        ratios,
        probe: *probe,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub nmi: f64,
    pub homogeneity: f64,
    pub inertia: f64,
    pub nmi_normalization: String,
    pub kmeans: KmeansConfig,
}

/// k-means with `k` equal to the number of classes, scored against labels.
pub fn evaluate_clustering(
    embeddings: &Tensor,
    labels: &[usize],
    seed: u64,
    cfg: &KmeansConfig,
) -> Result<ClusteringSummary> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let k = k.min(distinct.len()).max(1);
    let mut rng = RngStream::new(seed, Purpose::Kmeans);
    let result = kmeans(embeddings, k, cfg, &mut rng)?;
    Ok(ClusteringSummary {
        k,
        nmi: nmi(&result.assignments, labels)?,
        homogeneity: homogeneity(&result.assignments, labels)?,
        inertia: result.inertia,
        nmi_normalization: "arithmetic".into(),
        kmeans: *cfg,
    })
}

/// Output of one evaluation command. Classification and clustering reports
/// carry no timestamps, so equal inputs serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: String,
    pub seed: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_curve: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
}

impl MetricsReport {
    pub fn new(mode: &str, seed: u64) -> Self {
        MetricsReport {
            mode: mode.into(),
            seed,
            seeds: vec![seed],
            config: None,
            loss_curve: None,
            classification: None,
            clustering: None,
            timing: None,
            outputs: Vec::new(),
        }
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
