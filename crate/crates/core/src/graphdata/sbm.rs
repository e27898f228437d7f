use super::graph::Graph;
use crate::diffcore::{RngStream, Tensor};
use crate::error::{Result, SignaError};

/// Stochastic block model with Gaussian node features.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    /// One mean vector per block; all of the same length.
    pub feature_means: Vec<Vec<f64>>,
    pub noise_sigma: f64,
}

impl SbmParams {
    /// Block `b` has mean `b · separation` in every one of `dim` coordinates.
    pub fn shifted_means(
        block_sizes: Vec<usize>,
        p_in: f64,
        p_out: f64,
        dim: usize,
        separation: f64,
        noise_sigma: f64,
    ) -> Self {
        let feature_means = (0..block_sizes.len())
            .map(|b| vec![b as f64 * separation; dim])
            .collect();
        SbmParams {
            block_sizes,
            p_in,
            p_out,
            feature_means,
            noise_sigma,
        }
    }

    /// Appends `extra` coordinates with mean zero in every block, so they
    /// carry noise only.
    pub fn with_noise_dims(mut self, extra: usize) -> Self {
        for m in &mut self.feature_means {
            m.extend(std::iter::repeat_n(0.0, extra));
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(self.p_in) && ok(self.p_out) && self.p_out <= self.p_in) {
            return Err(SignaError::InvalidArgument(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.feature_means.len() != self.block_sizes.len() {
            return Err(SignaError::InvalidArgument(format!(
                "{} feature means for {} blocks",
                self.feature_means.len(),
                self.block_sizes.len()
            )));
        }
        let dim = self.feature_means.first().map_or(0, Vec::len);
        if dim == 0 || self.feature_means.iter().any(|m| m.len() != dim) {
            return Err(SignaError::InvalidArgument(
                "feature means must be non-empty and equally sized".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SignaError::InvalidArgument(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Samples a graph: each pair inside a block is linked with probability
/// `p_in`, each cross-block pair with `p_out`. Labels are block ids.
pub fn sbm_generate(params: &SbmParams, rng: &mut RngStream) -> Result<Graph> {
    params.validate()?;
    let labels: Vec<usize> = params
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] {
                params.p_in
            } else {
                params.p_out
            };
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let dim = params.feature_means[0].len();
    let mut data = Vec::with_capacity(n * dim);
    for &b in &labels {
        for &m in &params.feature_means[b] {
            data.push(m + params.noise_sigma * rng.normal());
        }
    }
    let features = Tensor::new(vec![n, dim], data)?;
    Ok(Graph::from_edges(n, &edges, features, Some(labels))?.0)
}
