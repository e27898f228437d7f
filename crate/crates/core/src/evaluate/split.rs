use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Purpose, RngStream};
use crate::error::{Result, SignaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.1,
            val: 0.1,
            test: 0.8,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(SignaError::InvalidArgument(format!(
                "split ratios must lie in [0, 1], got {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SignaError::InvalidArgument(format!(
                "split ratios must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

/// Disjoint train, validation and test node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks that the three sets are non-empty, disjoint and cover `0..n`.
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for (name, set) in [("train", &train), ("val", &val), ("test", &test)] {
            if set.is_empty() {
                return Err(SignaError::InvalidArgument(format!(
                    "{name} split is empty"
                )));
            }
            for &i in set.iter() {
                if i >= n {
                    return Err(SignaError::InvalidArgument(format!(
                        "{name} split index {i} out of range for {n} nodes"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(SignaError::InvalidArgument(format!(
                        "node {i} appears in more than one split"
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(SignaError::InvalidArgument(format!(
                "node {missing} is in no split"
            )));
        }
        Ok(Split { train, val, test })
    }

    /// Reads three files of whitespace-separated node indices.
    pub fn from_files(train: &Path, val: &Path, test: &Path, n: usize) -> Result<Self> {
        let read = |p: &Path| -> Result<Vec<usize>> {
            let text = std::fs::read_to_string(p).map_err(|e| SignaError::io(p, e))?;
            text.split_whitespace()
                .enumerate()
                .map(|(i, tok)| {
                    tok.parse().map_err(|_| SignaError::Ingestion {
                        path: p.to_path_buf(),
                        line: i + 1,
                        msg: format!("invalid node index `{tok}`"),
                    })
                })
                .collect()
        };
        Split::new(read(train)?, read(val)?, read(test)?, n)
    }
}

/// `num_runs` random splits of `0..n`; run `r` shuffles with a stream
/// derived from `(seed, r)`. Train and validation sizes are rounded down,
/// the test set takes the rest.
pub fn make_splits(
    n: usize,
    ratios: SplitRatios,
    num_runs: usize,
    seed: u64,
) -> Result<Vec<Split>> {
    ratios.validate()?;
    let n_train = (n as f64 * ratios.train).floor() as usize;
    let n_val = (n as f64 * ratios.val).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(SignaError::InvalidArgument(format!(
            "{n} labeled nodes are too few for ratios {:?}",
            ratios
        )));
    }
    (0..num_runs)
        .map(|run| {
            let mut rng = RngStream::derived(seed, Purpose::Split, run as u64);
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let test = order.split_off(n_train + n_val);
            let val = order.split_off(n_train);
            Ok(Split {
                train: order,
                val,
                test,
            })
        })
        .collect()
}
