use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use log::warn;
use serde::{Deserialize, Serialize};

use super::{apply_ablation, TrainConfig};
use crate::diffcore::{ParamStore, Precision, Tensor};
use crate::encoder::EncoderState;
use crate::error::{Result, SignaError};
use crate::graphdata::Graph;

pub const CHECKPOINT_VERSION: u32 = 1;

/// One parameter: shape plus little-endian `f64` payload in base64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBlob {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: String,
}

impl ParamBlob {
    fn encode(name: &str, value: &Tensor) -> Self {
        let bytes: Vec<u8> = value.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        ParamBlob {
            name: name.to_string(),
            shape: value.shape().to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    fn decode(&self) -> Result<Tensor> {
        let corrupt =
            |msg: String| SignaError::Checkpoint(format!("parameter `{}`: {msg}", self.name));
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| corrupt(format!("corrupt payload: {e}")))?;
        let expected: usize = self.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(corrupt(format!(
                "corrupt payload: {} bytes for shape {:?}",
                bytes.len(),
                self.shape
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Tensor::new(self.shape.clone(), values)
    }
}

/// Stream seeds; every stream is derived from the run seed and its purpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRecord {
    pub run_seed: u64,
    pub streams: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub input_dim: usize,
    /// Encoder layers carry a bias exactly when layer norm is off.
    pub encoder_bias: bool,
    pub params: Vec<ParamBlob>,
    pub final_loss: Option<f64>,
    pub epochs: usize,
    pub seeds: SeedRecord,
}

impl Checkpoint {
    pub fn new(
        state: &EncoderState,
        config: &TrainConfig,
        final_loss: Option<f64>,
        epochs: usize,
    ) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: config.clone(),
            input_dim: state.in_dim(),
            encoder_bias: !state.spec().layer_norm,
            params: state
                .store()
                .iter()
                .map(|p| ParamBlob::encode(&p.name, &p.value))
                .collect(),
            final_loss,
            epochs,
            seeds: SeedRecord {
                run_seed: config.seed,
                streams: ["init", "dropout", "mask"].map(String::from).to_vec(),
            },
        }
    }

    /// Rebuilds the encoder. With `precision` set and different from the
    /// stored one, parameters are converted and a warning is logged.
    pub fn into_state(self, precision: Option<Precision>) -> Result<(EncoderState, TrainConfig)> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(SignaError::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        let mut config = self.config;
        let eff = apply_ablation(&config)?;
        let mut store = ParamStore::new(Precision::F64);
        for blob in &self.params {
            store.add(blob.name.clone(), blob.decode()?)?;
        }
        store.set_precision(config.precision);
        if let Some(p) = precision {
            if p != config.precision {
                warn!(
                    "checkpoint trained with {:?} precision; converting parameters to {:?}",
                    config.precision, p
                );
                store.set_precision(p);
                config.precision = p;
            }
        }
        let state = EncoderState::from_store(&eff.model, self.input_dim, store)?;
        Ok((state, config))
    }
}

/// Writes the checkpoint next to `path` and renames it into place.
pub fn save_checkpoint(
    state: &EncoderState,
    config: &TrainConfig,
    final_loss: Option<f64>,
    epochs: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let ckpt = Checkpoint::new(state, config, final_loss, epochs);
    let text = serde_json::to_string_pretty(&ckpt)?;
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| SignaError::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SignaError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| SignaError::Checkpoint(format!("corrupt checkpoint {}: {e}", path.display())))
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
    precision: Option<Precision>,
) -> Result<(EncoderState, TrainConfig)> {
    read_checkpoint(path)?.into_state(precision)
}

/// Writes inference embeddings as CSV with a `h0,h1,...` header.
pub fn export_embeddings(
    state: &EncoderState,
    graph: &Graph,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let h = state.inference_embeddings(graph)?;
    let to_io = |e: csv::Error| SignaError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record((0..h.cols()).map(|j| format!("h{j}")))
        .map_err(to_io)?;
    for i in 0..h.rows() {
        w.write_record(h.row(i).iter().map(|v| format!("{v:.16e}")))
            .map_err(to_io)?;
    }
    w.flush().map_err(|e| SignaError::io(path, e))
}
