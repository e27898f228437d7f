//! Full-batch training loop, run configuration and ablation dispatch.

mod checkpoint;

pub use checkpoint::{
    export_embeddings, load_checkpoint, read_checkpoint, save_checkpoint, Checkpoint, ParamBlob,
    SeedRecord, CHECKPOINT_VERSION,
};

use std::path::Path;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::contrast::{draw_masks, EstimatorKind, EstimatorSpec};
use crate::diffcore::{Adam, Precision, Purpose, RngStream, Tape, Tensor};
use crate::encoder::{BaseEncoder, EncoderState, ModelSpec};
use crate::error::{Result, SignaError};
use crate::graphdata::{normalized_adjacency, Graph};

/// Component removals and replacements applied on top of a base config.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Encoder dropout off.
    NoDropout,
    /// Encoder dropout replaced by per-entry input feature masking.
    Nfm { p_feat: f64 },
    /// Mask rate forced to 0.
    NoStochMask,
    /// Mask rate forced to 1.
    AllMask,
    /// Dropout and masking off, sigmoid inner-product discriminator.
    NoAll,
}

impl Ablation {
    const FIELDS: &'static [&'static str] = &["kind", "p_feat"];
}

fn default_log_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    pub mask_rate: f64,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub num_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

const CONFIG_FIELDS: &[&str] = &[
    "model",
    "estimator",
    "mask_rate",
    "learning_rate",
    "weight_decay",
    "num_epochs",
    "seed",
    "ablation",
    "precision",
    "log_every",
];

fn unknown_keys(value: &Value, prefix: &str, known: &[&str], out: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                out.push(format!("{prefix}{key}: unknown key"));
            }
        }
    }
}

impl TrainConfig {
    /// Parses and validates a JSON config. Unknown keys and every invalid
    /// value are reported together.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| SignaError::Config(vec![format!("malformed JSON: {e}")]))?;
        let mut issues = Vec::new();
        unknown_keys(&value, "", CONFIG_FIELDS, &mut issues);
        unknown_keys(&value["model"], "model.", ModelSpec::FIELDS, &mut issues);
        unknown_keys(
            &value["estimator"],
            "estimator.",
            EstimatorSpec::FIELDS,
            &mut issues,
        );
        unknown_keys(
            &value["ablation"],
            "ablation.",
            Ablation::FIELDS,
            &mut issues,
        );
        if !issues.is_empty() {
            return Err(SignaError::Config(issues));
        }
        let config: TrainConfig =
            serde_json::from_value(value).map_err(|e| SignaError::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SignaError::io(path, e))?;
        TrainConfig::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn issues(&self) -> Vec<String> {
        let mut out = self.model.issues();
        out.extend(self.estimator.issues());
        if !(0.0..=1.0).contains(&self.mask_rate) {
            out.push(format!("mask_rate: {} outside [0, 1]", self.mask_rate));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!(
                "learning_rate: {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            out.push(format!(
                "weight_decay: {} must be non-negative",
                self.weight_decay
            ));
        }
        if self.num_epochs == 0 {
            out.push("num_epochs: must be at least 1".into());
        }
        if let Ablation::Nfm { p_feat } = self.ablation {
            if !(0.0..1.0).contains(&p_feat) {
                out.push(format!("ablation.p_feat: {p_feat} outside [0, 1)"));
            }
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

    /// Same config with a different ablation.
    pub fn with_ablation(&self, ablation: Ablation) -> TrainConfig {
        TrainConfig {
            ablation,
            ..self.clone()
        }
    }
}

/// Settings actually used by the training loop after applying an ablation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub model: ModelSpec,
    pub estimator: EstimatorSpec,
    pub mask_rate: f64,
    /// Per-entry input masking probability, when feature masking is on.
    pub feature_mask: Option<f64>,
}

pub fn apply_ablation(config: &TrainConfig) -> Result<EffectiveConfig> {
    config.validate()?;
    let mut eff = EffectiveConfig {
        model: config.model.clone(),
        estimator: config.estimator.clone(),
        mask_rate: config.mask_rate,
        feature_mask: None,
    };
    match config.ablation {
        Ablation::None => {}
        Ablation::NoDropout => eff.model.dropout_p = 0.0,
        Ablation::Nfm { p_feat } => {
            eff.model.dropout_p = 0.0;
            eff.feature_mask = Some(p_feat);
        }
        Ablation::NoStochMask => eff.mask_rate = 0.0,
        Ablation::AllMask => eff.mask_rate = 1.0,
        Ablation::NoAll => {
            eff.model.dropout_p = 0.0;
            eff.mask_rate = 0.0;
            eff.estimator.kind = EstimatorKind::Jsd;
        }
    }
    Ok(eff)
}

/// Zeroes each entry with probability `p`, without rescaling.
pub fn mask_features(x: &Tensor, p: f64, rng: &mut RngStream) -> Tensor {
    if p == 0.0 {
        return x.clone();
    }
    let mut out = x.clone();
    for v in out.data_mut() {
        if rng.uniform() < p {
            *v = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: EncoderState,
    /// Pre-update loss of every epoch.
    pub loss_curve: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }
}

/// Trains from a fresh initialization drawn from the config seed.
pub fn train(graph: &Graph, config: &TrainConfig) -> Result<TrainOutcome> {
    let eff = apply_ablation(config)?;
    let mut init_rng = RngStream::new(config.seed, Purpose::Init);
    let state = EncoderState::init(
        &eff.model,
        graph.feature_dim(),
        &mut init_rng,
        config.precision,
    )?;
    train_from(graph, config, state)
}

/// Trains starting from `state`, whose spec must match the effective model.
pub fn train_from(
    graph: &Graph,
    config: &TrainConfig,
    mut state: EncoderState,
) -> Result<TrainOutcome> {
    let eff = apply_ablation(config)?;
    if state.spec() != &eff.model {
        return Err(SignaError::config(
            "encoder state does not match the configured model",
        ));
    }
    if graph.num_nodes() == 0 {
        return Err(SignaError::DegenerateGraph("graph has no nodes".into()));
    }
    let adj = match eff.model.base_encoder {
        BaseEncoder::Gconv => Some(normalized_adjacency(graph)),
        BaseEncoder::Linear => None,
    };
    let mut dropout_rng = RngStream::new(config.seed, Purpose::Dropout);
    let mut mask_rng = RngStream::new(config.seed, Purpose::Mask);
    let mut adam = Adam::new(config.learning_rate, config.weight_decay)?;
    let precision = state.store().precision();
    let mut loss_curve = Vec::with_capacity(config.num_epochs);

    for epoch in 0..config.num_epochs {
        let mut tape = Tape::new(precision);
        let x = match eff.feature_mask {
            Some(p) => mask_features(graph.features(), p, &mut dropout_rng),
            None => graph.features().clone(),
        };
        let step =
            |tape: &mut Tape, dropout_rng: &mut RngStream, mask_rng: &mut RngStream| -> Result<_> {
                let x = tape.constant(x)?;
                let h = state.encode_on_tape(tape, x, adj.as_ref(), true, dropout_rng)?;
                let z = state.project_on_tape(tape, h)?;
                let draw = draw_masks(graph, eff.mask_rate, epoch, mask_rng)?;
                eff.estimator.loss_on_tape(tape, z, &draw, mask_rng)
            };
        let loss = step(&mut tape, &mut dropout_rng, &mut mask_rng).map_err(|e| match e {
            SignaError::NonFinite { .. } => SignaError::NonFiniteLoss { epoch },
            other => other,
        })?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(SignaError::NonFiniteLoss { epoch });
        }
        loss_curve.push(value);
        tape.backward(loss, state.store_mut())?;
        adam.step(state.store_mut())?;
        if config.log_every > 0 && (epoch % config.log_every == 0 || epoch + 1 == config.num_epochs)
        {
            info!("epoch {epoch:>5}  loss {value:.6}");
        } else {
            debug!("epoch {epoch:>5}  loss {value:.6}");
        }
    }
    Ok(TrainOutcome { state, loss_curve })
}
