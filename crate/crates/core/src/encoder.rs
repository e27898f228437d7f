//! Layer stack `Dropout → BaseEncoder → Activation → LayerNorm` and the
//! two-layer projector.
//!
//! The base encoder is either a bias-free linear map `H W` or a graph
//! convolution `Â H W` with the symmetric normalized adjacency. When layer
//! normalization is off, each base encoder gets a bias instead.

use serde::{Deserialize, Serialize};

use crate::diffcore::{
    glorot_uniform, ActivationOp, ParamId, ParamStore, Precision, RngStream, Tape, Tensor, Var,
};
use crate::error::{Result, SignaError};
use crate::graphdata::{normalized_adjacency, Graph, NormalizedAdjacency};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const PRELU_INIT: f64 = 0.25;
/// Fixed negative slope used for `rrelu` (midpoint of `[1/8, 1/3]`).
pub const RRELU_SLOPE: f64 = 0.23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseEncoder {
    Linear,
    Gconv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Elu,
    Prelu,
    LeakyRelu {
        slope: f64,
    },
    /// Deterministic leaky ReLU with slope [`RRELU_SLOPE`].
    Rrelu,
    Identity,
}

fn default_layers() -> usize {
    2
}

fn default_projector_activation() -> ActivationKind {
    ActivationKind::Elu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    pub base_encoder: BaseEncoder,
    pub hidden_dim: usize,
    pub dropout_p: f64,
    pub activation: ActivationKind,
    pub layer_norm: bool,
    pub projector_dim: usize,
    #[serde(default = "default_projector_activation")]
    pub projector_activation: ActivationKind,
}

impl ModelSpec {
    pub const FIELDS: &'static [&'static str] = &[
        "num_layers",
        "base_encoder",
        "hidden_dim",
        "dropout_p",
        "activation",
        "layer_norm",
        "projector_dim",
        "projector_activation",
    ];

    /// All violated constraints, each prefixed with its field name.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_layers < 1 {
            out.push("model.num_layers: must be at least 1".into());
        }
        if self.hidden_dim < 1 {
            out.push("model.hidden_dim: must be at least 1".into());
        }
        if self.projector_dim < 1 {
            out.push("model.projector_dim: must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            out.push(format!(
                "model.dropout_p: {} outside [0, 1)",
                self.dropout_p
            ));
        }
        for (field, kind) in [
            ("activation", self.activation),
            ("projector_activation", self.projector_activation),
        ] {
            if let ActivationKind::LeakyRelu { slope } = kind {
                if !slope.is_finite() {
                    out.push(format!("model.{field}: non-finite slope"));
                }
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

    /// Names and shapes of every parameter, in creation order.
    pub fn parameter_shapes(&self, in_dim: usize) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut fan_in = in_dim;
        for l in 0..self.num_layers {
            out.push((format!("encoder.{l}.weight"), vec![fan_in, self.hidden_dim]));
            if self.layer_norm {
                out.push((format!("encoder.{l}.ln_gain"), vec![self.hidden_dim]));
                out.push((format!("encoder.{l}.ln_bias"), vec![self.hidden_dim]));
            } else {
                out.push((format!("encoder.{l}.bias"), vec![self.hidden_dim]));
            }
            if self.activation == ActivationKind::Prelu {
                out.push((format!("encoder.{l}.prelu_slope"), vec![1]));
            }
            fan_in = self.hidden_dim;
        }
        out.push((
            "projector.0.weight".into(),
            vec![self.hidden_dim, self.projector_dim],
        ));
        if self.projector_activation == ActivationKind::Prelu {
            out.push(("projector.prelu_slope".into(), vec![1]));
        }
        out.push((
            "projector.1.weight".into(),
            vec![self.projector_dim, self.projector_dim],
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerParams {
    weight: ParamId,
    bias: Option<ParamId>,
    ln: Option<(ParamId, ParamId)>,
    prelu: Option<ParamId>,
}

/// Encoder and projector parameters together with the spec they realize.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    spec: ModelSpec,
    in_dim: usize,
    store: ParamStore,
    layers: Vec<LayerParams>,
    proj_w1: ParamId,
    proj_prelu: Option<ParamId>,
    proj_w2: ParamId,
}

impl EncoderState {
    /// Glorot-uniform weights, zero biases, unit layer-norm gains and PReLU
    /// slopes of 0.25.
    pub fn init(
        spec: &ModelSpec,
        in_dim: usize,
        rng: &mut RngStream,
        precision: Precision,
    ) -> Result<Self> {
        spec.validate()?;
        if in_dim == 0 {
            return Err(SignaError::InvalidArgument(
                "input dimension is zero".into(),
            ));
        }
        let mut store = ParamStore::new(precision);
        for (name, shape) in spec.parameter_shapes(in_dim) {
            let value = if name.ends_with("weight") {
                glorot_uniform(shape[0], shape[1], rng)
            } else if name.ends_with("ln_gain") {
                Tensor::ones(&shape)
            } else if name.ends_with("prelu_slope") {
                Tensor::full(&shape, PRELU_INIT)
            } else {
                Tensor::zeros(&shape)
            };
            store.add(name, value)?;
        }
        EncoderState::from_store(spec, in_dim, store)
    }

    /// Wraps an existing store, checking names and shapes against `spec`.
    pub fn from_store(spec: &ModelSpec, in_dim: usize, store: ParamStore) -> Result<Self> {
        spec.validate()?;
        let expected = spec.parameter_shapes(in_dim);
        if expected.len() != store.len() {
            return Err(SignaError::Checkpoint(format!(
                "expected {} parameters, found {}",
                expected.len(),
                store.len()
            )));
        }
        for (name, shape) in &expected {
            let id = store
                .find(name)
                .ok_or_else(|| SignaError::Checkpoint(format!("missing parameter `{name}`")))?;
            if store.value(id).shape() != shape.as_slice() {
                return Err(SignaError::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, expected {shape:?}",
                    store.value(id).shape()
                )));
            }
        }
        let id = |name: String| store.find(&name);
        let layers = (0..spec.num_layers)
            .map(|l| LayerParams {
                weight: id(format!("encoder.{l}.weight")).expect("checked"),
                bias: id(format!("encoder.{l}.bias")),
                ln: id(format!("encoder.{l}.ln_gain")).zip(id(format!("encoder.{l}.ln_bias"))),
                prelu: id(format!("encoder.{l}.prelu_slope")),
            })
            .collect();
        let proj_w1 = id("projector.0.weight".into()).expect("checked");
        let proj_prelu = id("projector.prelu_slope".into());
        let proj_w2 = id("projector.1.weight".into()).expect("checked");
        Ok(EncoderState {
            spec: spec.clone(),
            in_dim,
            store,
            layers,
            proj_w1,
            proj_prelu,
            proj_w2,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_store(self) -> ParamStore {
        self.store
    }

    /// Same parameters used with a different base encoder. Linear and
    /// graph-convolution layers share parameter shapes.
    pub fn with_base_encoder(&self, base: BaseEncoder) -> EncoderState {
        let mut out = self.clone();
        out.spec.base_encoder = base;
        out
    }

    fn activation_op(
        &self,
        tape: &mut Tape,
        kind: ActivationKind,
        slope: Option<ParamId>,
    ) -> Result<ActivationOp> {
        Ok(match kind {
            ActivationKind::Relu => ActivationOp::Relu,
            ActivationKind::Elu => ActivationOp::Elu,
            ActivationKind::LeakyRelu { slope } => ActivationOp::LeakyRelu(slope),
            ActivationKind::Rrelu => ActivationOp::LeakyRelu(RRELU_SLOPE),
            ActivationKind::Identity => ActivationOp::Identity,
            ActivationKind::Prelu => {
                let id = slope.ok_or_else(|| {
                    SignaError::config("prelu activation without a slope parameter")
                })?;
                ActivationOp::Prelu(tape.param(&self.store, id)?)
            }
        })
    }

    /// Records the encoder on `tape`, starting from input `x`.
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape,
        x: Var,
        adj: Option<&NormalizedAdjacency>,
        training: bool,
        rng: &mut RngStream,
    ) -> Result<Var> {
        let adj = match (self.spec.base_encoder, adj) {
            (BaseEncoder::Gconv, None) => {
                return Err(SignaError::config(
                    "graph-convolution encoder needs the normalized adjacency",
                ))
            }
            (BaseEncoder::Gconv, Some(a)) => Some(a),
            (BaseEncoder::Linear, _) => None,
        };
        let (rows, cols) = tape.value(x).dims2()?;
        if cols != self.in_dim {
            return Err(SignaError::Dimension {
                op: "encode",
                left: vec![rows, cols],
                right: vec![self.in_dim, self.spec.hidden_dim],
            });
        }
        let mut h = x;
        for layer in &self.layers {
            let dropped = tape.dropout(h, self.spec.dropout_p, rng, training)?;
            let w = tape.param(&self.store, layer.weight)?;
            let mut e = tape.matmul(dropped, w)?;
            if let Some(adj) = adj {
                e = tape.spmm(adj.matrix(), e)?;
            }
            if let Some(b) = layer.bias {
                let bv = tape.param(&self.store, b)?;
                e = tape.add_row_bias(e, bv)?;
            }
            let act = self.activation_op(tape, self.spec.activation, layer.prelu)?;
            h = tape.activation(e, act)?;
            if let Some((g, b)) = layer.ln {
                let gv = tape.param(&self.store, g)?;
                let bv = tape.param(&self.store, b)?;
                h = tape.layer_norm(h, gv, bv, LAYER_NORM_EPS)?;
            }
        }
        Ok(h)
    }

    /// `Z = σ(H W₁) W₂`.
    pub fn project_on_tape(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let w1 = tape.param(&self.store, self.proj_w1)?;
        let hidden = tape.matmul(h, w1)?;
        let act = self.activation_op(tape, self.spec.projector_activation, self.proj_prelu)?;
        let hidden = tape.activation(hidden, act)?;
        let w2 = tape.param(&self.store, self.proj_w2)?;
        tape.matmul(hidden, w2)
    }

    /// Forward pass outside training; no gradients are kept.
    pub fn encode(
        &self,
        features: &Tensor,
        adj: Option<&NormalizedAdjacency>,
        training: bool,
        rng: &mut RngStream,
    ) -> Result<Tensor> {
        let mut tape = Tape::new(self.store.precision());
        let x = tape.constant(features.clone())?;
        let h = self.encode_on_tape(&mut tape, x, adj, training, rng)?;
        Ok(tape.value(h).clone())
    }

    pub fn project(&self, h: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new(self.store.precision());
        let hv = tape.constant(h.clone())?;
        let z = self.project_on_tape(&mut tape, hv)?;
        Ok(tape.value(z).clone())
    }

    /// Encoder output `H` for downstream use. The projector is not applied
    /// and no random stream is consulted.
    pub fn inference_embeddings(&self, graph: &Graph) -> Result<Tensor> {
        let adj = match self.spec.base_encoder {
            BaseEncoder::Gconv => Some(normalized_adjacency(graph)),
            BaseEncoder::Linear => None,
        };
        self.inference_with(graph.features(), adj.as_ref())
    }

    /// Like [`EncoderState::inference_embeddings`] with a precomputed adjacency.
    pub fn inference_with(
        &self,
        features: &Tensor,
        adj: Option<&NormalizedAdjacency>,
    ) -> Result<Tensor> {
        // never drawn from: dropout is the identity outside training
        let mut unused = RngStream::new(0, crate::diffcore::Purpose::Dropout);
        self.encode(features, adj, false, &mut unused)
    }
}
