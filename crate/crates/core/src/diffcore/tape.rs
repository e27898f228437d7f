//! Single-use reverse-mode tape.
//!
//! Every recorded operation appends a node holding its output value and the
//! information its backward rule needs. [`Tape::backward`] consumes the tape,
//! walks it in reverse and accumulates gradients into the [`ParamStore`].
//! Every forward result is checked for NaN / infinity.

use std::sync::Arc;

use super::param::{ParamId, ParamStore};
use super::rng::RngStream;
use super::sparse::CsrMatrix;
use super::tensor::{matmul_nt_into, matmul_tn_into, Precision, Tensor};
use crate::error::{Result, SignaError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Elementwise nonlinearity as recorded on the tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationOp {
    Relu,
    Elu,
    /// Learnable single-slope PReLU; the variable must hold one value.
    Prelu(Var),
    LeakyRelu(f64),
    /// No-op.
    Identity,
}

#[derive(Debug)]
enum Op {
    Constant,
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    ScalarMul(Var, f64),
    AddScalar(Var),
    AddRowBias(Var, Var),
    Log(Var),
    Exp(Var),
    Sigmoid(Var),
    Clamp {
        x: Var,
        lo: f64,
        hi: f64,
    },
    Sum(Var),
    Mean(Var),
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Relu(Var),
    Elu(Var),
    LeakyRelu(Var, f64),
    Prelu(Var, Var),
    RowsL2Normalize {
        x: Var,
        norms: Vec<f64>,
    },
    Spmm {
        adj: Arc<CsrMatrix>,
        x: Var,
    },
    RowLogSumExp {
        x: Var,
        probs: Vec<f64>,
    },
    PairDots {
        x: Var,
        pairs: Arc<Vec<(usize, usize)>>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of differentiable inputs created with [`Tape::input`].
#[derive(Debug, Default)]
pub struct InputGrads {
    grads: Vec<(Var, Tensor)>,
}

impl InputGrads {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.iter().find(|(v, _)| *v == var).map(|(_, g)| g)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    precision: Precision,
}

impl Tape {
    pub fn new(precision: Precision) -> Self {
        Tape {
            nodes: Vec::new(),
            precision,
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, mut value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(SignaError::NonFinite { op: name });
        }
        value.round_to(self.precision);
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn shape_of(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape_of(a) != self.shape_of(b) {
            return Err(SignaError::Dimension {
                op,
                left: self.shape_of(a).to_vec(),
                right: self.shape_of(b).to_vec(),
            });
        }
        Ok(())
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Constant, "constant")
    }

    /// A leaf whose gradient is returned by [`Tape::backward`].
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Input, "input")
    }

    /// Records the current value of a parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push(store.value(id).clone(), Op::Param(id), "param")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        self.push(out, Op::Transpose(a), "transpose")
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data).expect("shapes checked")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push(out, Op::Sub(a, b), "sub")
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("hadamard", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push(out, Op::Hadamard(a, b), "hadamard")
    }

    pub fn scalar_mul(&mut self, a: Var, k: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * k);
        self.push(out, Op::ScalarMul(a, k), "scalar_mul")
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x + k);
        self.push(out, Op::AddScalar(a), "add_scalar")
    }

    /// Adds a length-`d` bias to every row of an `n×d` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (n, d) = self.value(x).dims2()?;
        if self.value(bias).len() != d {
            return Err(SignaError::Dimension {
                op: "add_row_bias",
                left: self.shape_of(x).to_vec(),
                right: self.shape_of(bias).to_vec(),
            });
        }
        let b = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for i in 0..n {
            for (o, &bb) in out[i * d..(i + 1) * d].iter_mut().zip(b) {
                *o += bb;
            }
        }
        self.push(
            Tensor::new(vec![n, d], out)?,
            Op::AddRowBias(x, bias),
            "add_row_bias",
        )
    }

    /// Natural logarithm; every input must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|&&x| x <= 0.0) {
            return Err(SignaError::Domain {
                op: "log",
                msg: format!("non-positive input {bad}"),
            });
        }
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a), "log")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a), "exp")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), "sigmoid")
    }

    /// Clamps into `[lo, hi]`; gradient passes only inside the interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        if lo > hi {
            return Err(SignaError::InvalidArgument(format!(
                "clamp bounds {lo} > {hi}"
            )));
        }
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp { x, lo, hi }, "clamp")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(SignaError::Domain {
                op: "mean",
                msg: "empty tensor".into(),
            });
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(a), "mean")
    }

    /// Inverted dropout. Outside training, or with `p == 0`, returns `x`
    /// itself without touching the random stream.
    pub fn dropout(&mut self, x: Var, p: f64, rng: &mut RngStream, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(SignaError::InvalidArgument(format!(
                "dropout rate {p} outside [0, 1)"
            )));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.uniform() < p { 0.0 } else { scale })
            .collect();
        let t = self.value(x);
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        self.push(out, Op::Dropout { x, mask }, "dropout")
    }

    /// Row-wise layer normalization with population variance.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (n, d) = self.value(x).dims2()?;
        if d == 0 {
            return Err(SignaError::InvalidArgument(
                "layer_norm on zero-width rows".into(),
            ));
        }
        for v in [gain, bias] {
            if self.value(v).len() != d {
                return Err(SignaError::Dimension {
                    op: "layer_norm",
                    left: self.shape_of(x).to_vec(),
                    right: self.shape_of(v).to_vec(),
                });
            }
        }
        let xs = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![0.0; n * d];
        let mut inv_std = vec![0.0; n];
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let row = &xs[i * d..(i + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[i * d + j] = h;
                out[i * d + j] = h * g[j] + b[j];
            }
        }
        let out = Tensor::new(vec![n, d], out)?;
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            "layer_norm",
        )
    }

    pub fn activation(&mut self, x: Var, kind: ActivationOp) -> Result<Var> {
        match kind {
            ActivationOp::Identity => Ok(x),
            ActivationOp::Relu => {
                let out = self.value(x).map(|v| v.max(0.0));
                self.push(out, Op::Relu(x), "relu")
            }
            ActivationOp::Elu => {
                let out = self.value(x).map(|v| if v > 0.0 { v } else { v.exp_m1() });
                self.push(out, Op::Elu(x), "elu")
            }
            ActivationOp::LeakyRelu(slope) => {
                let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
                self.push(out, Op::LeakyRelu(x, slope), "leaky_relu")
            }
            ActivationOp::Prelu(slope) => {
                let a = self.value(slope).item()?;
                let out = self.value(x).map(|v| if v > 0.0 { v } else { a * v });
                self.push(out, Op::Prelu(x, slope), "prelu")
            }
        }
    }

    /// Divides each row by its Euclidean norm.
    pub fn rows_l2_normalize(&mut self, x: Var) -> Result<Var> {
        let (n, d) = self.value(x).dims2()?;
        let xs = self.value(x).data();
        let mut norms = Vec::with_capacity(n);
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let row = &xs[i * d..(i + 1) * d];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(SignaError::DegenerateEmbedding { row: i });
            }
            for (o, v) in out[i * d..(i + 1) * d].iter_mut().zip(row) {
                *o = v / norm;
            }
            norms.push(norm);
        }
        let out = Tensor::new(vec![n, d], out)?;
        self.push(out, Op::RowsL2Normalize { x, norms }, "rows_l2_normalize")
    }

    /// Sparse-dense product `adj · x`.
    pub fn spmm(&mut self, adj: &Arc<CsrMatrix>, x: Var) -> Result<Var> {
        let out = adj.matmul_dense(self.value(x))?;
        self.push(
            out,
            Op::Spmm {
                adj: Arc::clone(adj),
                x,
            },
            "spmm",
        )
    }

    /// Row-wise `log Σ_j mask_ij · exp(x_ij)`, returned as an `n×1` column.
    /// Every row must have at least one unmasked entry.
    pub fn row_logsumexp_masked(&mut self, x: Var, mask: &Tensor) -> Result<Var> {
        let (n, d) = self.value(x).dims2()?;
        if mask.shape() != self.shape_of(x) {
            return Err(SignaError::Dimension {
                op: "row_logsumexp_masked",
                left: self.shape_of(x).to_vec(),
                right: mask.shape().to_vec(),
            });
        }
        let xs = self.value(x).data();
        let ms = mask.data();
        let mut probs = vec![0.0; n * d];
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &xs[i * d..(i + 1) * d];
            let mrow = &ms[i * d..(i + 1) * d];
            let max = row
                .iter()
                .zip(mrow)
                .filter(|(_, &m)| m != 0.0)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(SignaError::Domain {
                    op: "row_logsumexp_masked",
                    msg: format!("row {i} has no unmasked entries"),
                });
            }
            let mut total = 0.0;
            for j in 0..d {
                if mrow[j] != 0.0 {
                    let e = (row[j] - max).exp();
                    probs[i * d + j] = e;
                    total += e;
                }
            }
            for p in &mut probs[i * d..(i + 1) * d] {
                *p /= total;
            }
            out[i] = max + total.ln();
        }
        let out = Tensor::new(vec![n, 1], out)?;
        self.push(out, Op::RowLogSumExp { x, probs }, "row_logsumexp_masked")
    }

    /// Dot products `x[u] · x[v]` for each listed pair, as a vector.
    pub fn pair_dots(&mut self, x: Var, pairs: &Arc<Vec<(usize, usize)>>) -> Result<Var> {
        let (n, d) = self.value(x).dims2()?;
        let xs = self.value(x).data();
        let mut out = Vec::with_capacity(pairs.len());
        for &(u, v) in pairs.iter() {
            if u >= n || v >= n {
                return Err(SignaError::InvalidArgument(format!(
                    "pair ({u}, {v}) out of range for {n} rows"
                )));
            }
            out.push(dot(&xs[u * d..(u + 1) * d], &xs[v * d..(v + 1) * d]));
        }
        let out = Tensor::new(vec![pairs.len()], out)?;
        self.push(
            out,
            Op::PairDots {
                x,
                pairs: Arc::clone(pairs),
            },
            "pair_dots",
        )
    }

    /// Reverse pass from a scalar `loss`. Parameter gradients are added to
    /// `store`; gradients of [`Tape::input`] leaves are returned.
    pub fn backward(self, loss: Var, store: &mut ParamStore) -> Result<InputGrads> {
        if self.value(loss).len() != 1 {
            return Err(SignaError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape_of(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(self.shape_of(loss)));
        let mut inputs = InputGrads::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Input => inputs.grads.push((Var(idx), g)),
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    p.grad.add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = ta.dims2()?;
                    let n = tb.dims2()?.1;
                    let mut da = vec![0.0; m * k];
                    matmul_nt_into(g.data(), tb.data(), &mut da, m, n, k);
                    let mut db = vec![0.0; k * n];
                    matmul_tn_into(ta.data(), g.data(), &mut db, k, m, n);
                    accumulate(&mut grads, *a, Tensor::new(vec![m, k], da)?);
                    accumulate(&mut grads, *b, Tensor::new(vec![k, n], db)?);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()?),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g);
                }
                Op::Hadamard(a, b) => {
                    let da = mul(&g, self.value(*b));
                    let db = mul(&g, self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::ScalarMul(a, k) => accumulate(&mut grads, *a, g.map(|v| v * k)),
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::AddRowBias(x, bias) => {
                    let (n, d) = g.dims2()?;
                    let mut db = vec![0.0; d];
                    for i in 0..n {
                        for (acc, v) in db.iter_mut().zip(g.row(i)) {
                            *acc += v;
                        }
                    }
                    let shape = self.shape_of(*bias).to_vec();
                    accumulate(&mut grads, *bias, Tensor::new(shape, db)?);
                    accumulate(&mut grads, *x, g);
                }
                Op::Log(a) => {
                    let inv = self.value(*a).map(|v| 1.0 / v);
                    accumulate(&mut grads, *a, mul(&g, &inv));
                }
                Op::Exp(a) => accumulate(&mut grads, *a, mul(&g, &node.value)),
                Op::Sigmoid(a) => {
                    let local = node.value.map(|s| s * (1.0 - s));
                    accumulate(&mut grads, *a, mul(&g, &local));
                }
                Op::Clamp { x, lo, hi } => {
                    let pass = self
                        .value(*x)
                        .map(|v| if v >= *lo && v <= *hi { 1.0 } else { 0.0 });
                    accumulate(&mut grads, *x, mul(&g, &pass));
                }
                Op::Sum(a) => {
                    let s = g.item()?;
                    accumulate(&mut grads, *a, Tensor::full(self.shape_of(*a), s));
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len() as f64;
                    let s = g.item()? / n;
                    accumulate(&mut grads, *a, Tensor::full(self.shape_of(*a), s));
                }
                Op::Dropout { x, mask } => {
                    let data = g.data().iter().zip(mask).map(|(a, b)| a * b).collect();
                    accumulate(&mut grads, *x, Tensor::new(g.shape().to_vec(), data)?);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let (n, d) = g.dims2()?;
                    let gv = self.value(*gain).data();
                    let gs = g.data();
                    let mut dx = vec![0.0; n * d];
                    let mut dgain = vec![0.0; d];
                    let mut dbias = vec![0.0; d];
                    let mut dxhat = vec![0.0; d];
                    for i in 0..n {
                        let gr = &gs[i * d..(i + 1) * d];
                        let xh = &xhat[i * d..(i + 1) * d];
                        for j in 0..d {
                            dgain[j] += gr[j] * xh[j];
                            dbias[j] += gr[j];
                            dxhat[j] = gr[j] * gv[j];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
                        let mean_dx =
                            dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            dx[i * d + j] = inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                        }
                    }
                    let gshape = self.shape_of(*gain).to_vec();
                    let bshape = self.shape_of(*bias).to_vec();
                    accumulate(&mut grads, *gain, Tensor::new(gshape, dgain)?);
                    accumulate(&mut grads, *bias, Tensor::new(bshape, dbias)?);
                    accumulate(&mut grads, *x, Tensor::new(vec![n, d], dx)?);
                }
                Op::Relu(x) => {
                    let local = self.value(*x).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    accumulate(&mut grads, *x, mul(&g, &local));
                }
                Op::Elu(x) => {
                    let local = self.value(*x).map(|v| if v > 0.0 { 1.0 } else { v.exp() });
                    accumulate(&mut grads, *x, mul(&g, &local));
                }
                Op::LeakyRelu(x, slope) => {
                    let local = self.value(*x).map(|v| if v > 0.0 { 1.0 } else { *slope });
                    accumulate(&mut grads, *x, mul(&g, &local));
                }
                Op::Prelu(x, slope) => {
                    let a = self.value(*slope).item()?;
                    let xv = self.value(*x);
                    let local = xv.map(|v| if v > 0.0 { 1.0 } else { a });
                    let da: f64 = xv
                        .data()
                        .iter()
                        .zip(g.data())
                        .filter(|(&v, _)| v <= 0.0)
                        .map(|(v, gg)| v * gg)
                        .sum();
                    let sshape = self.shape_of(*slope).to_vec();
                    accumulate(&mut grads, *slope, Tensor::new(sshape, vec![da])?);
                    accumulate(&mut grads, *x, mul(&g, &local));
                }
                Op::RowsL2Normalize { x, norms } => {
                    let (n, d) = g.dims2()?;
                    let y = node.value.data();
                    let gs = g.data();
                    let mut dx = vec![0.0; n * d];
                    for i in 0..n {
                        let yr = &y[i * d..(i + 1) * d];
                        let gr = &gs[i * d..(i + 1) * d];
                        let proj = dot(yr, gr);
                        for j in 0..d {
                            dx[i * d + j] = (gr[j] - yr[j] * proj) / norms[i];
                        }
                    }
                    accumulate(&mut grads, *x, Tensor::new(vec![n, d], dx)?);
                }
                Op::Spmm { adj, x } => {
                    accumulate(&mut grads, *x, adj.transpose_matmul_dense(&g)?);
                }
                Op::RowLogSumExp { x, probs } => {
                    let (n, d) = self.value(*x).dims2()?;
                    let gs = g.data();
                    let mut dx = probs.clone();
                    for i in 0..n {
                        for p in &mut dx[i * d..(i + 1) * d] {
                            *p *= gs[i];
                        }
                    }
                    accumulate(&mut grads, *x, Tensor::new(vec![n, d], dx)?);
                }
                Op::PairDots { x, pairs } => {
                    let xv = self.value(*x);
                    let (n, d) = xv.dims2()?;
                    let xs = xv.data();
                    let mut dx = vec![0.0; n * d];
                    for (&(u, v), &gk) in pairs.iter().zip(g.data()) {
                        for j in 0..d {
                            dx[u * d + j] += gk * xs[v * d + j];
                            dx[v * d + j] += gk * xs[u * d + j];
                        }
                    }
                    accumulate(&mut grads, *x, Tensor::new(vec![n, d], dx)?);
                }
            }
        }
        Ok(inputs)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn mul(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
