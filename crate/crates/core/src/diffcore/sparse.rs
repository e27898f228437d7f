use super::tensor::Tensor;
use crate::error::{Result, SignaError};

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != rows + 1
            || offsets.last() != Some(&indices.len())
            || indices.len() != values.len()
            || offsets.windows(2).any(|w| w[0] > w[1])
            || indices.iter().any(|&j| j >= cols)
        {
            return Err(SignaError::Contract("malformed CSR matrix".into()));
        }
        Ok(CsrMatrix {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values stored in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(&[self.rows, self.cols]);
        let cols = self.cols;
        let data = out.data_mut();
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                data[i * cols + j] += v;
            }
        }
        out
    }

    /// `self · x` for a dense `x` with `self.cols()` rows.
    pub fn matmul_dense(&self, x: &Tensor) -> Result<Tensor> {
        let (r, d) = x.dims2()?;
        if r != self.cols {
            return Err(SignaError::Dimension {
                op: "spmm",
                left: vec![self.rows, self.cols],
                right: x.shape().to_vec(),
            });
        }
        let xs = x.data();
        let mut out = vec![0.0; self.rows * d];
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let o = &mut out[i * d..(i + 1) * d];
            for (&j, &v) in idx.iter().zip(vals) {
                for (oo, &xx) in o.iter_mut().zip(&xs[j * d..(j + 1) * d]) {
                    *oo += v * xx;
                }
            }
        }
        Tensor::new(vec![self.rows, d], out)
    }

    /// `selfᵀ · g` for a dense `g` with `self.rows()` rows.
    pub fn transpose_matmul_dense(&self, g: &Tensor) -> Result<Tensor> {
        let (r, d) = g.dims2()?;
        if r != self.rows {
            return Err(SignaError::Dimension {
                op: "spmm_transpose",
                left: vec![self.rows, self.cols],
                right: g.shape().to_vec(),
            });
        }
        let gs = g.data();
        let mut out = vec![0.0; self.cols * d];
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let gi = &gs[i * d..(i + 1) * d];
            for (&j, &v) in idx.iter().zip(vals) {
                for (oo, &gg) in out[j * d..(j + 1) * d].iter_mut().zip(gi) {
                    *oo += v * gg;
                }
            }
        }
        Tensor::new(vec![self.cols, d], out)
    }
}
