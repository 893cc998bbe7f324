//! Two-layer graph convolutional classifier over a learned adjacency, with a
//! hand-written backward pass.
//!
//! ```text
//! A_out  = (A^T + A) / 2
//! probs  = softmax(A_out · drop(relu(A_out · drop(X) · W0)) · W1)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{GlnnError, Result};
use crate::graph::symmetrize;
use crate::loss::LossWeights;
use crate::matrix::{glorot_uniform, rand_uniform, Matrix, Rng};

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const DEFAULT_WEIGHT_DECAY: f64 = 5e-4;

/// Leading bytes of a model checkpoint file.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GLNNCKPT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub nodes: usize,
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlnnModel {
    /// Trainable adjacency, `N x N`, used only through its symmetrization.
    pub a_raw: Matrix,
    /// Input-to-hidden weights, `C x H`.
    pub w0: Matrix,
    /// Hidden-to-output weights, `H x F`.
    pub w1: Matrix,
    pub weights: LossWeights,
    pub dropout_rate: f64,
    /// L2 penalty on `w0` only.
    pub weight_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub a_out: Matrix,
    pub pre_relu: Matrix,
    pub hidden: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
    /// Inverted-dropout masks for the input features and the hidden layer
    /// (entries `0` or `1/(1-p)`); `None` in evaluation mode.
    pub dropout_masks: Option<(Matrix, Matrix)>,
    input: Matrix,
    support0: Matrix,
    hidden_in: Matrix,
    support1: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: Matrix,
    pub w1: Matrix,
    pub a_out: Matrix,
}

/// Random initial model: adjacency entries uniform on `[0, 2/N)` so rows sum
/// to one in expectation, Glorot-uniform weights.
pub fn init_model(
    rng: &mut Rng,
    n: usize,
    c: usize,
    h: usize,
    f: usize,
    weights: LossWeights,
) -> Result<GlnnModel> {
    if n == 0 || c == 0 || h == 0 || f == 0 {
        return Err(GlnnError::invalid(format!(
            "model dimensions must be positive, got N={n} C={c} H={h} F={f}"
        )));
    }
    let a_raw = rand_uniform(rng, n, n, 0.0, 2.0 / n as f64)?;
    let w0 = glorot_uniform(rng, c, h)?;
    let w1 = glorot_uniform(rng, h, f)?;
    Ok(GlnnModel {
        a_raw,
        w0,
        w1,
        weights,
        dropout_rate: DEFAULT_DROPOUT,
        weight_decay: DEFAULT_WEIGHT_DECAY,
    })
}

/// Index of the largest entry of each row, ties to the lowest index.
pub fn predict(probs: &Matrix) -> Vec<usize> {
    (0..probs.rows())
        .map(|r| {
            let row = probs.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// `(G + G^T) / 2`: gradient with respect to the raw adjacency given the
/// gradient with respect to its symmetrization.
pub fn chain_symmetrize(grad_a_out: &Matrix) -> Result<Matrix> {
    symmetrize(grad_a_out)
}

fn dropout_mask(rng: &mut Rng, rows: usize, cols: usize, rate: f64) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.next_f64() >= rate { keep } else { 0.0 })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("mask shape")
}

impl GlnnModel {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            nodes: self.a_raw.rows(),
            features: self.w0.rows(),
            hidden: self.w0.cols(),
            classes: self.w1.cols(),
        }
    }

    pub fn a_out(&self) -> Result<Matrix> {
        symmetrize(&self.a_raw)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        let d = self.dims();
        let consistent = self.a_raw.is_square()
            && self.w1.rows() == d.hidden
            && x.rows() == d.nodes
            && x.cols() == d.features;
        if consistent {
            Ok(())
        } else {
            Err(GlnnError::ShapeMismatch {
                op: "forward",
                lhs: x.shape(),
                rhs: (d.nodes, d.features),
            })
        }
    }

    /// Forward pass. Dropout is drawn from `rng` only in training mode with a
    /// positive rate; evaluation mode is a pure function of model and input.
    pub fn forward(&self, x: &Matrix, mode: Mode, rng: &mut Rng) -> Result<ForwardCache> {
        self.check_input(x)?;
        let a_out = self.a_out()?;
        self.forward_with(a_out, x, mode, rng)
    }

    pub fn forward_eval(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_input(x)?;
        let a_out = self.a_out()?;
        self.forward_with(a_out, x, Mode::Eval, &mut Rng::new(0))
    }

    /// Forward pass with an explicitly supplied adjacency in place of the
    /// symmetrized `a_raw`.
    pub fn forward_with(
        &self,
        a_out: Matrix,
        x: &Matrix,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<ForwardCache> {
        self.check_input(x)?;
        a_out.require_same_shape(&self.a_raw, "forward")?;
        let d = self.dims();
        let dropping = mode == Mode::Train && self.dropout_rate > 0.0;

        let (input, x_mask) = if dropping {
            let m = dropout_mask(rng, d.nodes, d.features, self.dropout_rate);
            (x.hadamard(&m)?, Some(m))
        } else {
            (x.clone(), None)
        };
        let support0 = input.matmul(&self.w0)?;
        let pre_relu = a_out.matmul(&support0)?;
        let hidden = pre_relu.relu();
        let (hidden_in, h_mask) = if dropping {
            let m = dropout_mask(rng, d.nodes, d.hidden, self.dropout_rate);
            (hidden.hadamard(&m)?, Some(m))
        } else {
            (hidden.clone(), None)
        };
        let support1 = hidden_in.matmul(&self.w1)?;
        let logits = a_out.matmul(&support1)?;
        let probs = logits.row_softmax();

        Ok(ForwardCache {
            a_out,
            pre_relu,
            hidden,
            logits,
            probs,
            dropout_masks: x_mask.zip(h_mask),
            input,
            support0,
            hidden_in,
            support1,
        })
    }

    /// Backpropagates `grad_logits` (the gradient of the classification loss
    /// with respect to the pre-softmax logits) to `w0`, `w1` and `A_out`.
    /// Weight decay on `w0` is added here.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Matrix) -> Result<Gradients> {
        let d = self.dims();
        let stale = cache.logits.shape() != (d.nodes, d.classes)
            || cache.support0.shape() != (d.nodes, d.hidden)
            || cache.input.cols() != d.features
            || cache.a_out.shape() != self.a_raw.shape();
        if stale {
            return Err(GlnnError::invalid(
                "forward cache does not match the model dimensions",
            ));
        }
        grad_logits.require_same_shape(&cache.logits, "backward")?;

        let a_t = cache.a_out.transpose();

        // Output layer: logits = A · S1, S1 = H_in · W1.
        let mut grad_a = grad_logits.matmul(&cache.support1.transpose())?;
        let d_support1 = a_t.matmul(grad_logits)?;
        let grad_w1 = cache.hidden_in.transpose().matmul(&d_support1)?;
        let mut d_hidden = d_support1.matmul(&self.w1.transpose())?;
        if let Some((_, h_mask)) = &cache.dropout_masks {
            d_hidden = d_hidden.hadamard(h_mask)?;
        }

        // Hidden layer: pre = A · S0, S0 = X_in · W0.
        let d_pre = d_hidden.hadamard(&cache.pre_relu.relu_mask())?;
        grad_a.add_scaled(&d_pre.matmul(&cache.support0.transpose())?, 1.0)?;
        let d_support0 = a_t.matmul(&d_pre)?;
        let mut grad_w0 = cache.input.transpose().matmul(&d_support0)?;
        if self.weight_decay != 0.0 {
            grad_w0.add_scaled(&self.w0, 2.0 * self.weight_decay)?;
        }

        Ok(Gradients {
            w0: grad_w0,
            w1: grad_w1,
            a_out: grad_a,
        })
    }

    /// `weight_decay * ||w0||^2`, the penalty whose gradient `backward` adds.
    pub fn weight_decay_penalty(&self) -> f64 {
        self.weight_decay * self.w0.frobenius_sq()
    }

    pub fn all_finite(&self) -> bool {
        self.a_raw.all_finite() && self.w0.all_finite() && self.w1.all_finite()
    }

    /// Writes the checkpoint format: the 8-byte magic `GLNNCKPT`, then
    /// `N, C, H, F` as little-endian `u64`, then `a_raw`, `w0`, `w1` as
    /// little-endian `f64` in row-major order.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dims();
        w.write_all(CHECKPOINT_MAGIC)?;
        for dim in [d.nodes, d.features, d.hidden, d.classes] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for m in [&self.a_raw, &self.w0, &self.w1] {
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a checkpoint; hyperparameters not stored in the file take their
    /// defaults.
    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<GlnnModel> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| GlnnError::Format("truncated checkpoint header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(GlnnError::Format("not a model checkpoint".into()));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = read_u64(&mut r)? as usize;
        }
        let [n, c, h, f] = dims;
        let a_raw = read_matrix(&mut r, n, n)?;
        let w0 = read_matrix(&mut r, c, h)?;
        let w1 = read_matrix(&mut r, h, f)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(GlnnError::Format("trailing bytes after checkpoint".into()));
        }
        Ok(GlnnModel {
            a_raw,
            w0,
            w1,
            weights: LossWeights::default(),
            dropout_rate: DEFAULT_DROPOUT,
            weight_decay: DEFAULT_WEIGHT_DECAY,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_checkpoint(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GlnnModel> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| GlnnError::Format("unexpected end of file".into()))?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| GlnnError::Format("matrix dimensions overflow".into()))?;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| GlnnError::Format("unexpected end of file".into()))?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}
