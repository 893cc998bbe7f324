//! Graph-learning loss terms and the masked cross-entropy, each returning its
//! value together with the analytic gradient with respect to the matrix it
//! is evaluated on.
//!
//! Squared norms of matrices are sums of squared entries throughout.

use serde::{Deserialize, Serialize};

use crate::error::{GlnnError, Result};
use crate::matrix::Matrix;

/// Probabilities are clamped to this floor inside `ln`.
pub const PROB_FLOOR: f64 = 1e-12;

/// Weights of the graph-learning terms and of the ground-truth proximity
/// term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Laplacian regularizer.
    pub lambda0: f64,
    /// L1 sparsity.
    pub lambda1: f64,
    /// Symmetry penalty; zero whenever the adjacency is symmetrized before use.
    pub lambda2: f64,
    /// Row-sum (normalization) penalty.
    pub lambda3: f64,
    /// Trace (self-loop) penalty.
    pub lambda4: f64,
    /// Ground-truth proximity.
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda0: 1e-2,
            lambda1: 0.1,
            lambda2: 0.0,
            lambda3: 0.1,
            lambda4: 0.001,
            alpha: 10.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        LossWeights {
            lambda0: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            alpha: 0.0,
        }
    }

    pub fn validate(&self, symmetrized: bool) -> Result<()> {
        let all = [
            self.lambda0,
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
            self.alpha,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GlnnError::invalid(format!(
                "loss weights must be finite and nonnegative: {self:?}"
            )));
        }
        if symmetrized && self.lambda2 != 0.0 {
            return Err(GlnnError::invalid(
                "lambda2 must be 0 when the adjacency is symmetrized",
            ));
        }
        Ok(())
    }
}

/// How the Laplacian quadratic forms of the feature channels are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlrMode {
    /// `lambda0 * sum_c q_c^2`
    #[default]
    Squared,
    /// `lambda0 * sum_c q_c`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CeReduction {
    /// Average over labeled nodes.
    #[default]
    Mean,
    /// Plain sum over labeled nodes.
    Sum,
}

impl CeReduction {
    pub fn scale(self, labeled: usize) -> f64 {
        match self {
            CeReduction::Mean => 1.0 / labeled as f64,
            CeReduction::Sum => 1.0,
        }
    }
}

/// Loss values by term. `total = glr + sparsity + properties + alpha * gt +
/// cross_entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub glr: f64,
    pub sparsity: f64,
    pub properties: f64,
    pub gt: f64,
    pub cross_entropy: f64,
    pub total: f64,
}

impl LossReport {
    pub fn assemble(glr: f64, sparsity: f64, properties: f64, gt: f64, alpha: f64, ce: f64) -> Self {
        LossReport {
            glr,
            sparsity,
            properties,
            gt,
            cross_entropy: ce,
            total: glr + sparsity + properties + alpha * gt + ce,
        }
    }

    /// First term whose value is not finite, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("glr", self.glr),
            ("sparsity", self.sparsity),
            ("properties", self.properties),
            ("gt", self.gt),
            ("cross_entropy", self.cross_entropy),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// A loss value and its gradient with respect to one matrix argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub value: f64,
    pub grad: Matrix,
}

fn check_glr_shapes(x: &Matrix, a_out: &Matrix) -> Result<()> {
    a_out.require_square("glr_loss")?;
    if x.rows() != a_out.rows() {
        return Err(GlnnError::ShapeMismatch {
            op: "glr_loss",
            lhs: x.shape(),
            rhs: a_out.shape(),
        });
    }
    Ok(())
}

/// Per-channel Laplacian quadratic forms `q_c = x_c^T (I - A) x_c`.
pub fn channel_quadratic_forms(x: &Matrix, a_out: &Matrix) -> Result<Vec<f64>> {
    check_glr_shapes(x, a_out)?;
    let (n, c) = x.shape();
    // (X^T A)[c][j] = sum_i x_ic a_ij; zero features are skipped by matmul.
    let xt = x.transpose();
    let xta = xt.matmul(a_out)?;
    let q = (0..c)
        .map(|ch| {
            let x_col = xt.row(ch);
            let energy: f64 = x_col.iter().map(|v| v * v).sum();
            let smooth: f64 = (0..n).map(|j| xta.get(ch, j) * x_col[j]).sum();
            energy - smooth
        })
        .collect();
    Ok(q)
}

/// Laplacian regularizer over all feature channels.
pub fn glr_loss(x: &Matrix, a_out: &Matrix, lambda0: f64) -> Result<Term> {
    glr_loss_with(x, a_out, lambda0, GlrMode::Squared)
}

pub fn glr_loss_with(x: &Matrix, a_out: &Matrix, lambda0: f64, mode: GlrMode) -> Result<Term> {
    let n = a_out.rows();
    if lambda0 == 0.0 {
        check_glr_shapes(x, a_out)?;
        return Ok(Term {
            value: 0.0,
            grad: Matrix::zeros(n, n),
        });
    }
    let q = channel_quadratic_forms(x, a_out)?;
    // d q_c / d A = -x_c x_c^T, so the gradient is -X diag(w) X^T with
    // w_c = 2 lambda0 q_c (squared) or lambda0 (linear).
    let (value, weights): (f64, Vec<f64>) = match mode {
        GlrMode::Squared => (
            lambda0 * q.iter().map(|v| v * v).sum::<f64>(),
            q.iter().map(|v| -2.0 * lambda0 * v).collect(),
        ),
        GlrMode::Linear => (lambda0 * q.iter().sum::<f64>(), vec![-lambda0; q.len()]),
    };
    let mut scaled = x.clone();
    for r in 0..scaled.rows() {
        for (v, w) in scaled.row_mut(r).iter_mut().zip(&weights) {
            *v *= w;
        }
    }
    let mut grad = scaled.matmul(&x.transpose())?;
    grad.mirror_upper();
    Ok(Term { value, grad })
}

/// `lambda1 * ||A||_1` with subgradient `lambda1 * sgn(A)`.
pub fn sparsity_loss(a_out: &Matrix, lambda1: f64) -> Term {
    Term {
        value: lambda1 * a_out.l1_norm(),
        grad: a_out.sgn().scale(lambda1),
    }
}

/// Validity penalties: symmetry (`lambda2`), unit row sums (`lambda3`) and
/// zero trace (`lambda4`).
pub fn properties_loss(a_out: &Matrix, w: &LossWeights) -> Result<Term> {
    a_out.require_square("properties_loss")?;
    let n = a_out.rows();
    let mut grad = Matrix::zeros(n, n);
    let mut value = 0.0;

    if w.lambda2 != 0.0 {
        let skew = a_out.transpose().sub(a_out)?;
        value += w.lambda2 * skew.frobenius_sq();
        // d/dA ||A^T - A||^2 = 4 (A - A^T)
        grad.add_scaled(&skew, -4.0 * w.lambda2)?;
    }

    let residual: Vec<f64> = a_out.row_sums().as_slice().iter().map(|s| s - 1.0).collect();
    value += w.lambda3 * residual.iter().map(|r| r * r).sum::<f64>();
    if w.lambda3 != 0.0 {
        for (i, r) in residual.iter().enumerate() {
            let g = 2.0 * w.lambda3 * r;
            for v in grad.row_mut(i) {
                *v += g;
            }
        }
    }

    let trace = a_out.trace()?;
    value += w.lambda4 * trace * trace;
    if w.lambda4 != 0.0 {
        for i in 0..n {
            let g = grad.get(i, i) + 2.0 * w.lambda4 * trace;
            grad.set(i, i, g);
        }
    }
    Ok(Term { value, grad })
}

/// `||A - A_gt||^2` with gradient `2 (A - A_gt)`. The caller applies `alpha`.
pub fn gt_loss(a_out: &Matrix, a_gt: &Matrix) -> Result<Term> {
    let diff = a_out.sub(a_gt).map_err(|_| GlnnError::ShapeMismatch {
        op: "gt_loss",
        lhs: a_out.shape(),
        rhs: a_gt.shape(),
    })?;
    Ok(Term {
        value: diff.frobenius_sq(),
        grad: diff.scale(2.0),
    })
}

pub(crate) fn check_labels(y: &Matrix, labeled: &[usize]) -> Result<()> {
    if labeled.is_empty() {
        return Err(GlnnError::invalid("labeled set is empty"));
    }
    for &l in labeled {
        if l >= y.rows() {
            return Err(GlnnError::invalid(format!(
                "labeled index {l} out of range for {} nodes",
                y.rows()
            )));
        }
        let row = y.row(l);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(GlnnError::NotOneHot { row: l });
        }
    }
    Ok(())
}

/// Cross-entropy of probability rows `z` against one-hot `y` over the
/// labeled nodes. The gradient is with respect to `z`.
pub fn masked_cross_entropy(z: &Matrix, y: &Matrix, labeled: &[usize]) -> Result<Term> {
    masked_cross_entropy_with(z, y, labeled, CeReduction::Mean)
}

pub fn masked_cross_entropy_with(
    z: &Matrix,
    y: &Matrix,
    labeled: &[usize],
    reduction: CeReduction,
) -> Result<Term> {
    z.require_same_shape(y, "masked_cross_entropy")?;
    check_labels(y, labeled)?;
    let scale = reduction.scale(labeled.len());
    let mut grad = Matrix::zeros(z.rows(), z.cols());
    let mut total = 0.0;
    for &l in labeled {
        for f in 0..z.cols() {
            let target = y.get(l, f);
            if target != 0.0 {
                let p = z.get(l, f).max(PROB_FLOOR);
                total += target * p.ln();
                grad.set(l, f, -scale * target / p);
            }
        }
    }
    Ok(Term {
        value: -scale * total,
        grad,
    })
}

/// Gradient of the masked cross-entropy with respect to the logits feeding a
/// row softmax: `scale * (probs - y)` on labeled rows, zero elsewhere.
pub fn softmax_cross_entropy_grad(
    probs: &Matrix,
    y: &Matrix,
    labeled: &[usize],
    reduction: CeReduction,
) -> Result<Matrix> {
    probs.require_same_shape(y, "softmax_cross_entropy_grad")?;
    check_labels(y, labeled)?;
    let scale = reduction.scale(labeled.len());
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for &l in labeled {
        for f in 0..probs.cols() {
            grad.set(l, f, scale * (probs.get(l, f) - y.get(l, f)));
        }
    }
    Ok(grad)
}

/// The graph-learning part of the objective: regularizer, sparsity and
/// validity penalties, with their summed gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLearningLoss {
    pub glr: f64,
    pub sparsity: f64,
    pub properties: f64,
    pub grad: Matrix,
}

impl GraphLearningLoss {
    pub fn value(&self) -> f64 {
        self.glr + self.sparsity + self.properties
    }
}

pub fn graph_learning_loss(x: &Matrix, a_out: &Matrix, w: &LossWeights) -> Result<GraphLearningLoss> {
    graph_learning_loss_with(x, a_out, w, GlrMode::Squared)
}

pub fn graph_learning_loss_with(
    x: &Matrix,
    a_out: &Matrix,
    w: &LossWeights,
    mode: GlrMode,
) -> Result<GraphLearningLoss> {
    let glr = glr_loss_with(x, a_out, w.lambda0, mode)?;
    let sparsity = sparsity_loss(a_out, w.lambda1);
    let properties = properties_loss(a_out, w)?;
    let mut grad = glr.grad;
    grad.add_scaled(&sparsity.grad, 1.0)?;
    grad.add_scaled(&properties.grad, 1.0)?;
    Ok(GraphLearningLoss {
        glr: glr.value,
        sparsity: sparsity.value,
        properties: properties.value,
        grad,
    })
}
