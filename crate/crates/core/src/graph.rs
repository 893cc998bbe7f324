//! Adjacency-matrix utilities: degrees, Laplacians, symmetrization and the
//! ground-truth graph built from an edge list.

use crate::error::{GlnnError, Result};
use crate::matrix::Matrix;

/// Trainable adjacency together with its symmetrized view.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedAdjacency {
    raw: Matrix,
    symmetrized: Matrix,
}

impl LearnedAdjacency {
    pub fn new(raw: Matrix) -> Result<Self> {
        let symmetrized = symmetrize(&raw)?;
        Ok(LearnedAdjacency { raw, symmetrized })
    }

    pub fn raw(&self) -> &Matrix {
        &self.raw
    }

    pub fn symmetrized(&self) -> &Matrix {
        &self.symmetrized
    }

    pub fn into_raw(self) -> Matrix {
        self.raw
    }
}

/// Binary undirected graph and its symmetric normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthGraph {
    pub binary: Matrix,
    pub normalized: Matrix,
    /// Deduplicated undirected edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl GroundTruthGraph {
    pub fn num_nodes(&self) -> usize {
        self.binary.rows()
    }

    pub fn isolated_nodes(&self) -> usize {
        (0..self.num_nodes())
            .filter(|&i| self.binary.row(i).iter().all(|&v| v == 0.0))
            .count()
    }
}

pub fn degree_matrix(a: &Matrix) -> Result<Matrix> {
    a.require_square("degree_matrix")?;
    Ok(Matrix::from_diag(a.row_sums().as_slice()))
}

/// `D - A`.
pub fn combinatorial_laplacian(a: &Matrix) -> Result<Matrix> {
    a.require_square("combinatorial_laplacian")?;
    let degrees = a.row_sums();
    let mut l = a.scale(-1.0);
    for i in 0..a.rows() {
        l.set(i, i, degrees.get(i, 0) - a.get(i, i));
    }
    Ok(l)
}

/// `I - D^{-1/2} A D^{-1/2}`. Every node needs a positive degree.
pub fn normalized_laplacian(a: &Matrix) -> Result<Matrix> {
    a.require_square("normalized_laplacian")?;
    let inv_sqrt = inverse_sqrt_degrees(a, false)?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = -inv_sqrt[i] * a.get(i, j) * inv_sqrt[j];
            l.set(i, j, if i == j { 1.0 + v } else { v });
        }
    }
    Ok(l)
}

/// `D^{-1/2} A D^{-1/2}`; isolated nodes keep all-zero rows.
pub fn normalize_symmetric(a: &Matrix) -> Result<Matrix> {
    a.require_square("normalize_symmetric")?;
    let inv_sqrt = inverse_sqrt_degrees(a, true)?;
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j);
            if v != 0.0 {
                out.set(i, j, inv_sqrt[i] * v * inv_sqrt[j]);
            }
        }
    }
    Ok(out)
}

fn inverse_sqrt_degrees(a: &Matrix, allow_isolated: bool) -> Result<Vec<f64>> {
    a.row_sums()
        .as_slice()
        .iter()
        .enumerate()
        .map(|(node, &d)| {
            if d > 0.0 {
                Ok(1.0 / d.sqrt())
            } else if allow_isolated && d == 0.0 {
                Ok(0.0)
            } else {
                Err(GlnnError::ZeroDegree { node })
            }
        })
        .collect()
}

/// `(raw^T + raw) / 2`.
pub fn symmetrize(raw: &Matrix) -> Result<Matrix> {
    raw.require_square("symmetrize")?;
    let n = raw.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (raw.get(i, j) + raw.get(j, i));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Builds the binary symmetric hollow adjacency for `n` nodes from an edge
/// list (self-loops dropped, duplicates and reversed pairs collapsed) and its
/// symmetric normalization without added self-loops.
pub fn preprocess_ground_truth(edges: &[(usize, usize)], n: usize) -> Result<GroundTruthGraph> {
    let mut clean = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(GlnnError::EdgeOutOfRange(u, v, n));
        }
        if u != v {
            clean.push((u.min(v), u.max(v)));
        }
    }
    clean.sort_unstable();
    clean.dedup();

    let mut binary = Matrix::zeros(n, n);
    for &(u, v) in &clean {
        binary.set(u, v, 1.0);
        binary.set(v, u, 1.0);
    }
    let normalized = normalize_symmetric(&binary)?;
    Ok(GroundTruthGraph {
        binary,
        normalized,
        edges: clean,
    })
}
