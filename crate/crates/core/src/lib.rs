//! Graph-structure learning for semi-supervised node classification.
//!
//! A dense adjacency matrix is learned jointly with a two-layer graph
//! convolutional classifier. Besides the masked cross-entropy, the adjacency
//! is shaped by a Laplacian smoothness regularizer on the node features, an
//! L1 sparsity penalty, soft validity penalties (unit row sums, zero trace)
//! and, when a reference graph is available, a proximity term pulling it
//! toward that graph. All gradients are derived by hand.

pub mod adam;
pub mod dataset;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod loss;
pub mod matrix;
pub mod synthetic;
pub mod train;

pub use error::{GlnnError, Result};
pub use matrix::{Matrix, Rng};
