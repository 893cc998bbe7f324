//! Planted-partition graphs with class-correlated binary features, used for
//! smoke runs and recovery checks where no benchmark files are needed.

use crate::dataset::Dataset;
use crate::error::{GlnnError, Result};
use crate::matrix::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedPartition {
    pub nodes: usize,
    pub classes: usize,
    /// Edge probability between nodes of the same class.
    pub p_in: f64,
    /// Edge probability between nodes of different classes.
    pub p_out: f64,
    pub features: usize,
    /// Probability that a node carries one of its own class's features.
    pub p_signal: f64,
    /// Probability that a node carries any other feature.
    pub p_noise: f64,
    pub seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            nodes: 30,
            classes: 2,
            p_in: 0.5,
            p_out: 0.05,
            features: 16,
            p_signal: 0.4,
            p_noise: 0.05,
            seed: 0,
        }
    }
}

impl PlantedPartition {
    /// Class of node `i`; classes occupy contiguous index blocks.
    pub fn class_of(&self, i: usize) -> usize {
        i * self.classes / self.nodes
    }

    pub fn generate(&self) -> Result<Dataset> {
        let probs = [self.p_in, self.p_out, self.p_signal, self.p_noise];
        if self.nodes == 0 || self.classes == 0 || self.classes > self.nodes {
            return Err(GlnnError::invalid("need 1 <= classes <= nodes"));
        }
        if self.features < self.classes {
            return Err(GlnnError::invalid("need at least one feature per class"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(GlnnError::invalid("probabilities must lie in [0, 1]"));
        }
        let mut rng = Rng::new(self.seed);
        let labels: Vec<usize> = (0..self.nodes).map(|i| self.class_of(i)).collect();

        let mut edges = Vec::new();
        for i in 0..self.nodes {
            for j in i + 1..self.nodes {
                let p = if labels[i] == labels[j] { self.p_in } else { self.p_out };
                if rng.next_f64() < p {
                    edges.push((i, j));
                }
            }
        }

        let per_class = self.features / self.classes;
        let mut x = Matrix::zeros(self.nodes, self.features);
        for (i, &k) in labels.iter().enumerate() {
            for c in 0..self.features {
                let own = c / per_class == k;
                let p = if own { self.p_signal } else { self.p_noise };
                if rng.next_f64() < p {
                    x.set(i, c, 1.0);
                }
            }
        }

        let names = (0..self.classes).map(|k| format!("class{k}")).collect();
        Dataset::from_parts("planted", x, labels, names, Some(&edges))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generates_block_structure() {
        let spec = PlantedPartition {
            nodes: 40,
            p_in: 1.0,
            p_out: 0.0,
            ..Default::default()
        };
        let ds = spec.generate().unwrap();
        let gt = ds.gt.as_ref().unwrap();
        // Two cliques of 20.
        assert_eq!(gt.edges.len(), 2 * 20 * 19 / 2);
        assert!(gt.edges.iter().all(|&(u, v)| ds.labels[u] == ds.labels[v]));
        assert_eq!(spec.generate().unwrap(), ds);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = PlantedPartition {
            p_in: 1.5,
            ..Default::default()
        };
        assert!(bad.generate().is_err());
        let tiny = PlantedPartition {
            features: 1,
            ..Default::default()
        };
        assert!(tiny.generate().is_err());
    }
}
