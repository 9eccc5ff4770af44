use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{arc_distance, wrap_angle};

/// Uniform quadrature on the circle discretizing the normalized Lebesgue
/// a-priori measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl FiberGrid {
    /// Nodes `2πj/n`, `j = 0..n`, each carrying weight `1/n`.
    pub fn uniform(n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("grid needs at least one node"));
        }
        let nodes = (0..n_nodes).map(|j| TAU * j as f64 / n_nodes as f64).collect();
        let weights = vec![1.0 / n_nodes as f64; n_nodes];
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Node spacing in radians.
    pub fn spacing(&self) -> f64 {
        TAU / self.len() as f64
    }

    /// Nearest node and the arc distance (radians) to it.
    pub fn snap(&self, angle: f64) -> (usize, f64) {
        let n = self.len();
        let a = wrap_angle(angle);
        let j = ((a / self.spacing()).round() as usize) % n;
        (j, arc_distance(a, self.nodes[j]))
    }
}
