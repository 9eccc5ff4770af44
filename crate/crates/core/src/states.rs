//! Encoding of finite windows `(x₀, …, x_{w-1})` of grid nodes as state
//! indices, and the prepend map `x ↦ a·x` on them.

use serde::Serialize;

use crate::model::{BasePoint, FiberGrid};

/// States are windows of `window` grid nodes; index `Σ_m x_m·n^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateSpace {
    n_nodes: usize,
    window: usize,
}

impl StateSpace {
    /// Window size for a potential of the given arity (arity 1 embeds as 2).
    pub fn for_arity(n_nodes: usize, arity: usize) -> Self {
        Self { n_nodes, window: arity.saturating_sub(1).max(1) }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.n_nodes.pow(self.window as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// State reached by prepending letter `a` to state `i`.
    #[inline]
    pub fn target(&self, i: usize, a: usize) -> usize {
        a + self.n_nodes * (i % self.n_nodes.pow(self.window as u32 - 1))
    }

    /// The `n_nodes` states `i` with `target(i, t % n) == t`.
    #[inline]
    pub fn predecessors(&self, t: usize) -> impl Iterator<Item = usize> {
        let stride = self.n_nodes.pow(self.window as u32 - 1);
        let base = t / self.n_nodes;
        (0..self.n_nodes).map(move |l| base + stride * l)
    }

    #[inline]
    pub fn first_node(&self, i: usize) -> usize {
        i % self.n_nodes
    }

    pub fn decode(&self, mut i: usize) -> Vec<usize> {
        (0..self.window)
            .map(|_| {
                let x = i % self.n_nodes;
                i /= self.n_nodes;
                x
            })
            .collect()
    }

    pub fn encode(&self, nodes: &[usize]) -> usize {
        nodes[..self.window].iter().rev().fold(0, |acc, &x| acc * self.n_nodes + x)
    }

    pub fn angles(&self, i: usize, grid: &FiberGrid) -> Vec<f64> {
        self.decode(i).into_iter().map(|j| grid.node(j)).collect()
    }

    /// Log of the a-priori mass of one state cell.
    pub fn log_cell_mass(&self) -> f64 {
        -(self.window as f64) * (self.n_nodes as f64).ln()
    }

    /// Nearest state to the leading window of `x`, with the largest per-coordinate
    /// snap distance in radians.
    pub fn snap(&self, x: &BasePoint, grid: &FiberGrid) -> (usize, f64) {
        let mut dist: f64 = 0.0;
        let nodes: Vec<usize> = (0..self.window)
            .map(|j| {
                let (node, d) = grid.snap(x.coord(j));
                dist = dist.max(d);
                node
            })
            .collect();
        (self.encode(&nodes), dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_roundtrip() {
        let s = StateSpace::for_arity(5, 3);
        assert_eq!(s.len(), 25);
        for i in 0..s.len() {
            assert_eq!(s.encode(&s.decode(i)), i);
        }
    }

    #[test]
    fn prepend_shifts_window() {
        let s = StateSpace::for_arity(4, 3);
        let i = s.encode(&[1, 3]);
        assert_eq!(s.decode(s.target(i, 2)), vec![2, 1]);
        let s1 = StateSpace::for_arity(4, 1);
        assert_eq!(s1.window(), 1);
        assert_eq!(s1.target(3, 2), 2);
    }

    #[test]
    fn predecessors_invert_target() {
        for arity in [1, 2, 3] {
            let s = StateSpace::for_arity(4, arity);
            for t in 0..s.len() {
                let a = t % s.n_nodes();
                let preds: Vec<usize> = s.predecessors(t).collect();
                assert_eq!(preds.len(), s.n_nodes());
                for &i in &preds {
                    assert_eq!(s.target(i, a), t);
                }
                let count = (0..s.len()).filter(|&i| s.target(i, a) == t).count();
                assert_eq!(count, s.n_nodes());
            }
        }
    }
}
