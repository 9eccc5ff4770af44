use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::wrap_angle;

const EDGE_EPS: f64 = 1e-12;

/// Counterclockwise arc `[start, start + length]` on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn new(start: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) || !start.is_finite() || !length.is_finite() {
            return Err(Error::invalid(format!("arc needs positive finite length, got {length}")));
        }
        Ok(Self { start: wrap_angle(start), length: length.min(std::f64::consts::TAU) })
    }

    /// Arc centred at `center` with half-width `radius`.
    pub fn centered(center: f64, radius: f64) -> Result<Self> {
        Self::new(center - radius, 2.0 * radius)
    }

    /// Arc from `lo` counterclockwise to `hi`.
    pub fn between(lo: f64, hi: f64) -> Result<Self> {
        let len = wrap_angle(hi - lo);
        Self::new(lo, if len == 0.0 { std::f64::consts::TAU } else { len })
    }

    pub fn is_full(&self) -> bool {
        self.length >= std::f64::consts::TAU
    }

    pub fn contains(&self, angle: f64, open: bool) -> bool {
        if self.is_full() {
            return true;
        }
        let off = wrap_angle(angle - self.start);
        if open {
            off > EDGE_EPS && off < self.length - EDGE_EPS
        } else {
            off <= self.length + EDGE_EPS || off >= std::f64::consts::TAU - EDGE_EPS
        }
    }
}

/// Constraint `x_j ∈ ∪ arcs` on one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordConstraint {
    pub coord: usize,
    pub arcs: Vec<Arc>,
}

/// Cylinder-type subset of `X` given by arc constraints on finitely many
/// coordinates. An empty arc list makes the set empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArcSet {
    constraints: Vec<CoordConstraint>,
    open: bool,
}

impl ArcSet {
    pub fn full() -> Self {
        Self::default()
    }

    pub fn new(mut constraints: Vec<CoordConstraint>, open: bool) -> Result<Self> {
        constraints.sort_by_key(|c| c.coord);
        if constraints.windows(2).any(|w| w[0].coord == w[1].coord) {
            return Err(Error::invalid("each coordinate may be constrained once"));
        }
        Ok(Self { constraints, open })
    }

    /// `{x_coord ∈ arc}` as a closed set.
    pub fn single(coord: usize, arc: Arc) -> Self {
        Self { constraints: vec![CoordConstraint { coord, arcs: vec![arc] }], open: false }
    }

    /// Adds (or intersects with) a constraint on `coord`.
    pub fn with(mut self, coord: usize, arcs: Vec<Arc>) -> Result<Self> {
        self.constraints.push(CoordConstraint { coord, arcs });
        Self::new(self.constraints, self.open)
    }

    pub fn as_open(mut self) -> Self {
        self.open = true;
        self
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn constraints(&self) -> &[CoordConstraint] {
        &self.constraints
    }

    /// One past the largest constrained coordinate.
    pub fn depth(&self) -> usize {
        self.constraints.iter().map(|c| c.coord + 1).max().unwrap_or(0)
    }

    pub fn constraint(&self, coord: usize) -> Option<&CoordConstraint> {
        self.constraints.iter().find(|c| c.coord == coord)
    }

    pub fn allows(&self, coord: usize, angle: f64) -> bool {
        match self.constraint(coord) {
            None => true,
            Some(c) => c.arcs.iter().any(|a| a.contains(angle, self.open)),
        }
    }

    /// Membership of a point given by its leading coordinates.
    pub fn contains(&self, coords: &[f64]) -> bool {
        self.constraints.iter().all(|c| coords.get(c.coord).is_some_and(|&a| self.allows(c.coord, a)))
    }

    /// Per-coordinate mask over grid nodes for coordinates `0..depth`.
    pub fn node_masks(&self, nodes: &[f64]) -> Vec<Vec<bool>> {
        (0..self.depth()).map(|j| nodes.iter().map(|&a| self.allows(j, a)).collect()).collect()
    }
}
