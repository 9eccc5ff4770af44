//! Shared domain types: the fiber grid, the shift metric, potentials,
//! eventually periodic points and cylinder sets.

pub mod arcs;
pub mod grid;
pub mod metric;
pub mod point;
pub mod potential;

pub use arcs::{Arc, ArcSet, CoordConstraint};
pub use grid::FiberGrid;
pub use metric::{DistanceBounds, ShiftMetric, FIBER_DIAMETER};
pub use point::{BasePoint, Word};
pub use potential::{FourierTerm, Potential};
