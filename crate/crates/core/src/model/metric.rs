use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::point::BasePoint;
use crate::numerics::arc_distance;

/// Product metric on `X = (S¹)^ℕ`: `d(x, y) = Σ_j θ^j d_{S¹}(x_j, y_j)` with
/// the arc distance scaled so the circle has diameter 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftMetric {
    theta: f64,
}

/// Diameter of the circle under the normalized arc distance.
pub const FIBER_DIAMETER: f64 = 0.5;

/// Two-sided enclosure of a shift-metric distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ShiftMetric {
    fn default() -> Self {
        Self { theta: 0.5 }
    }
}

impl ShiftMetric {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn fiber_diameter(&self) -> f64 {
        FIBER_DIAMETER
    }

    /// Arc distance on one coordinate, normalized to `[0, 1/2]`.
    pub fn fiber_distance(a: f64, b: f64) -> f64 {
        arc_distance(a, b) / std::f64::consts::TAU
    }

    /// Bound on the contribution of coordinates `n_terms..`.
    pub fn tail_bound(&self, n_terms: usize) -> f64 {
        FIBER_DIAMETER * self.theta.powi(n_terms as i32) / (1.0 - self.theta)
    }

    /// Sums the first `n_terms` coordinates exactly and encloses the rest.
    pub fn distance(&self, x: &BasePoint, y: &BasePoint, n_terms: usize) -> Result<DistanceBounds> {
        if n_terms == 0 {
            return Err(Error::invalid("n_terms must be at least 1"));
        }
        let mut lower = 0.0;
        let mut weight = 1.0;
        for j in 0..n_terms {
            lower += weight * Self::fiber_distance(x.coord(j), y.coord(j));
            weight *= self.theta;
        }
        Ok(DistanceBounds { lower, upper: lower + self.tail_bound(n_terms) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_theta() {
        assert!(ShiftMetric::new(0.0).is_err());
        assert!(ShiftMetric::new(1.0).is_err());
        assert!(ShiftMetric::new(f64::NAN).is_err());
        assert!(ShiftMetric::new(0.3).is_ok());
    }

    #[test]
    fn identical_points_have_zero_lower_bound() {
        let m = ShiftMetric::default();
        let x = BasePoint::new(vec![0.3, 1.0], vec![2.0]).unwrap();
        let d = m.distance(&x, &x, 10).unwrap();
        assert_eq!(d.lower, 0.0);
        assert!(d.upper <= 0.5f64.powi(10) / 0.5 + 1e-15);
    }

    #[test]
    fn single_coordinate_difference() {
        let m = ShiftMetric::default();
        let x = BasePoint::fixed(0.0);
        let y = BasePoint::new(vec![PI], vec![0.0]).unwrap();
        let d = m.distance(&x, &y, 8).unwrap();
        assert!((d.lower - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alternating_tail_geometric_sum() {
        // hand sum: (1/2)(θ + θ³ + θ⁵ + θ⁷) with θ = 1/2
        let expected = 0.5 * (0.5 + 0.125 + 0.03125 + 0.0078125);
        assert_eq!(expected, 0.33203125);
        let m = ShiftMetric::default();
        let x = BasePoint::fixed(0.0);
        let y = BasePoint::periodic(vec![0.0, PI]).unwrap();
        let d = m.distance(&x, &y, 8).unwrap();
        assert!((d.lower - expected).abs() < 1e-15);
        assert!(d.upper - d.lower <= 0.5 * 0.5f64.powi(8) / 0.5 + 1e-15);
    }

    fn point() -> impl Strategy<Value = BasePoint> {
        (proptest::collection::vec(-10.0..10.0f64, 0..4), proptest::collection::vec(-10.0..10.0f64, 1..4))
            .prop_map(|(h, t)| BasePoint::new(h, t).unwrap())
    }

    proptest! {
        #[test]
        fn symmetric_and_triangular(x in point(), y in point(), z in point(), theta in 0.05..0.95f64) {
            let m = ShiftMetric::new(theta).unwrap();
            let d = |a: &BasePoint, b: &BasePoint| m.distance(a, b, 40).unwrap();
            prop_assert_eq!(d(&x, &y).lower, d(&y, &x).lower);
            // lower bounds of the partial sums obey the triangle inequality termwise
            prop_assert!(d(&x, &z).lower <= d(&x, &y).lower + d(&y, &z).lower + 1e-12);
            prop_assert!(d(&x, &y).upper <= 0.5 / (1.0 - theta) + 1e-12);
        }
    }
}
