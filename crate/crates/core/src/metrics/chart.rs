//! Chart atlas: a single planar chart, or two stereographic charts on S²
//! glued by the inversion x ↦ x/|x|².

use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::{FiberCovector, FiberVector};

/// Radius at which the geodesic integrator hops to the other chart.
pub const SWITCH_RADIUS: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChartId {
    North,
    South,
    Plane,
}

impl ChartId {
    pub fn other(self) -> ChartId {
        match self {
            ChartId::North => ChartId::South,
            ChartId::South => ChartId::North,
            ChartId::Plane => ChartId::Plane,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChartId::North => "north",
            ChartId::South => "south",
            ChartId::Plane => "plane",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChartPoint {
    pub chart: ChartId,
    pub x: [f64; 2],
}

impl ChartPoint {
    pub fn plane(x1: f64, x2: f64) -> Self {
        Self {
            chart: ChartId::Plane,
            x: [x1, x2],
        }
    }

    pub fn north(x1: f64, x2: f64) -> Self {
        Self {
            chart: ChartId::North,
            x: [x1, x2],
        }
    }

    pub fn south(x1: f64, x2: f64) -> Self {
        Self {
            chart: ChartId::South,
            x: [x1, x2],
        }
    }

    pub fn radius(&self) -> f64 {
        self.x[0].hypot(self.x[1])
    }

    pub fn is_sphere_chart(&self) -> bool {
        matches!(self.chart, ChartId::North | ChartId::South)
    }

    /// Embedding into R³: the unit sphere for the two-chart atlas (north chart
    /// origin at the north pole), the z = 0 plane otherwise.
    pub fn embed(&self) -> [f64; 3] {
        match self.chart {
            ChartId::Plane => [self.x[0], self.x[1], 0.0],
            ChartId::North | ChartId::South => {
                let r2 = self.x[0] * self.x[0] + self.x[1] * self.x[1];
                let d = 1.0 + r2;
                let z = (1.0 - r2) / d;
                [
                    2.0 * self.x[0] / d,
                    2.0 * self.x[1] / d,
                    if self.chart == ChartId::North { z } else { -z },
                ]
            }
        }
    }

    /// Pushforward of a chart tangent vector into R³ alongside `embed`.
    pub fn embed_tangent(&self, v: FiberVector) -> [f64; 3] {
        match self.chart {
            ChartId::Plane => [v.v1, v.v2, 0.0],
            ChartId::North | ChartId::South => {
                let r2 = self.x[0] * self.x[0] + self.x[1] * self.x[1];
                let d = 1.0 + r2;
                let xv = self.x[0] * v.v1 + self.x[1] * v.v2;
                let dx = [
                    2.0 * (v.v1 * d - 2.0 * self.x[0] * xv) / (d * d),
                    2.0 * (v.v2 * d - 2.0 * self.x[1] * xv) / (d * d),
                ];
                let dz = -4.0 * xv / (d * d);
                [
                    dx[0],
                    dx[1],
                    if self.chart == ChartId::North { dz } else { -dz },
                ]
            }
        }
    }
}

/// Jacobian of the transition y = x/|x|²: J = (I − 2x̂x̂ᵀ)/|x|² (symmetric).
fn transition_jacobian(x: [f64; 2]) -> [[f64; 2]; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let j11 = (1.0 - 2.0 * x[0] * x[0] / r2) / r2;
    let j22 = (1.0 - 2.0 * x[1] * x[1] / r2) / r2;
    let j12 = -2.0 * x[0] * x[1] / (r2 * r2);
    [[j11, j12], [j12, j22]]
}

/// Transition a sphere chart point to the other chart.
pub fn chart_transition(point: &ChartPoint) -> Result<ChartPoint> {
    if point.chart == ChartId::Plane {
        return Err(Error::Config(
            "chart transition only applies to the sphere atlas".into(),
        ));
    }
    let r2 = point.x[0] * point.x[0] + point.x[1] * point.x[1];
    if r2 == 0.0 {
        return Err(Error::Domain(
            "chart transition undefined at the chart origin".into(),
        ));
    }
    Ok(ChartPoint {
        chart: point.chart.other(),
        x: [point.x[0] / r2, point.x[1] / r2],
    })
}

/// Pushforward of a tangent vector under the transition at `x`.
pub fn push_vector(x: [f64; 2], v: FiberVector) -> FiberVector {
    let j = transition_jacobian(x);
    FiberVector::new(j[0][0] * v.v1 + j[0][1] * v.v2, j[1][0] * v.v1 + j[1][1] * v.v2)
}

/// Pushforward of a covector: p ↦ J⁻ᵀ p = |x|²(I − 2x̂x̂ᵀ)p.
pub fn push_covector(x: [f64; 2], p: FiberCovector) -> FiberCovector {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let xp = x[0] * p.p1 + x[1] * p.p2;
    FiberCovector::new(
        r2 * p.p1 - 2.0 * x[0] * xp,
        r2 * p.p2 - 2.0 * x[1] * xp,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_fixes_equator_and_inverts_radius() {
        let p = chart_transition(&ChartPoint::north(1.0, 0.0)).unwrap();
        assert_eq!(p.chart, ChartId::South);
        assert!((p.x[0] - 1.0).abs() < 1e-15 && p.x[1].abs() < 1e-15);
        let q = chart_transition(&ChartPoint::north(2.0, 0.0)).unwrap();
        assert!((q.x[0] - 0.5).abs() < 1e-15);
        assert!(chart_transition(&ChartPoint::north(0.0, 0.0)).is_err());
        assert!(chart_transition(&ChartPoint::plane(1.0, 1.0)).is_err());
    }

    #[test]
    fn transition_is_an_involution() {
        let p0 = ChartPoint::north(0.3, -1.7);
        let p1 = chart_transition(&p0).unwrap();
        let p2 = chart_transition(&p1).unwrap();
        assert_eq!(p2.chart, ChartId::North);
        assert!((p2.x[0] - p0.x[0]).abs() < 1e-15);
        assert!((p2.x[1] - p0.x[1]).abs() < 1e-15);
    }

    #[test]
    fn pairing_is_preserved_under_pushforward() {
        let x = [1.2, -0.4];
        let v = FiberVector::new(0.3, 0.9);
        let p = FiberCovector::new(-1.1, 0.7);
        let before = p.pair(v);
        let after = push_covector(x, p).pair(push_vector(x, v));
        assert!((before - after).abs() < 1e-13);
    }

    #[test]
    fn embeddings_agree_across_the_transition() {
        let p0 = ChartPoint::north(1.3, 0.4);
        let p1 = chart_transition(&p0).unwrap();
        let e0 = p0.embed();
        let e1 = p1.embed();
        for i in 0..3 {
            assert!((e0[i] - e1[i]).abs() < 1e-14);
        }
        let v = FiberVector::new(0.2, -0.5);
        let t0 = p0.embed_tangent(v);
        let t1 = p1.embed_tangent(push_vector(p0.x, v));
        for i in 0..3 {
            assert!((t0[i] - t1[i]).abs() < 1e-13, "component {i}");
        }
    }

    #[test]
    fn embedded_points_lie_on_the_unit_sphere() {
        for &(a, b) in &[(0.0, 0.0), (1.0, 0.0), (0.7, -2.3)] {
            let e = ChartPoint::north(a, b).embed();
            let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }
}
