//! Holmes–Thompson volume: symplectic volume of the unit co-disc bundle
//! {H ≤ 1} divided by the Euclidean unit-ball volume ε₂ = π, computed as a
//! base × fiber double quadrature, plus Brunn–Minkowski comparison between a
//! metric and its symmetrization.
//!
//! The chart integrand ∬_{H≤1} dp dx is used directly: the symplectic measure
//! is coordinate-invariant, so no metric factor appears and the two sphere
//! charts patch through a smooth partition of unity.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{Atlas, ChartId, ChartPoint, Metric, Region};
use crate::norms::{FiberCovector, TrigPoly, TAU};
use crate::util::{gauss_legendre, pairwise_sum, smoothstep};

pub const EUCLIDEAN_BALL_CONSTANT: f64 = std::f64::consts::PI;

/// Relative gap below which two Holmes–Thompson volumes count as equal.
pub const BM_EQUAL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureDescriptor {
    pub grid: String,
    pub n_base: usize,
    pub n_fiber: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FiberAreaNode {
    pub chart: ChartId,
    pub x: [f64; 2],
    /// Total quadrature weight (Gauss–Legendre × partition of unity).
    pub weight: f64,
    pub area: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PerFiberStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport {
    pub ht_volume: f64,
    pub euclidean_ball_constant: f64,
    pub error_estimate: f64,
    pub quadrature: QuadratureDescriptor,
    pub per_fiber_stats: PerFiberStats,
    pub fiber_area_field: Vec<FiberAreaNode>,
}

/// Area of the unit co-disc {p : H_x(p) ≤ 1} by the radial formula
/// ½∮ H_x(u(θ))⁻² dθ on an `n`-point angular grid.
pub fn fiber_dual_area(metric: &Metric, x: &ChartPoint, n: usize) -> Result<f64> {
    if n < 256 {
        return Err(Error::Config(format!(
            "fiber quadrature needs at least 256 angles, got {n}"
        )));
    }
    if metric.has_closed_form_dual(x)? {
        let dtheta = TAU / n as f64;
        let mut sum = 0.0;
        for k in 0..n {
            let h = metric.dual(x, FiberCovector::from_angle(k as f64 * dtheta))?;
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Numerical(format!(
                    "dual norm H = {h} on the unit circle at ({}, {})",
                    x.x[0], x.x[1]
                )));
            }
            sum += 1.0 / (h * h);
        }
        Ok(0.5 * dtheta * sum)
    } else {
        // Generic kinds: sample the fiber norm once, interpolate, and take the
        // dual gauge of the interpolant in a single monotone sweep.
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let u = crate::norms::FiberVector::from_angle(TAU * k as f64 / n as f64);
            let f = metric.eval(x, u)?;
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::Numerical(format!(
                    "fiber norm F = {f} on the unit circle at ({}, {})",
                    x.x[0], x.x[1]
                )));
            }
            samples.push(f);
        }
        let poly = TrigPoly::interpolate(&samples);
        let gauges = poly.polar_sweep(n);
        let dtheta = TAU / n as f64;
        let mut sum = 0.0;
        for g in gauges {
            sum += 1.0 / (g * g);
        }
        Ok(0.5 * dtheta * sum)
    }
}

/// Partition-of-unity weight for one sphere chart at chart radius `r`.
/// The bumps fade between radius 1.0 and 1.5 and are normalized so that the
/// two charts' weights sum to exactly one at matched points.
pub(crate) fn sphere_partition_weight(r: f64) -> f64 {
    let bump = |rr: f64| 1.0 - smoothstep((rr - 1.0) / 0.5);
    let here = bump(r);
    if here == 0.0 {
        return 0.0;
    }
    let other = bump(if r == 0.0 { f64::INFINITY } else { 1.0 / r });
    here / (here + other)
}

struct BaseNode {
    chart: ChartId,
    x: [f64; 2],
    weight: f64,
}

fn rect_nodes(lo: [f64; 2], hi: [f64; 2], n: usize) -> Vec<BaseNode> {
    let (x1, w1) = gauss_legendre(n, lo[0], hi[0]);
    let (x2, w2) = gauss_legendre(n, lo[1], hi[1]);
    let mut nodes = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            nodes.push(BaseNode {
                chart: ChartId::Plane,
                x: [x1[i], x2[j]],
                weight: w1[i] * w2[j],
            });
        }
    }
    nodes
}

fn sphere_nodes(n: usize) -> Vec<BaseNode> {
    let (xs, ws) = gauss_legendre(n, -1.5, 1.5);
    let mut nodes = Vec::with_capacity(2 * n * n);
    for &chart in &[ChartId::North, ChartId::South] {
        for i in 0..n {
            for j in 0..n {
                let x = [xs[i], xs[j]];
                let w = sphere_partition_weight(x[0].hypot(x[1]));
                if w > 0.0 {
                    nodes.push(BaseNode {
                        chart,
                        x,
                        weight: ws[i] * ws[j] * w,
                    });
                }
            }
        }
    }
    nodes
}

fn region_nodes(metric: &Metric, region: &Region, n_base: usize) -> Result<Vec<BaseNode>> {
    match region {
        Region::Sphere => {
            if metric.atlas() != Atlas::SphereTwoCharts {
                return Err(Error::Config(
                    "sphere region requires the two-chart atlas".into(),
                ));
            }
            Ok(sphere_nodes(n_base))
        }
        Region::Rect { lo, hi } => {
            if metric.atlas() != Atlas::Plane {
                return Err(Error::Config(
                    "rectangular regions require the planar atlas".into(),
                ));
            }
            if let Some(domain) = metric.domain() {
                // The Funk integrand blows up at the boundary: insist on a
                // compact inset (margin ≥ 0.05 of the domain scale).
                for k in 0..=64 {
                    let t = k as f64 / 64.0;
                    let edges = [
                        [lo[0] + t * (hi[0] - lo[0]), lo[1]],
                        [lo[0] + t * (hi[0] - lo[0]), hi[1]],
                        [lo[0], lo[1] + t * (hi[1] - lo[1])],
                        [hi[0], lo[1] + t * (hi[1] - lo[1])],
                    ];
                    for q in edges {
                        let gauge = domain.gauge(q);
                        if gauge > 0.95 {
                            return Err(Error::Domain(format!(
                                "region touches the Funk boundary (gauge {gauge:.4} at ({}, {})); inset the region",
                                q[0], q[1]
                            )));
                        }
                    }
                }
            }
            Ok(rect_nodes(*lo, *hi, n_base))
        }
    }
}

fn quadrature_label(region: &Region) -> String {
    match region {
        Region::Sphere => "two-chart Gauss-Legendre with smooth partition of unity".into(),
        Region::Rect { .. } => "tensor Gauss-Legendre".into(),
    }
}

fn integrate_areas(metric: &Metric, nodes: &[BaseNode], n_fiber: usize) -> Result<Vec<f64>> {
    nodes
        .par_iter()
        .map(|node| {
            fiber_dual_area(
                metric,
                &ChartPoint {
                    chart: node.chart,
                    x: node.x,
                },
                n_fiber,
            )
        })
        .collect()
}

fn ht_from(nodes: &[BaseNode], areas: &[f64]) -> f64 {
    let weighted: Vec<f64> = nodes
        .iter()
        .zip(areas)
        .map(|(n, &a)| n.weight * a)
        .collect();
    pairwise_sum(&weighted) / EUCLIDEAN_BALL_CONSTANT
}

/// Holmes–Thompson volume over a region, with a Richardson error estimate
/// from the half-resolution grid.
pub fn ht_volume(
    metric: &Metric,
    region: &Region,
    n_base: usize,
    n_fiber: usize,
) -> Result<VolumeReport> {
    if n_base < 8 {
        return Err(Error::Config("n_base must be at least 8".into()));
    }
    let nodes = region_nodes(metric, region, n_base)?;
    let areas = integrate_areas(metric, &nodes, n_fiber)?;
    let ht = ht_from(&nodes, &areas);

    let half_nodes = region_nodes(metric, region, (n_base / 2).max(8))?;
    let half_fiber = (n_fiber / 2).max(256);
    let half_areas = integrate_areas(metric, &half_nodes, half_fiber)?;
    let ht_half = ht_from(&half_nodes, &half_areas);
    let error_estimate = (ht - ht_half).abs().max(1e-15 * ht.abs());

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &a in &areas {
        min = min.min(a);
        max = max.max(a);
        sum += a;
    }
    let field: Vec<FiberAreaNode> = nodes
        .iter()
        .zip(&areas)
        .map(|(n, &area)| FiberAreaNode {
            chart: n.chart,
            x: n.x,
            weight: n.weight,
            area,
        })
        .collect();
    Ok(VolumeReport {
        ht_volume: ht,
        euclidean_ball_constant: EUCLIDEAN_BALL_CONSTANT,
        error_estimate,
        quadrature: QuadratureDescriptor {
            grid: quadrature_label(region),
            n_base,
            n_fiber,
        },
        per_fiber_stats: PerFiberStats {
            min,
            max,
            mean: sum / areas.len() as f64,
        },
        fiber_area_field: field,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BmVerdict {
    Equal,
    Strict,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeficitNode {
    pub chart: ChartId,
    pub x: [f64; 2],
    pub area: f64,
    pub area_sym: f64,
}

/// Brunn–Minkowski comparison between a metric and its symmetrization.
#[derive(Clone, Debug, Serialize)]
pub struct BmReport {
    pub vol: f64,
    pub vol_sym: f64,
    /// (vol_sym − vol) / vol_sym.
    pub rel_gap: f64,
    pub verdict: BmVerdict,
    pub equal_tol: f64,
    pub error_estimate: f64,
    pub quadrature: QuadratureDescriptor,
    pub deficit_min: f64,
    pub deficit_max: f64,
    pub deficit_field: Vec<DeficitNode>,
}

/// Compare HT volumes of L and its symmetrization L̄ on shared quadrature
/// nodes. EQUAL if the relative gap is ≤ 1e-6, STRICT if the gap exceeds 10×
/// the quadrature error estimate, INCONCLUSIVE otherwise.
pub fn bm_compare(
    metric: &Metric,
    region: &Region,
    n_base: usize,
    n_fiber: usize,
) -> Result<BmReport> {
    let sym = metric.symmetrized();
    let nodes = region_nodes(metric, region, n_base)?;
    let areas = integrate_areas(metric, &nodes, n_fiber)?;
    let areas_sym = integrate_areas(&sym, &nodes, n_fiber)?;
    let vol = ht_from(&nodes, &areas);
    let vol_sym = ht_from(&nodes, &areas_sym);

    let half_nodes = region_nodes(metric, region, (n_base / 2).max(8))?;
    let half_fiber = (n_fiber / 2).max(256);
    let vol_h = ht_from(&half_nodes, &integrate_areas(metric, &half_nodes, half_fiber)?);
    let vol_sym_h = ht_from(&half_nodes, &integrate_areas(&sym, &half_nodes, half_fiber)?);
    let error_estimate = (vol - vol_h)
        .abs()
        .max((vol_sym - vol_sym_h).abs())
        .max(1e-15 * vol_sym.abs());

    let rel_gap = (vol_sym - vol) / vol_sym;
    let verdict = if rel_gap.abs() <= BM_EQUAL_TOL {
        BmVerdict::Equal
    } else if vol_sym - vol > 10.0 * error_estimate {
        BmVerdict::Strict
    } else {
        BmVerdict::Inconclusive
    };

    let mut deficit_min = f64::INFINITY;
    let mut deficit_max = f64::NEG_INFINITY;
    let field: Vec<DeficitNode> = nodes
        .iter()
        .zip(areas.iter().zip(&areas_sym))
        .map(|(n, (&a, &s))| {
            deficit_min = deficit_min.min(s - a);
            deficit_max = deficit_max.max(s - a);
            DeficitNode {
                chart: n.chart,
                x: n.x,
                area: a,
                area_sym: s,
            }
        })
        .collect();

    Ok(BmReport {
        vol,
        vol_sym,
        rel_gap,
        verdict,
        equal_tol: BM_EQUAL_TOL,
        error_estimate,
        quadrature: QuadratureDescriptor {
            grid: quadrature_label(region),
            n_base,
            n_fiber,
        },
        deficit_min,
        deficit_max,
        deficit_field: field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::parse_spec;
    use std::f64::consts::PI;

    #[test]
    fn partition_of_unity_sums_to_one() {
        for &r in &[0.0, 0.3, 0.9, 1.0, 1.1, 1.3, 1.49, 1.5, 2.0] {
            let w = sphere_partition_weight(r);
            let w_other = sphere_partition_weight(if r == 0.0 { f64::INFINITY } else { 1.0 / r });
            assert!(
                (w + w_other - 1.0).abs() < 1e-14,
                "r = {r}: {w} + {w_other}"
            );
        }
        assert_eq!(sphere_partition_weight(1.6), 0.0);
        assert_eq!(sphere_partition_weight(0.5), 1.0);
    }

    #[test]
    fn euclidean_fiber_area_is_pi() {
        let m = Metric::euclidean();
        let a = fiber_dual_area(&m, &ChartPoint::plane(0.3, 0.4), 256).unwrap();
        assert!((a - PI).abs() < 1e-12);
        assert!(fiber_dual_area(&m, &ChartPoint::plane(0.0, 0.0), 128).is_err());
    }

    #[test]
    fn round_sphere_fiber_area_at_origin() {
        // F = 2|v| at the chart origin ⇒ D* is the radius-2 disc: area 4π,
        // via both the radial route and the support-body route.
        let m = Metric::sphere_round();
        let x = ChartPoint::north(0.0, 0.0);
        let radial = fiber_dual_area(&m, &x, 512).unwrap();
        assert!((radial - 4.0 * PI).abs() < 1e-10, "radial {radial}");
        let body = crate::norms::support_body_of(&m.fiber_norm(&x), 512).unwrap();
        let support_route = crate::norms::body_area(&body).unwrap();
        assert!((radial - support_route).abs() < 1e-6 * radial);
    }

    #[test]
    fn randers_fiber_area_is_translation_invariant() {
        let m = parse_spec("[metric] kind=randers; a=conformal(1); b=covector(0.5, 0)").unwrap();
        let a = fiber_dual_area(&m, &ChartPoint::plane(0.2, 0.2), 512).unwrap();
        assert!((a - PI).abs() < 1e-9, "area {a}");
    }

    #[test]
    fn euclidean_unit_square_volume_is_one() {
        let m = Metric::euclidean();
        let report = ht_volume(&m, &Region::unit_square(), 16, 256).unwrap();
        assert!(
            (report.ht_volume - 1.0).abs() < 1e-9,
            "ht {}",
            report.ht_volume
        );
        // Bookkeeping identity: ht·π equals the base quadrature of the field.
        let total: f64 = report
            .fiber_area_field
            .iter()
            .map(|n| n.weight * n.area)
            .sum();
        assert!((report.ht_volume * PI - total).abs() <= 1e-12 * total.abs());
    }

    #[test]
    fn round_sphere_volume_is_4pi() {
        let m = Metric::sphere_round();
        let report = ht_volume(&m, &Region::Sphere, 48, 256).unwrap();
        let rel = (report.ht_volume - 4.0 * PI).abs() / (4.0 * PI);
        assert!(rel < 1e-3, "ht {} rel {rel}", report.ht_volume);
    }

    #[test]
    fn bm_strict_for_cos3_minkowski() {
        let m = parse_spec(
            "[metric] kind=minkowski; h = 1 + 0.1*cos(3*t)\n[region] rect = 0,0,1,1",
        )
        .unwrap();
        let report = bm_compare(&m, &Region::unit_square(), 12, 512).unwrap();
        assert_eq!(report.verdict, BmVerdict::Strict, "{report:?}");
        assert!((report.vol - 0.96).abs() < 1e-6, "vol {}", report.vol);
        assert!((report.vol_sym - 1.0).abs() < 1e-6, "sym {}", report.vol_sym);
    }

    #[test]
    fn bm_equal_for_randers_and_euclidean() {
        let m = parse_spec("[metric] kind=randers; a=conformal(1); b=covector(0.4, 0.2)").unwrap();
        let report = bm_compare(&m, &Region::unit_square(), 12, 512).unwrap();
        assert_eq!(report.verdict, BmVerdict::Equal, "{report:?}");
        let e = bm_compare(&Metric::euclidean(), &Region::unit_square(), 12, 512).unwrap();
        assert_eq!(e.verdict, BmVerdict::Equal);
        assert!(e.rel_gap.abs() < 1e-12);
    }

    #[test]
    fn funk_region_must_be_inset() {
        let m = parse_spec("[metric] kind=funk\n[domain] support = 1\n[region] rect = -0.99, -0.1, 0.99, 0.1\n").unwrap();
        match ht_volume(&m, &m.region(), 12, 256) {
            Err(Error::Domain(msg)) => assert!(msg.contains("inset"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
