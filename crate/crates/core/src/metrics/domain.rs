//! Convex domains for Funk and Hilbert metrics.
//!
//! A domain is stored through the support function of its boundary body. The
//! gauge (Minkowski functional with respect to the origin) is precomputed as
//! the support function of the polar body, so membership and ray queries cost
//! one trigonometric evaluation.

use serde::Serialize;

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::norms::{FiberVector, SupportBody, TrigPoly, TAU};

/// Funk evaluations refuse base points with gauge above this value.
pub const INTERIOR_GAUGE_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Clone, Debug)]
pub struct ConvexDomain {
    support: TrigPoly,
    polar: TrigPoly,
    basepoint: [f64; 2],
    profile_src: String,
    n_samples: usize,
}

/// Summary facts about a parsed domain, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct DomainInfo {
    pub profile: String,
    pub samples: usize,
    pub basepoint: [f64; 2],
    pub basepoint_margin: f64,
    pub min_support: f64,
    pub convexity_margin: f64,
}

impl ConvexDomain {
    /// Build from an angular support profile h(t), sampled on `n` angles.
    pub fn from_profile(profile: &Expr, src: &str, n: usize, basepoint: [f64; 2]) -> Result<Self> {
        if n < 64 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "domain support grid must be even and ≥ 64, got {n}"
            )));
        }
        let samples: Vec<f64> = (0..n)
            .map(|k| profile.eval(0.0, 0.0, TAU * k as f64 / n as f64))
            .collect();
        // Positivity via the SupportBody checks.
        let body = SupportBody::new(samples).map_err(|e| {
            Error::Config(format!("domain support profile '{src}' rejected: {e}"))
        })?;
        let support = body.interpolant();
        let polar = support.polar(2 * n);
        let domain = Self {
            support,
            polar,
            basepoint,
            profile_src: src.to_string(),
            n_samples: n,
        };
        let margin = 1.0 - domain.gauge(basepoint);
        if margin <= 0.0 {
            return Err(Error::Config(format!(
                "domain basepoint ({}, {}) is not strictly interior (margin {margin:.3e})",
                basepoint[0], basepoint[1]
            )));
        }
        Ok(domain)
    }

    pub fn unit_disc() -> Self {
        Self {
            support: TrigPoly::constant(1.0),
            polar: TrigPoly::constant(1.0),
            basepoint: [0.0, 0.0],
            profile_src: "1".to_string(),
            n_samples: 64,
        }
    }

    pub fn basepoint(&self) -> [f64; 2] {
        self.basepoint
    }

    /// Support function value at angle `theta` (1-homogeneous in |q| form).
    pub fn support(&self, theta: f64) -> f64 {
        self.support.eval(theta)
    }

    /// Support function with derivative, for the Funk Hamiltonian gradient.
    pub fn support_with_deriv(&self, theta: f64) -> (f64, f64) {
        let (h, dh, _) = self.support.eval_all(theta);
        (h, dh)
    }

    /// Gauge of the domain at q: < 1 inside, 1 on the boundary.
    pub fn gauge(&self, q: [f64; 2]) -> f64 {
        let r = q[0].hypot(q[1]);
        if r == 0.0 {
            return 0.0;
        }
        r * self.polar.eval(q[1].atan2(q[0]))
    }

    /// Boundary point in direction `psi` from the origin.
    pub fn boundary_point(&self, psi: f64) -> [f64; 2] {
        let g = self.polar.eval(psi);
        [psi.cos() / g, psi.sin() / g]
    }

    pub fn contains(&self, q: [f64; 2], margin: f64) -> bool {
        self.gauge(q) <= 1.0 - margin
    }

    pub fn info(&self) -> DomainInfo {
        let n = self.n_samples;
        let mut min_support = f64::INFINITY;
        let mut convexity = f64::INFINITY;
        for k in 0..n {
            let theta = TAU * k as f64 / n as f64;
            let (h, _, ddh) = self.support.eval_all(theta);
            min_support = min_support.min(h);
            convexity = convexity.min(h + ddh);
        }
        DomainInfo {
            profile: self.profile_src.clone(),
            samples: n,
            basepoint: self.basepoint,
            basepoint_margin: 1.0 - self.gauge(self.basepoint),
            min_support,
            convexity_margin: convexity,
        }
    }
}

/// Funk metric value: F(x, v) = 1/s where s > 0 solves gauge(x + s·v) = 1,
/// by bisection with a geometrically grown bracket.
pub fn funk_eval(domain: &ConvexDomain, x: [f64; 2], v: FiberVector) -> Result<f64> {
    if v.is_zero() || !v.is_finite() {
        return Err(Error::Domain("Funk metric undefined for v = 0".into()));
    }
    let g0 = domain.gauge(x);
    if g0 >= INTERIOR_GAUGE_LIMIT {
        return Err(Error::Domain(format!(
            "point ({}, {}) is not strictly inside the domain (gauge {g0:.12})",
            x[0], x[1]
        )));
    }
    let ray = |s: f64| domain.gauge([x[0] + s * v.v1, x[1] + s * v.v2]);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while ray(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical(
                "Funk bracket growth failed; domain may be unbounded".into(),
            ));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = ray(s);
        if (g - 1.0).abs() <= 1e-12 {
            break;
        }
        if g < 1.0 {
            lo = s;
        } else {
            hi = s;
        }
        s = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(1.0 / s)
}

/// Hilbert metric: the symmetrization of the Funk metric.
pub fn hilbert_eval(domain: &ConvexDomain, x: [f64; 2], v: FiberVector) -> Result<f64> {
    Ok(0.5 * (funk_eval(domain, x, v)? + funk_eval(domain, x, -v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn funk_on_unit_disc() {
        let disc = ConvexDomain::unit_disc();
        let f = funk_eval(&disc, [0.0, 0.0], FiberVector::new(1.0, 0.0)).unwrap();
        assert!((f - 1.0).abs() < 1e-11);
        let f = funk_eval(&disc, [0.5, 0.0], FiberVector::new(1.0, 0.0)).unwrap();
        assert!((f - 2.0).abs() < 1e-11);
        let b = funk_eval(&disc, [0.5, 0.0], FiberVector::new(-1.0, 0.0)).unwrap();
        assert!((b - 2.0 / 3.0).abs() < 1e-11);
        // Non-reversibility is the point.
        assert!((f - b).abs() > 0.1);
    }

    #[test]
    fn hilbert_is_symmetric_and_averages_funk() {
        let disc = ConvexDomain::unit_disc();
        let x = [0.5, 0.0];
        let v = FiberVector::new(1.0, 0.0);
        let h = hilbert_eval(&disc, x, v).unwrap();
        assert!((h - 4.0 / 3.0).abs() < 1e-11);
        assert_eq!(
            hilbert_eval(&disc, x, v).unwrap(),
            hilbert_eval(&disc, x, -v).unwrap()
        );
        // At the center the Hilbert norm is Euclidean.
        let h0 = hilbert_eval(&disc, [0.0, 0.0], FiberVector::new(0.6, 0.8)).unwrap();
        assert!((h0 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn funk_rejects_exterior_points_and_zero_vectors() {
        let disc = ConvexDomain::unit_disc();
        assert!(funk_eval(&disc, [1.0, 0.0], FiberVector::new(1.0, 0.0)).is_err());
        assert!(funk_eval(&disc, [1.5, 0.0], FiberVector::new(1.0, 0.0)).is_err());
        assert!(funk_eval(&disc, [0.0, 0.0], FiberVector::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn funk_indicatrix_is_the_translated_domain() {
        // F(x, y - x) = 1 for boundary points y.
        let src = "1 + 0.15*cos(t) + 0.05*cos(3*t)";
        let expr = crate::metrics::expr::parse_expr(src).unwrap();
        let dom = ConvexDomain::from_profile(&expr, src, 512, [0.0, 0.0]).unwrap();
        for k in 0..100 {
            let x = [
                0.4 * crate::util::halton(k, 2) - 0.2,
                0.4 * crate::util::halton(k, 3) - 0.2,
            ];
            let psi = TAU * crate::util::halton(k, 5);
            let y = dom.boundary_point(psi);
            let v = FiberVector::new(y[0] - x[0], y[1] - x[1]);
            let f = funk_eval(&dom, x, v).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "k={k}: F = {f}");
        }
    }
}
