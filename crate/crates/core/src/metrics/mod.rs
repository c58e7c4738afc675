//! The metric catalog: a Finsler metric is a field of asymmetric norms over a
//! chart atlas. Every kind provides pointwise evaluation F(x, v) and its
//! Legendre-dual Hamiltonian H(x, p); closed forms are used wherever the kind
//! admits one, with a generic support-scan dual as the fallback.

pub mod chart;
pub mod domain;
pub mod expr;
pub mod fields;
pub mod parse;

use std::sync::Arc;

use serde::Serialize;

pub use chart::{chart_transition, push_covector, push_vector, ChartId, ChartPoint, SWITCH_RADIUS};
pub use domain::{funk_eval, hilbert_eval, ConvexDomain, DomainInfo};
pub use fields::{MatrixField, OneFormSpec, ScalarField, SymMat2};
pub use parse::parse_spec;

use crate::error::{Error, Result};
use crate::norms::{
    check_norm_validity, AsymNorm, FiberCovector, FiberVector, TrigPoly, ValidityReport, TAU,
};
use crate::util::halton;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Atlas {
    Plane,
    SphereTwoCharts,
}

/// Base region for volume quadrature and sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Region {
    Sphere,
    Rect { lo: [f64; 2], hi: [f64; 2] },
}

impl Region {
    pub fn unit_square() -> Self {
        Region::Rect {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    Euclidean,
    Minkowski {
        support: TrigPoly,
        polar: TrigPoly,
        profile_src: String,
    },
    Riemannian {
        a: MatrixField,
    },
    Randers {
        a: MatrixField,
        b: OneFormSpec,
    },
    Funk {
        domain: ConvexDomain,
    },
    Hilbert {
        domain: ConvexDomain,
    },
    SphereRound,
    PlusOneForm {
        base: Box<Kind>,
        beta: OneFormSpec,
    },
}

pub(crate) struct DualGrads {
    pub h: f64,
    /// ∂H/∂p, a fiber vector (the velocity on the unit co-sphere bundle).
    pub dp: FiberVector,
    /// ∂H/∂x, base components.
    pub dx: [f64; 2],
}

fn round_factor(x: [f64; 2]) -> f64 {
    2.0 / (1.0 + x[0] * x[0] + x[1] * x[1])
}

/// Positive root of t²σ + 2t(pᵀAb) − pᵀAp = 0: the gauge of the ellipse
/// {qᵀAq ≤ 1} translated by b, i.e. the dual norm of sqrt(vᵀav) + b·v.
fn randers_dual(a_inv: &SymMat2, b: FiberCovector, p: FiberCovector) -> Result<(f64, f64, f64)> {
    let sigma = 1.0 - a_inv.quad([b.p1, b.p2]);
    if !(sigma > 0.0) {
        return Err(Error::Numerical(format!(
            "one-form exceeds the metric norm (1 - |b|² = {sigma:.3e})"
        )));
    }
    let ab = a_inv.apply([b.p1, b.p2]);
    let m = p.p1 * ab[0] + p.p2 * ab[1];
    let q = a_inv.quad([p.p1, p.p2]);
    let disc = (m * m + sigma * q).sqrt();
    Ok(((disc - m) / sigma, disc, sigma))
}

impl Kind {
    fn eval(&self, x: [f64; 2], v: FiberVector) -> Result<f64> {
        match self {
            Kind::Euclidean => Ok(v.norm()),
            Kind::SphereRound => Ok(round_factor(x) * v.norm()),
            Kind::Minkowski { support, .. } => {
                if v.is_zero() {
                    return Ok(0.0);
                }
                Ok(v.norm() * support.eval(v.angle()))
            }
            Kind::Riemannian { a } => {
                let quad = a.eval(x).quad([v.v1, v.v2]);
                if !(quad >= 0.0) {
                    return Err(Error::Numerical(format!(
                        "metric tensor not positive semidefinite at ({}, {})",
                        x[0], x[1]
                    )));
                }
                Ok(quad.sqrt())
            }
            Kind::Randers { a, b } => {
                let quad = a.eval(x).quad([v.v1, v.v2]);
                if !(quad >= 0.0) {
                    return Err(Error::Numerical(format!(
                        "metric tensor not positive semidefinite at ({}, {})",
                        x[0], x[1]
                    )));
                }
                Ok(quad.sqrt() + b.eval(x).pair(v))
            }
            Kind::Funk { domain } => domain::funk_eval(domain, x, v),
            Kind::Hilbert { domain } => domain::hilbert_eval(domain, x, v),
            Kind::PlusOneForm { base, beta } => {
                Ok(base.eval(x, v)? + beta.eval(x).pair(v))
            }
        }
    }

    /// Inverse metric tensor and total one-form, when the kind is a Randers
    /// metric in disguise (quadratic part plus a linear part).
    fn quadratic_part(&self, x: [f64; 2]) -> Result<Option<(SymMat2, FiberCovector)>> {
        match self {
            Kind::Euclidean => Ok(Some((SymMat2::identity(), FiberCovector::new(0.0, 0.0)))),
            Kind::SphereRound => {
                let c = round_factor(x);
                Ok(Some((
                    SymMat2::scaled_identity(1.0 / (c * c)),
                    FiberCovector::new(0.0, 0.0),
                )))
            }
            Kind::Riemannian { a } => Ok(Some((
                a.eval(x).inverse()?,
                FiberCovector::new(0.0, 0.0),
            ))),
            Kind::Randers { a, b } => Ok(Some((a.eval(x).inverse()?, b.eval(x)))),
            Kind::PlusOneForm { base, beta } => match base.quadratic_part(x)? {
                Some((a_inv, b0)) => Ok(Some((a_inv, b0 + beta.eval(x)))),
                None => Ok(None),
            },
            _ => Ok(None),
        }
    }

    fn dual(&self, x: [f64; 2], p: FiberCovector) -> Result<f64> {
        if p.is_zero() {
            return Ok(0.0);
        }
        match self {
            Kind::Minkowski { polar, .. } => Ok(p.norm() * polar.eval(p.angle())),
            Kind::Funk { domain } => {
                let psi = p.angle();
                Ok(p.norm() * domain.support(psi) - (x[0] * p.p1 + x[1] * p.p2))
            }
            _ => {
                if let Some((a_inv, b)) = self.quadratic_part(x)? {
                    Ok(randers_dual(&a_inv, b, p)?.0)
                } else {
                    let (h, _) = self.sup_dual(x, p)?;
                    Ok(h)
                }
            }
        }
    }

    /// Generic dual by support scan: H = sup_θ p·u(θ)/F(x, u(θ)).
    /// Returns the value and the maximizing angle.
    fn sup_dual(&self, x: [f64; 2], p: FiberCovector) -> Result<(f64, f64)> {
        const GRID: usize = 64;
        let g = |theta: f64| -> Result<f64> {
            let u = FiberVector::from_angle(theta);
            let f = self.eval(x, u)?;
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::Numerical(format!(
                    "fiber norm not positive at ({}, {}), θ = {theta:.4}",
                    x[0], x[1]
                )));
            }
            Ok(p.pair(u) / f)
        };
        let mut best = f64::NEG_INFINITY;
        let mut best_theta = 0.0;
        for k in 0..GRID {
            let theta = TAU * k as f64 / GRID as f64;
            let value = g(theta)?;
            if value > best {
                best = value;
                best_theta = theta;
            }
        }
        let bracket = TAU / GRID as f64;
        let (lo, hi) = (best_theta - bracket, best_theta + bracket);
        let mut theta = best_theta;
        let delta = 1e-5;
        for _ in 0..16 {
            let gp = g(theta + delta)?;
            let gm = g(theta - delta)?;
            let g0 = g(theta)?;
            let d1 = (gp - gm) / (2.0 * delta);
            let d2 = (gp - 2.0 * g0 + gm) / (delta * delta);
            if !(d2 < 0.0) {
                break;
            }
            let mut step = -d1 / d2;
            if !step.is_finite() {
                break;
            }
            if theta + step < lo || theta + step > hi {
                step = step.clamp(-bracket, bracket);
            }
            theta += step;
            if step.abs() < 1e-10 {
                break;
            }
        }
        let refined = g(theta)?;
        if refined >= best {
            Ok((refined, theta))
        } else {
            Ok((best, best_theta))
        }
    }

    fn dual_grads(&self, x: [f64; 2], p: FiberCovector) -> Result<DualGrads> {
        match self {
            Kind::Euclidean => {
                let n = p.norm();
                Ok(DualGrads {
                    h: n,
                    dp: FiberVector::new(p.p1 / n, p.p2 / n),
                    dx: [0.0, 0.0],
                })
            }
            Kind::SphereRound => {
                let n = p.norm();
                let c = round_factor(x);
                Ok(DualGrads {
                    h: n / c,
                    dp: FiberVector::new(p.p1 / (n * c), p.p2 / (n * c)),
                    dx: [n * x[0], n * x[1]],
                })
            }
            Kind::Minkowski { polar, .. } => {
                let psi = p.angle();
                let (g, dg, _) = polar.eval_all(psi);
                let (c, s) = (psi.cos(), psi.sin());
                Ok(DualGrads {
                    h: p.norm() * g,
                    dp: FiberVector::new(g * c - dg * s, g * s + dg * c),
                    dx: [0.0, 0.0],
                })
            }
            Kind::Funk { domain } => {
                let psi = p.angle();
                let (h_sup, dh_sup) = domain.support_with_deriv(psi);
                let (c, s) = (psi.cos(), psi.sin());
                Ok(DualGrads {
                    h: p.norm() * h_sup - (x[0] * p.p1 + x[1] * p.p2),
                    dp: FiberVector::new(h_sup * c - dh_sup * s - x[0], h_sup * s + dh_sup * c - x[1]),
                    dx: [-p.p1, -p.p2],
                })
            }
            _ => {
                if let Some((a_inv, b)) = self.quadratic_part(x)? {
                    let (t, disc, _) = randers_dual(&a_inv, b, p)?;
                    let shifted = [p.p1 - t * b.p1, p.p2 - t * b.p2];
                    let grad = a_inv.apply(shifted);
                    let dp = FiberVector::new(grad[0] / disc, grad[1] / disc);
                    let dx = self.fd_dual_x(x, p)?;
                    Ok(DualGrads { h: t, dp, dx })
                } else {
                    // Envelope theorem at the support-scan maximizer.
                    let (h, theta) = self.sup_dual(x, p)?;
                    let u = FiberVector::from_angle(theta);
                    let f = self.eval(x, u)?;
                    let dp = FiberVector::new(u.v1 / f, u.v2 / f);
                    let step = 1e-6 * (1.0 + x[0].hypot(x[1]));
                    let fx1 = (self.eval([x[0] + step, x[1]], u)?
                        - self.eval([x[0] - step, x[1]], u)?)
                        / (2.0 * step);
                    let fx2 = (self.eval([x[0], x[1] + step], u)?
                        - self.eval([x[0], x[1] - step], u)?)
                        / (2.0 * step);
                    let scale = -h / f;
                    Ok(DualGrads {
                        h,
                        dp,
                        dx: [scale * fx1, scale * fx2],
                    })
                }
            }
        }
    }

    /// Centered-difference base gradient of the dual norm.
    fn fd_dual_x(&self, x: [f64; 2], p: FiberCovector) -> Result<[f64; 2]> {
        let step = 1e-6 * (1.0 + x[0].hypot(x[1]));
        Ok([
            (self.dual([x[0] + step, x[1]], p)? - self.dual([x[0] - step, x[1]], p)?)
                / (2.0 * step),
            (self.dual([x[0], x[1] + step], p)? - self.dual([x[0], x[1] - step], p)?)
                / (2.0 * step),
        ])
    }

    /// Analytic fiber derivative ∂F/∂v where the kind has one.
    fn fiber_grad(&self, x: [f64; 2], v: FiberVector) -> Option<FiberCovector> {
        match self {
            Kind::Euclidean => {
                let n = v.norm();
                Some(FiberCovector::new(v.v1 / n, v.v2 / n))
            }
            Kind::SphereRound => {
                let n = v.norm();
                let c = round_factor(x);
                Some(FiberCovector::new(c * v.v1 / n, c * v.v2 / n))
            }
            Kind::Minkowski { support, .. } => {
                let theta = v.angle();
                let (h, dh, _) = support.eval_all(theta);
                let (c, s) = (theta.cos(), theta.sin());
                Some(FiberCovector::new(h * c - dh * s, h * s + dh * c))
            }
            Kind::Riemannian { a } => {
                let av = a.eval(x).apply([v.v1, v.v2]);
                let alpha = (av[0] * v.v1 + av[1] * v.v2).sqrt();
                Some(FiberCovector::new(av[0] / alpha, av[1] / alpha))
            }
            Kind::Randers { a, b } => {
                let av = a.eval(x).apply([v.v1, v.v2]);
                let alpha = (av[0] * v.v1 + av[1] * v.v2).sqrt();
                let bv = b.eval(x);
                Some(FiberCovector::new(av[0] / alpha + bv.p1, av[1] / alpha + bv.p2))
            }
            Kind::PlusOneForm { base, beta } => {
                let g = base.fiber_grad(x, v)?;
                let bv = beta.eval(x);
                Some(FiberCovector::new(g.p1 + bv.p1, g.p2 + bv.p2))
            }
            Kind::Funk { .. } | Kind::Hilbert { .. } => None,
        }
    }

    /// Fiber restriction with all base-point-dependent data prebaked, so that
    /// per-angle sampling does not re-evaluate coefficient fields.
    fn fiber_eval(&self, x: [f64; 2]) -> Result<FiberEval> {
        Ok(match self {
            Kind::Euclidean => FiberEval::Norm2 {
                a: SymMat2::identity(),
            },
            Kind::SphereRound => {
                let c = round_factor(x);
                FiberEval::Norm2 {
                    a: SymMat2::scaled_identity(c * c),
                }
            }
            Kind::Riemannian { a } => FiberEval::Norm2 { a: a.eval(x) },
            Kind::Randers { a, b } => FiberEval::PlusLinear {
                base: Box::new(FiberEval::Norm2 { a: a.eval(x) }),
                b: b.eval(x),
            },
            Kind::Minkowski { support, .. } => FiberEval::Support {
                poly: support.clone(),
            },
            Kind::Funk { domain } => FiberEval::Funk {
                domain: domain.clone(),
                x,
            },
            Kind::Hilbert { domain } => FiberEval::Hilbert {
                domain: domain.clone(),
                x,
            },
            Kind::PlusOneForm { base, beta } => FiberEval::PlusLinear {
                base: Box::new(base.fiber_eval(x)?),
                b: beta.eval(x),
            },
        })
    }

    fn symmetrized(&self) -> Kind {
        match self {
            Kind::Euclidean => Kind::Euclidean,
            Kind::SphereRound => Kind::SphereRound,
            Kind::Riemannian { a } => Kind::Riemannian { a: a.clone() },
            Kind::Randers { a, .. } => Kind::Riemannian { a: a.clone() },
            Kind::Minkowski {
                support,
                profile_src,
                ..
            } => {
                let n = 512;
                let sym: Vec<f64> = (0..n)
                    .map(|k| {
                        let t = TAU * k as f64 / n as f64;
                        0.5 * (support.eval(t) + support.eval(t + std::f64::consts::PI))
                    })
                    .collect();
                let support = TrigPoly::interpolate(&sym);
                let polar = support.polar(2 * n);
                Kind::Minkowski {
                    support,
                    polar,
                    profile_src: format!("sym({profile_src})"),
                }
            }
            Kind::Funk { domain } => Kind::Hilbert {
                domain: domain.clone(),
            },
            Kind::Hilbert { domain } => Kind::Hilbert {
                domain: domain.clone(),
            },
            Kind::PlusOneForm { base, .. } => base.symmetrized(),
        }
    }

    fn name(&self) -> String {
        match self {
            Kind::Euclidean => "euclidean".into(),
            Kind::SphereRound => "sphere_round".into(),
            Kind::Minkowski { profile_src, .. } => format!("minkowski(h = {profile_src})"),
            Kind::Riemannian { a } => format!("riemannian(a = {})", a.describe()),
            Kind::Randers { a, b } => {
                format!("randers(a = {}, b = {})", a.describe(), b.describe())
            }
            Kind::Funk { domain } => format!("funk(Ω: {})", domain.info().profile),
            Kind::Hilbert { domain } => format!("hilbert(Ω: {})", domain.info().profile),
            Kind::PlusOneForm { base, beta } => {
                format!("{} + {}", base.name(), beta.describe())
            }
        }
    }

    fn domain(&self) -> Option<&ConvexDomain> {
        match self {
            Kind::Funk { domain } | Kind::Hilbert { domain } => Some(domain),
            _ => None,
        }
    }
}

/// Fiber norm with base-point data resolved at construction.
#[derive(Clone, Debug)]
pub(crate) enum FiberEval {
    /// sqrt(vᵀ a v)
    Norm2 { a: SymMat2 },
    /// |v| · h(θ_v)
    Support { poly: TrigPoly },
    Funk { domain: ConvexDomain, x: [f64; 2] },
    Hilbert { domain: ConvexDomain, x: [f64; 2] },
    PlusLinear { base: Box<FiberEval>, b: FiberCovector },
}

impl FiberEval {
    pub(crate) fn eval(&self, v: FiberVector) -> Result<f64> {
        match self {
            FiberEval::Norm2 { a } => {
                let quad = a.quad([v.v1, v.v2]);
                if !(quad >= 0.0) {
                    return Err(Error::Numerical(
                        "metric tensor not positive semidefinite".into(),
                    ));
                }
                Ok(quad.sqrt())
            }
            FiberEval::Support { poly } => {
                if v.is_zero() {
                    return Ok(0.0);
                }
                Ok(v.norm() * poly.eval(v.angle()))
            }
            FiberEval::Funk { domain, x } => domain::funk_eval(domain, *x, v),
            FiberEval::Hilbert { domain, x } => domain::hilbert_eval(domain, *x, v),
            FiberEval::PlusLinear { base, b } => Ok(base.eval(v)? + b.pair(v)),
        }
    }

    fn grad(&self, v: FiberVector) -> Option<FiberCovector> {
        match self {
            FiberEval::Norm2 { a } => {
                let av = a.apply([v.v1, v.v2]);
                let alpha = (av[0] * v.v1 + av[1] * v.v2).sqrt();
                Some(FiberCovector::new(av[0] / alpha, av[1] / alpha))
            }
            FiberEval::Support { poly } => {
                let theta = v.angle();
                let (h, dh, _) = poly.eval_all(theta);
                let (c, s) = (theta.cos(), theta.sin());
                Some(FiberCovector::new(h * c - dh * s, h * s + dh * c))
            }
            FiberEval::PlusLinear { base, b } => {
                let g = base.grad(v)?;
                Some(FiberCovector::new(g.p1 + b.p1, g.p2 + b.p2))
            }
            FiberEval::Funk { .. } | FiberEval::Hilbert { .. } => None,
        }
    }

    fn has_grad(&self) -> bool {
        match self {
            FiberEval::Norm2 { .. } | FiberEval::Support { .. } => true,
            FiberEval::PlusLinear { base, .. } => base.has_grad(),
            FiberEval::Funk { .. } | FiberEval::Hilbert { .. } => false,
        }
    }
}

/// A Finsler metric over an atlas: immutable after construction, cheap to
/// clone and safe to share across threads.
#[derive(Clone, Debug)]
pub struct Metric {
    kind: Arc<Kind>,
    atlas: Atlas,
    antipodal: bool,
    region: Region,
    label: String,
}

impl Metric {
    pub(crate) fn from_kind(kind: Kind, atlas: Atlas, antipodal: bool, region: Region) -> Self {
        let label = kind.name();
        Self {
            kind: Arc::new(kind),
            atlas,
            antipodal,
            region,
            label,
        }
    }

    pub fn euclidean() -> Self {
        Self::from_kind(Kind::Euclidean, Atlas::Plane, false, Region::unit_square())
    }

    pub fn sphere_round() -> Self {
        Self::from_kind(Kind::SphereRound, Atlas::SphereTwoCharts, false, Region::Sphere)
    }

    pub fn atlas(&self) -> Atlas {
        self.atlas
    }

    pub fn antipodal(&self) -> bool {
        self.antipodal
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Option<&ConvexDomain> {
        self.kind.domain()
    }

    fn check_chart(&self, x: &ChartPoint) -> Result<()> {
        let ok = match self.atlas {
            Atlas::Plane => x.chart == ChartId::Plane,
            Atlas::SphereTwoCharts => x.is_sphere_chart(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "chart {} incompatible with the {:?} atlas",
                x.chart.name(),
                self.atlas
            )))
        }
    }

    /// Pointwise metric evaluation F(x, v).
    pub fn eval(&self, x: &ChartPoint, v: FiberVector) -> Result<f64> {
        self.check_chart(x)?;
        if !v.is_finite() {
            return Err(Error::Numerical("non-finite fiber vector".into()));
        }
        self.kind.eval(x.x, v)
    }

    /// Hamiltonian (dual norm) H(x, p).
    pub fn dual(&self, x: &ChartPoint, p: FiberCovector) -> Result<f64> {
        self.check_chart(x)?;
        self.kind.dual(x.x, p)
    }

    pub(crate) fn dual_grads(&self, x: &ChartPoint, p: FiberCovector) -> Result<DualGrads> {
        self.check_chart(x)?;
        self.kind.dual_grads(x.x, p)
    }

    /// Restriction of the metric to the fiber over `x`, as an `AsymNorm` with
    /// base-point data prebaked. Evaluation failures surface as NaN so
    /// validity checks can report them.
    pub fn fiber_norm(&self, x: &ChartPoint) -> AsymNorm {
        let fiber = match self.kind.fiber_eval(x.x) {
            Ok(f) => f,
            Err(_) => return AsymNorm::new(|_| f64::NAN),
        };
        if fiber.has_grad() {
            let fiber_g = fiber.clone();
            AsymNorm::with_grad(
                move |v| fiber.eval(v).unwrap_or(f64::NAN),
                move |v| {
                    fiber_g
                        .grad(v)
                        .unwrap_or(FiberCovector::new(f64::NAN, f64::NAN))
                },
            )
        } else {
            AsymNorm::new(move |v| fiber.eval(v).unwrap_or(f64::NAN))
        }
    }

    /// Prebaked fiber restriction, for grid sweeps.
    pub(crate) fn fiber_eval(&self, x: &ChartPoint) -> Result<FiberEval> {
        self.check_chart(x)?;
        self.kind.fiber_eval(x.x)
    }

    /// Legendre image p = dF_v, analytic when the kind provides it.
    pub fn legendre(&self, x: &ChartPoint, v: FiberVector) -> Result<FiberCovector> {
        self.check_chart(x)?;
        if v.is_zero() {
            return Err(Error::Domain(
                "Legendre transform undefined at the zero vector".into(),
            ));
        }
        if let Some(p) = self.kind.fiber_grad(x.x, v) {
            return Ok(p);
        }
        crate::norms::legendre_point(&self.fiber_norm(x), v)
    }

    /// True when the kind evaluates its dual norm in closed form (quadratic
    /// kinds, Minkowski, Funk); other kinds go through the support scan.
    pub(crate) fn has_closed_form_dual(&self, x: &ChartPoint) -> Result<bool> {
        Ok(match &*self.kind {
            Kind::Minkowski { .. } | Kind::Funk { .. } => true,
            _ => self.kind.quadratic_part(x.x)?.is_some(),
        })
    }

    /// Metric-level symmetrization L̄ = (L + L∘a)/2.
    pub fn symmetrized(&self) -> Metric {
        let kind = self.kind.symmetrized();
        let label = format!("sym[{}]", self.label);
        Metric {
            kind: Arc::new(kind),
            atlas: self.atlas,
            antipodal: self.antipodal,
            region: self.region,
            label,
        }
    }

    /// Low-discrepancy base points inside the metric's natural region.
    pub fn sample_base_points(&self, count: usize, seed: u64) -> Vec<ChartPoint> {
        let offset = crate::util::splitmix64(seed) % 8192;
        let mut points = Vec::with_capacity(count);
        let mut index = offset;
        while points.len() < count {
            let u1 = halton(index, 2);
            let u2 = halton(index, 3);
            index += 1;
            match (self.atlas, self.region, self.kind.domain()) {
                (Atlas::SphereTwoCharts, _, _) => {
                    let z = 1.0 - 2.0 * u1;
                    let phi = TAU * u2;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let e = [rho * phi.cos(), rho * phi.sin(), z];
                    points.push(if z >= 0.0 {
                        ChartPoint::north(e[0] / (1.0 + z), e[1] / (1.0 + z))
                    } else {
                        ChartPoint::south(e[0] / (1.0 - z), e[1] / (1.0 - z))
                    });
                }
                (Atlas::Plane, _, Some(domain)) => {
                    // Rejection-sample the inset domain around its basepoint.
                    let bound = 2.0 * (0..64)
                        .map(|k| domain.support(TAU * k as f64 / 64.0))
                        .fold(0.0f64, f64::max);
                    let q = [bound * (u1 - 0.5), bound * (u2 - 0.5)];
                    if domain.contains(q, 0.2) {
                        points.push(ChartPoint::plane(q[0], q[1]));
                    }
                }
                (Atlas::Plane, Region::Rect { lo, hi }, None) => {
                    points.push(ChartPoint::plane(
                        lo[0] + (hi[0] - lo[0]) * u1,
                        lo[1] + (hi[1] - lo[1]) * u2,
                    ));
                }
                (Atlas::Plane, Region::Sphere, None) => {
                    points.push(ChartPoint::plane(2.0 * u1 - 1.0, 2.0 * u2 - 1.0));
                }
            }
        }
        points
    }
}

/// Pointwise metric evaluation (free-function form of `Metric::eval`).
pub fn eval_metric(metric: &Metric, x: &ChartPoint, v: FiberVector) -> Result<f64> {
    metric.eval(x, v)
}

/// Full validity diagnosis of a metric over sampled base points.
#[derive(Debug, Clone, Serialize)]
pub struct MetricValidityReport {
    pub metric: String,
    pub base_points: usize,
    pub fiber_samples: usize,
    pub all_valid: bool,
    pub worst_fiber: ValidityReport,
    pub worst_point: ChartPoint,
    /// 1 − max over samples of |b|_{a⁻¹} for Randers-type metrics.
    pub randers_margin: Option<f64>,
    /// min over samples of (F_base(v) − |β(v)|)/F_base(v) for sums with a 1-form.
    pub one_form_margin: Option<f64>,
    pub domain: Option<DomainInfo>,
    /// Sphere atlas: worst relative disagreement of F across the chart overlap.
    pub chart_consistency: Option<f64>,
    /// Antipodal-symmetry residual when the RP² flag is set.
    pub antipodal_residual: Option<f64>,
}

pub fn validate_metric(
    metric: &Metric,
    base_points: usize,
    fiber_samples: usize,
    seed: u64,
) -> MetricValidityReport {
    let points = metric.sample_base_points(base_points, seed);
    let mut all_valid = true;
    let mut worst: Option<(f64, ValidityReport, ChartPoint)> = None;
    for point in &points {
        let report = check_norm_validity(&metric.fiber_norm(point), fiber_samples);
        let score = if report.valid {
            report.convexity_margin
        } else {
            f64::NEG_INFINITY
        };
        all_valid &= report.valid;
        if worst.as_ref().map_or(true, |(s, _, _)| score < *s) {
            worst = Some((score, report, *point));
        }
    }
    let (_, worst_fiber, worst_point) = worst.expect("at least one base point");

    let randers_margin = randers_margin(metric, &points);
    let one_form_margin = one_form_margin(metric, &points);
    let domain = metric.domain().map(|d| d.info());
    let chart_consistency = if metric.atlas() == Atlas::SphereTwoCharts {
        Some(chart_consistency(metric))
    } else {
        None
    };
    let antipodal_residual = if metric.antipodal() {
        Some(antipodal_residual(metric, &points))
    } else {
        None
    };

    MetricValidityReport {
        metric: metric.label().to_string(),
        base_points,
        fiber_samples,
        all_valid,
        worst_fiber,
        worst_point,
        randers_margin,
        one_form_margin,
        domain,
        chart_consistency,
        antipodal_residual,
    }
}

fn randers_margin(metric: &Metric, points: &[ChartPoint]) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for point in points {
        match metric.kind.quadratic_part(point.x) {
            Ok(Some((a_inv, b))) => {
                if b.is_zero() {
                    continue;
                }
                let norm = a_inv.quad([b.p1, b.p2]).max(0.0).sqrt();
                let margin = 1.0 - norm;
                worst = Some(worst.map_or(margin, |w: f64| w.min(margin)));
            }
            _ => return worst,
        }
    }
    worst
}

fn one_form_margin(metric: &Metric, points: &[ChartPoint]) -> Option<f64> {
    let beta = match &*metric.kind {
        Kind::PlusOneForm { base, beta } => Some((base, beta)),
        _ => None,
    }?;
    let (base, beta) = beta;
    let mut worst = f64::INFINITY;
    for point in points {
        for k in 0..64 {
            let u = FiberVector::from_angle(TAU * k as f64 / 64.0);
            let fb = base.eval(point.x, u).unwrap_or(f64::NAN);
            let lin = beta.eval(point.x).pair(u);
            if !fb.is_finite() {
                return Some(f64::NEG_INFINITY);
            }
            worst = worst.min((fb - lin.abs()) / fb);
        }
    }
    Some(worst)
}

fn chart_consistency(metric: &Metric) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..200 {
        let r = 0.8 + 0.6 * halton(k, 2);
        let phi = TAU * halton(k, 3);
        let theta = TAU * halton(k, 5);
        let x = ChartPoint::north(r * phi.cos(), r * phi.sin());
        let v = FiberVector::from_angle(theta);
        let y = match chart_transition(&x) {
            Ok(y) => y,
            Err(_) => continue,
        };
        let w = push_vector(x.x, v);
        match (metric.eval(&x, v), metric.eval(&y, w)) {
            (Ok(f0), Ok(f1)) => {
                worst = worst.max((f0 - f1).abs() / f0.abs().max(1e-300));
            }
            _ => worst = worst.max(f64::INFINITY),
        }
    }
    worst
}

fn antipodal_residual(metric: &Metric, points: &[ChartPoint]) -> f64 {
    // Antipodal map in the two-chart atlas: (north, x) ↦ (south, −x).
    let mut worst = 0.0f64;
    for (k, point) in points.iter().enumerate() {
        if !point.is_sphere_chart() {
            continue;
        }
        let image = ChartPoint {
            chart: point.chart.other(),
            x: [-point.x[0], -point.x[1]],
        };
        let v = FiberVector::from_angle(TAU * halton(k as u64, 7));
        match (metric.eval(point, v), metric.eval(&image, -v)) {
            (Ok(f0), Ok(f1)) => worst = worst.max((f0 - f1).abs() / f0.abs().max(1e-300)),
            _ => worst = worst.max(f64::INFINITY),
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_funk() -> Metric {
        Metric::from_kind(
            Kind::Funk {
                domain: ConvexDomain::unit_disc(),
            },
            Atlas::Plane,
            false,
            Region::Rect {
                lo: [-0.6, -0.6],
                hi: [0.6, 0.6],
            },
        )
    }

    #[test]
    fn euclidean_eval_and_dual() {
        let m = Metric::euclidean();
        let x = ChartPoint::plane(0.2, 0.3);
        assert_eq!(m.eval(&x, FiberVector::new(3.0, 4.0)).unwrap(), 5.0);
        assert_eq!(m.dual(&x, FiberCovector::new(3.0, 4.0)).unwrap(), 5.0);
    }

    #[test]
    fn sphere_round_conformal_factor() {
        let m = Metric::sphere_round();
        let x = ChartPoint::north(0.0, 0.0);
        assert!((m.eval(&x, FiberVector::new(1.0, 0.0)).unwrap() - 2.0).abs() < 1e-15);
        // Dual area factor: H(p) = |p|/2 at the origin.
        assert!((m.dual(&x, FiberCovector::new(1.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        // Chart invariance of the round metric.
        let p0 = ChartPoint::north(1.1, -0.3);
        let v = FiberVector::new(0.4, 0.9);
        let p1 = chart_transition(&p0).unwrap();
        let w = push_vector(p0.x, v);
        let f0 = m.eval(&p0, v).unwrap();
        let f1 = m.eval(&p1, w).unwrap();
        assert!((f0 - f1).abs() <= 1e-10 * f0);
    }

    #[test]
    fn funk_metric_dual_is_closed_form() {
        let m = disc_funk();
        let x = ChartPoint::plane(0.3, -0.2);
        // H(x, p) = |p| − x·p for the unit disc.
        for k in 0..16 {
            let p = FiberCovector::from_angle(TAU * k as f64 / 16.0).scaled(1.3);
            let h = m.dual(&x, p).unwrap();
            let expect = p.norm() - (x.x[0] * p.p1 + x.x[1] * p.p2);
            assert!((h - expect).abs() < 1e-12);
        }
        // Consistency with the generic definition: H(p) = sup p·v/F(v).
        let f = m.fiber_norm(&x);
        for k in 0..8 {
            let p = FiberCovector::from_angle(TAU * k as f64 / 8.0 + 0.1);
            let h = m.dual(&x, p).unwrap();
            let sup = crate::norms::dual_norm(&f, p);
            assert!((h - sup).abs() < 1e-8, "k={k}: {h} vs {sup}");
        }
    }

    #[test]
    fn hilbert_dual_matches_generic_sup() {
        let m = Metric::from_kind(
            Kind::Hilbert {
                domain: ConvexDomain::unit_disc(),
            },
            Atlas::Plane,
            false,
            Region::Rect {
                lo: [-0.6, -0.6],
                hi: [0.6, 0.6],
            },
        );
        let x = ChartPoint::plane(0.4, 0.1);
        // Klein model: F(x,v)² = (|v|²(1−|x|²) + (x·v)²)/(1−|x|²)², so the
        // dual is sqrt(pᵀ a⁻¹ p) for a computable ellipse.
        let r2: f64 = 0.4f64 * 0.4 + 0.1 * 0.1;
        let one = 1.0 - r2;
        // a_ij = (one·δ_ij + x_i x_j)/one²; a⁻¹ = (δ_ij·1/one + ...) — check
        // against the generic scan instead of expanding by hand.
        let f = m.fiber_norm(&x);
        for k in 0..12 {
            let p = FiberCovector::from_angle(TAU * k as f64 / 12.0 + 0.07).scaled(0.8);
            let h = m.dual(&x, p).unwrap();
            let sup = crate::norms::dual_norm(&f, p);
            assert!(
                (h - sup).abs() < 1e-8 * sup.max(1.0),
                "k={k}: {h} vs {sup}"
            );
        }
        let _ = one;
    }

    #[test]
    fn randers_dual_translate_structure() {
        // F = |v| + b·v has dual ball = unit disc shifted by b: H(b) < 1 region.
        let kind = Kind::PlusOneForm {
            base: Box::new(Kind::Euclidean),
            beta: OneFormSpec::Components(
                ScalarField::parse("0.3").unwrap(),
                ScalarField::parse("0").unwrap(),
            ),
        };
        let x = [0.0, 0.0];
        // H(p) should equal gauge of disc translated by (0.3, 0): for p along
        // +e1: t with p/t − b on unit circle: |p/t − 0.3| = 1 → t = p/(1.3).
        let h = kind.dual(x, FiberCovector::new(1.3, 0.0)).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        let h2 = kind.dual(x, FiberCovector::new(-0.7, 0.0)).unwrap();
        assert!((h2 - 1.0).abs() < 1e-12);
        // Legendre pairs: p·v = F(v), H(p) = 1 on the indicatrix.
        let v = FiberVector::new(0.0, 1.0);
        let f = kind.eval(x, v).unwrap();
        let p = kind.fiber_grad(x, v).unwrap();
        assert!((p.pair(v) - f).abs() < 1e-12);
        let h3 = kind.dual(x, p).unwrap();
        assert!((h3 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn plus_one_form_fibers_are_translates() {
        let kind = Kind::PlusOneForm {
            base: Box::new(Kind::SphereRound),
            beta: OneFormSpec::Grad(ScalarField::parse("0.2*x1/(1+r2)").unwrap()),
        };
        let metric = Metric::from_kind(kind, Atlas::SphereTwoCharts, false, Region::Sphere);
        let base = Metric::sphere_round();
        let x = ChartPoint::north(0.4, -0.7);
        let b = match &*metric.kind {
            Kind::PlusOneForm { beta, .. } => beta.eval(x.x),
            _ => unreachable!(),
        };
        let fn_sum = crate::norms::support_body_of(&metric.fiber_norm(&x), 128).unwrap();
        let fn_base = crate::norms::support_body_of(&base.fiber_norm(&x), 128).unwrap();
        for k in 0..128 {
            let u = FiberVector::from_angle(fn_sum.theta(k));
            let expect = fn_base.samples()[k] + b.pair(u);
            assert!((fn_sum.samples()[k] - expect).abs() < 1e-12);
        }
        let area_sum = crate::norms::body_area(&fn_sum).unwrap();
        let area_base = crate::norms::body_area(&fn_base).unwrap();
        assert!((area_sum - area_base).abs() < 1e-10 * area_base);
    }

    #[test]
    fn symmetrization_of_kinds() {
        let randers = Kind::Randers {
            a: MatrixField::Conformal(ScalarField::parse("1").unwrap()),
            b: OneFormSpec::Components(
                ScalarField::parse("0.5").unwrap(),
                ScalarField::parse("0").unwrap(),
            ),
        };
        let sym = randers.symmetrized();
        assert!(matches!(sym, Kind::Riemannian { .. }));
        let funk = Kind::Funk {
            domain: ConvexDomain::unit_disc(),
        };
        assert!(matches!(funk.symmetrized(), Kind::Hilbert { .. }));
    }

    #[test]
    fn validity_of_catalog_metrics() {
        let round = validate_metric(&Metric::sphere_round(), 50, 128, 0);
        assert!(round.all_valid);
        assert_eq!(round.chart_consistency.map(|c| c < 1e-10), Some(true));
        let funk = validate_metric(&disc_funk(), 50, 128, 0);
        assert!(funk.all_valid, "{funk:?}");
        let euclid = validate_metric(&Metric::euclidean(), 50, 128, 0);
        assert!(euclid.all_valid);
    }

    #[test]
    fn antipodal_flag_on_round_sphere() {
        let mut metric = Metric::sphere_round();
        metric.antipodal = true;
        let report = validate_metric(&metric, 40, 128, 0);
        assert_eq!(report.antipodal_residual.map(|r| r < 1e-12), Some(true));
    }
}
