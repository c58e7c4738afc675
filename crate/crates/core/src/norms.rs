//! Fiberwise convex geometry of asymmetric Minkowski norms.
//!
//! A norm here is a positively 1-homogeneous, positive, quadratically convex
//! function on a 2D fiber. Equivalently it is the support function of a convex
//! body in the dual fiber that contains the origin in its interior; most of
//! the operations in this module move back and forth across that duality:
//! validity checks, the dual norm (Legendre transform on rays), support-body
//! extraction, areas and central symmetrization.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TAU: f64 = 2.0 * PI;

/// Tangent vector in a 2D fiber (chart components).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberVector {
    pub v1: f64,
    pub v2: f64,
}

impl FiberVector {
    pub fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn norm(&self) -> f64 {
        self.v1.hypot(self.v2)
    }

    pub fn angle(&self) -> f64 {
        self.v2.atan2(self.v1)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self::new(self.v1 * lambda, self.v2 * lambda)
    }

    pub fn is_zero(&self) -> bool {
        self.v1 == 0.0 && self.v2 == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.v1.is_finite() && self.v2.is_finite()
    }
}

impl std::ops::Neg for FiberVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v1, -self.v2)
    }
}

impl std::ops::Add for FiberVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.v1 + rhs.v1, self.v2 + rhs.v2)
    }
}

impl std::ops::Sub for FiberVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.v1 - rhs.v1, self.v2 - rhs.v2)
    }
}

/// Cotangent vector in a 2D fiber (chart components).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberCovector {
    pub p1: f64,
    pub p2: f64,
}

impl FiberCovector {
    pub fn new(p1: f64, p2: f64) -> Self {
        Self { p1, p2 }
    }

    pub fn from_angle(psi: f64) -> Self {
        Self::new(psi.cos(), psi.sin())
    }

    /// Natural pairing `p(v)`.
    pub fn pair(&self, v: FiberVector) -> f64 {
        self.p1 * v.v1 + self.p2 * v.v2
    }

    pub fn norm(&self) -> f64 {
        self.p1.hypot(self.p2)
    }

    pub fn angle(&self) -> f64 {
        self.p2.atan2(self.p1)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self::new(self.p1 * lambda, self.p2 * lambda)
    }

    pub fn is_zero(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite()
    }
}

impl std::ops::Neg for FiberCovector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.p1, -self.p2)
    }
}

impl std::ops::Add for FiberCovector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.p1 + rhs.p1, self.p2 + rhs.p2)
    }
}

impl std::ops::Sub for FiberCovector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.p1 - rhs.p1, self.p2 - rhs.p2)
    }
}

// ---------------------------------------------------------------------------
// Trigonometric interpolation
// ---------------------------------------------------------------------------

/// Truncated Fourier series fitted to uniform angular samples.
///
/// Coefficients below 1e-15 of the sample scale are dropped, so evaluation
/// cost follows the smoothness of the data rather than the grid size.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    mean: f64,
    cos_c: Vec<f64>,
    sin_c: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            mean: c,
            cos_c: Vec::new(),
            sin_c: Vec::new(),
        }
    }

    /// Interpolate `samples[k] = h(2πk/N)`. The Nyquist mode is dropped.
    pub fn interpolate(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n >= 4, "need at least 4 samples");
        let scale = samples.iter().fold(0.0f64, |m, &h| m.max(h.abs()));
        let cutoff = 1e-15 * scale.max(f64::MIN_POSITIVE);
        let mean = samples.iter().sum::<f64>() / n as f64;

        // Running cos(m θ_k), sin(m θ_k) per sample, advanced mode by mode.
        let mut cm: Vec<f64> = (0..n).map(|k| (TAU * k as f64 / n as f64).cos()).collect();
        let mut sm: Vec<f64> = (0..n).map(|k| (TAU * k as f64 / n as f64).sin()).collect();
        let c1 = cm.clone();
        let s1 = sm.clone();

        let mut cos_c = Vec::new();
        let mut sin_c = Vec::new();
        let max_mode = n / 2 - 1;
        let mut quiet = 0usize;
        for m in 1..=max_mode {
            let mut a = 0.0;
            let mut b = 0.0;
            for k in 0..n {
                a += samples[k] * cm[k];
                b += samples[k] * sm[k];
            }
            a *= 2.0 / n as f64;
            b *= 2.0 / n as f64;
            cos_c.push(a);
            sin_c.push(b);
            if a.abs() < cutoff && b.abs() < cutoff {
                quiet += 1;
                if quiet >= 8 {
                    break;
                }
            } else {
                quiet = 0;
            }
            if m < max_mode {
                for k in 0..n {
                    let c_next = cm[k] * c1[k] - sm[k] * s1[k];
                    let s_next = sm[k] * c1[k] + cm[k] * s1[k];
                    cm[k] = c_next;
                    sm[k] = s_next;
                }
            }
        }
        // Trim trailing negligible modes.
        while let (Some(&a), Some(&b)) = (cos_c.last(), sin_c.last()) {
            if a.abs() < cutoff && b.abs() < cutoff {
                cos_c.pop();
                sin_c.pop();
            } else {
                break;
            }
        }
        Self { mean, cos_c, sin_c }
    }

    pub fn modes(&self) -> usize {
        self.cos_c.len()
    }

    /// Value, first and second derivative at `theta`.
    pub fn eval_all(&self, theta: f64) -> (f64, f64, f64) {
        let (c1, s1) = (theta.cos(), theta.sin());
        let (mut cm, mut sm) = (c1, s1);
        let mut h = self.mean;
        let mut dh = 0.0;
        let mut ddh = 0.0;
        for m in 0..self.cos_c.len() {
            let fm = (m + 1) as f64;
            let (a, b) = (self.cos_c[m], self.sin_c[m]);
            h += a * cm + b * sm;
            dh += fm * (b * cm - a * sm);
            ddh -= fm * fm * (a * cm + b * sm);
            let c_next = cm * c1 - sm * s1;
            let s_next = sm * c1 + cm * s1;
            cm = c_next;
            sm = s_next;
        }
        (h, dh, ddh)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_all(theta).0
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        self.eval_all(theta).1
    }

    /// Area of the convex body whose support function is this polynomial:
    /// ½∮(h² − h'²)dθ evaluated exactly via Parseval.
    pub fn support_area(&self) -> f64 {
        let mut area = PI * self.mean * self.mean;
        for m in 0..self.cos_c.len() {
            let fm = (m + 1) as f64;
            area += 0.5 * PI * (1.0 - fm * fm) * (self.cos_c[m].powi(2) + self.sin_c[m].powi(2));
        }
        area
    }

    /// Gauge of the body supported by this polynomial, at direction `psi`:
    /// sup_φ cos(ψ−φ)/h(φ). Grid scan plus safeguarded Newton refinement.
    pub fn dual_gauge(&self, psi: f64) -> f64 {
        let grid = 4 * (self.modes() + 8);
        let mut best = f64::NEG_INFINITY;
        let mut best_phi = psi;
        for j in 0..grid {
            let phi = psi + TAU * j as f64 / grid as f64;
            let (h, _, _) = self.eval_all(phi);
            let r = (psi - phi).cos() / h;
            if r > best {
                best = r;
                best_phi = phi;
            }
        }
        self.refine_gauge(psi, best_phi, TAU / grid as f64)
    }

    /// Dual gauge at `n` uniform angles in one sweep. The maximizer angle is
    /// monotone in the query angle for a convex body, so the coarse scan
    /// advances a single running index instead of rescanning per angle.
    pub fn polar_sweep(&self, n: usize) -> Vec<f64> {
        let m = (4 * (self.modes() + 8)).max(n);
        let grid: Vec<f64> = (0..m).map(|j| self.eval(TAU * j as f64 / m as f64)).collect();
        let ratio = |psi: f64, j: usize| (psi - TAU * j as f64 / m as f64).cos() / grid[j % m];
        let mut out = Vec::with_capacity(n);
        let mut j = 0usize;
        for k in 0..n {
            let psi = TAU * k as f64 / n as f64;
            if k == 0 {
                let mut best = f64::NEG_INFINITY;
                for cand in 0..m {
                    let r = ratio(psi, cand);
                    if r > best {
                        best = r;
                        j = cand;
                    }
                }
            } else {
                let mut advanced = 0;
                while ratio(psi, j + 1) >= ratio(psi, j) && advanced <= 2 * m {
                    j += 1;
                    advanced += 1;
                }
                j %= m;
            }
            out.push(self.refine_gauge(psi, TAU * j as f64 / m as f64, TAU / m as f64));
        }
        out
    }

    /// Newton-polish the dual gauge maximizer from a bracketed start.
    fn refine_gauge(&self, psi: f64, phi0: f64, half_bracket: f64) -> f64 {
        let (mut lo, mut hi) = (phi0 - half_bracket, phi0 + half_bracket);
        let mut phi = phi0;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..60 {
            let (h, dh, ddh) = self.eval_all(phi);
            let delta = psi - phi;
            best = best.max(delta.cos() / h);
            let num = delta.sin() * h - delta.cos() * dh;
            let dnum = -delta.cos() * (h + ddh);
            if num > 0.0 {
                lo = phi;
            } else {
                hi = phi;
            }
            let step = if dnum != 0.0 { -num / dnum } else { 0.0 };
            let mut next = phi + step;
            if !(next > lo && next < hi) || step == 0.0 {
                next = 0.5 * (lo + hi);
            }
            if (next - phi).abs() < 1e-14 {
                phi = next;
                break;
            }
            phi = next;
        }
        let (h, _, _) = self.eval_all(phi);
        ((psi - phi).cos() / h).max(best)
    }

    /// Support samples of the polar body on a uniform grid of size `n`.
    pub fn polar(&self, n: usize) -> TrigPoly {
        TrigPoly::interpolate(&self.polar_sweep(n))
    }
}

// ---------------------------------------------------------------------------
// Asymmetric norms
// ---------------------------------------------------------------------------

type EvalFn = dyn Fn(FiberVector) -> f64 + Send + Sync;
type GradFn = dyn Fn(FiberVector) -> FiberCovector + Send + Sync;

/// An asymmetric norm on a 2D fiber: a positively 1-homogeneous, positive,
/// quadratically convex function, optionally with an analytic fiber derivative.
#[derive(Clone)]
pub struct AsymNorm {
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
}

impl AsymNorm {
    pub fn new(f: impl Fn(FiberVector) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            grad: None,
        }
    }

    pub fn with_grad(
        f: impl Fn(FiberVector) -> f64 + Send + Sync + 'static,
        g: impl Fn(FiberVector) -> FiberCovector + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            grad: Some(Arc::new(g)),
        }
    }

    pub fn eval(&self, v: FiberVector) -> f64 {
        (self.eval)(v)
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn euclidean() -> Self {
        Self::with_grad(
            |v| v.norm(),
            |v| {
                let n = v.norm();
                FiberCovector::new(v.v1 / n, v.v2 / n)
            },
        )
    }

    /// Norm whose restriction to the unit circle is the support polynomial:
    /// F(v) = |v|·h(θ_v). This is the support function of the body `h` describes.
    pub fn from_support(poly: TrigPoly) -> Self {
        let p2 = poly.clone();
        Self::with_grad(
            move |v| v.norm() * poly.eval(v.angle()),
            move |v| {
                let theta = v.angle();
                let (h, dh, _) = p2.eval_all(theta);
                let (c, s) = (theta.cos(), theta.sin());
                // ∇(r h(θ)) = h·u + h'·u⊥
                FiberCovector::new(h * c - dh * s, h * s + dh * c)
            },
        )
    }

    /// The dual norm as a norm on covector fibers (H in p, reinterpreted on v).
    pub fn dual(&self) -> AsymNorm {
        let f = self.clone();
        AsymNorm::new(move |v| dual_norm(&f, FiberCovector::new(v.v1, v.v2)))
    }
}

/// Validity diagnosis of a candidate asymmetric norm.
#[derive(Debug, Clone, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub samples: usize,
    /// Worst relative homogeneity defect over sampled (v, λ).
    pub homogeneity_residual: f64,
    /// min_θ F(u(θ)); must be strictly positive.
    pub positivity_margin: f64,
    /// min_θ of the discrete h + h'' (boundary curvature of the dual body).
    pub convexity_margin: f64,
    /// Threshold the convexity margin must exceed (scales with the grid).
    pub convexity_required: f64,
    pub reason: Option<String>,
}

impl ValidityReport {
    fn invalid(samples: usize, reason: String) -> Self {
        Self {
            valid: false,
            samples,
            homogeneity_residual: f64::NAN,
            positivity_margin: f64::NAN,
            convexity_margin: f64::NAN,
            convexity_required: f64::NAN,
            reason: Some(reason),
        }
    }
}

/// Low-discrepancy points in [0,1): frac(i·φ⁻¹) with a fixed offset.
fn golden_seq(i: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    (0.5 + (i as f64 + 1.0) * INV_PHI).fract()
}

/// Operationalized validity check: positivity, positive 1-homogeneity and
/// quadratic convexity (strict positivity of h + h'' on the sampled circle,
/// with a threshold proportional to the discrete operator's truncation error).
pub fn check_norm_validity(f: &AsymNorm, samples: usize) -> ValidityReport {
    assert!(samples >= 64, "validity check needs at least 64 samples");
    let dtheta = TAU / samples as f64;
    let mut h = Vec::with_capacity(samples);
    for k in 0..samples {
        let value = f.eval(FiberVector::from_angle(k as f64 * dtheta));
        if !value.is_finite() {
            return ValidityReport::invalid(
                samples,
                format!("non-finite evaluation at θ = {:.6}", k as f64 * dtheta),
            );
        }
        h.push(value);
    }
    let scale = h.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let positivity_margin = h.iter().fold(f64::INFINITY, |m, &x| m.min(x));

    let mut homogeneity_residual = 0.0f64;
    for i in 0..100 {
        let theta = TAU * golden_seq(2 * i);
        let lambda = 10.0 * golden_seq(2 * i + 1).max(1e-3);
        let v = FiberVector::from_angle(theta);
        let f1 = f.eval(v.scaled(lambda));
        let f0 = f.eval(v);
        if !f1.is_finite() || !f0.is_finite() {
            return ValidityReport::invalid(samples, "non-finite evaluation on rays".into());
        }
        let rel = (f1 - lambda * f0).abs() / (lambda * f0).abs().max(f64::MIN_POSITIVE);
        homogeneity_residual = homogeneity_residual.max(rel);
    }

    let mut convexity_margin = f64::INFINITY;
    for k in 0..samples {
        let prev = h[(k + samples - 1) % samples];
        let next = h[(k + 1) % samples];
        let curv = h[k] + (next - 2.0 * h[k] + prev) / (dtheta * dtheta);
        convexity_margin = convexity_margin.min(curv);
    }
    // The centered second difference of a facet (flat edge of the dual body)
    // reports ~Δθ²·h/12 instead of zero, so the pass threshold must sit above
    // that truncation floor.
    let convexity_required = 0.5 * dtheta * dtheta * scale;

    let valid = positivity_margin > 1e-9 * scale.max(f64::MIN_POSITIVE)
        && homogeneity_residual <= 1e-9
        && convexity_margin > convexity_required;
    ValidityReport {
        valid,
        samples,
        homogeneity_residual,
        positivity_margin,
        convexity_margin,
        convexity_required,
        reason: None,
    }
}

/// Golden-section maximization on [a, b]; returns (argmax, max).
fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..iters {
        if g1 < g2 {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + INV_PHI * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - INV_PHI * (b - a);
            g1 = g(x1);
        }
    }
    if g1 >= g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// Dual norm H(p) = sup { p·v : F(v) = 1 }, by grid scan over ≥256 directions
/// and golden-section refinement of the angle.
pub fn dual_norm(f: &AsymNorm, p: FiberCovector) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    const GRID: usize = 256;
    let g = |theta: f64| {
        let u = FiberVector::from_angle(theta);
        p.pair(u) / f.eval(u)
    };
    let mut best = f64::NEG_INFINITY;
    let mut best_theta = 0.0;
    for k in 0..GRID {
        let theta = TAU * k as f64 / GRID as f64;
        let val = g(theta);
        if val > best {
            best = val;
            best_theta = theta;
        }
    }
    let span = TAU / GRID as f64;
    let (_, refined) = golden_max(g, best_theta - span, best_theta + span, 48);
    refined.max(best)
}

/// Fiber derivative p = dF_v (the Legendre image of v). Uses the analytic
/// gradient when available, else centered differences with step 1e-6·|v|.
pub fn legendre_point(f: &AsymNorm, v: FiberVector) -> Result<FiberCovector> {
    if v.is_zero() {
        return Err(Error::Domain(
            "Legendre transform undefined at the zero vector".into(),
        ));
    }
    if let Some(grad) = &f.grad {
        return Ok(grad(v));
    }
    let step = 1e-6 * v.norm();
    let p1 = (f.eval(FiberVector::new(v.v1 + step, v.v2))
        - f.eval(FiberVector::new(v.v1 - step, v.v2)))
        / (2.0 * step);
    let p2 = (f.eval(FiberVector::new(v.v1, v.v2 + step))
        - f.eval(FiberVector::new(v.v1, v.v2 - step)))
        / (2.0 * step);
    Ok(FiberCovector::new(p1, p2))
}

/// Central symmetrization of the norm: v ↦ (F(v) + F(−v))/2.
///
/// Symmetry of the result is exact in floating point: both orientations
/// evaluate the same two numbers and add them commutatively.
pub fn symmetrize_norm(f: &AsymNorm) -> AsymNorm {
    let fe = f.clone();
    let grad = f.grad.clone();
    let eval = move |v: FiberVector| 0.5 * (fe.eval(v) + fe.eval(-v));
    match grad {
        Some(g) => AsymNorm::with_grad(eval, move |v| {
            let gp = g(v);
            let gm = g(-v);
            FiberCovector::new(0.5 * (gp.p1 - gm.p1), 0.5 * (gp.p2 - gm.p2))
        }),
        None => AsymNorm::new(eval),
    }
}

// ---------------------------------------------------------------------------
// Support bodies
// ---------------------------------------------------------------------------

/// Convex body in the dual fiber, stored as support samples h(θ_k) on a
/// uniform even grid so that θ ↦ θ+π is a grid involution.
#[derive(Debug, Clone, Serialize)]
pub struct SupportBody {
    h: Vec<f64>,
}

impl SupportBody {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.len() < 64 || h.len() % 2 != 0 {
            return Err(Error::Config(format!(
                "support grid must be even and ≥ 64, got {}",
                h.len()
            )));
        }
        for (k, &value) in h.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidNorm(format!(
                    "non-finite support sample at index {k}"
                )));
            }
            if value <= 0.0 {
                return Err(Error::InvalidNorm(format!(
                    "support sample {value} at index {k} is not positive; origin must be interior"
                )));
            }
        }
        Ok(Self { h })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.h
    }

    pub fn theta(&self, k: usize) -> f64 {
        TAU * k as f64 / self.h.len() as f64
    }

    pub fn interpolant(&self) -> TrigPoly {
        TrigPoly::interpolate(&self.h)
    }

    /// Worst discrete convexity value min_k (h + h'') by centered differences.
    pub fn convexity_margin(&self) -> (f64, usize) {
        let n = self.h.len();
        let dtheta = TAU / n as f64;
        let mut worst = f64::INFINITY;
        let mut at = 0;
        for k in 0..n {
            let prev = self.h[(k + n - 1) % n];
            let next = self.h[(k + 1) % n];
            let curv = self.h[k] + (next - 2.0 * self.h[k] + prev) / (dtheta * dtheta);
            if curv < worst {
                worst = curv;
                at = k;
            }
        }
        (worst, at)
    }
}

/// Sample the dual body of F: h(θ_k) = F(cos θ_k, sin θ_k).
pub fn support_body_of(f: &AsymNorm, n: usize) -> Result<SupportBody> {
    if n < 64 || n % 2 != 0 {
        return Err(Error::Config(format!(
            "support grid must be even and ≥ 64, got {n}"
        )));
    }
    let mut h = Vec::with_capacity(n);
    for k in 0..n {
        let value = f.eval(FiberVector::from_angle(TAU * k as f64 / n as f64));
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidNorm(format!(
                "norm evaluates to {value} at θ = {:.6}",
                TAU * k as f64 / n as f64
            )));
        }
        h.push(value);
    }
    SupportBody::new(h)
}

/// Area of the body from its support samples, ½∮(h² − h'²)dθ with the
/// derivative taken spectrally (exact for the trigonometric interpolant).
pub fn body_area(body: &SupportBody) -> Result<f64> {
    let (margin, at) = body.convexity_margin();
    let scale = body.samples().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if margin < -1e-8 * scale.max(1.0) {
        return Err(Error::InvalidNorm(format!(
            "support function violates convexity at θ = {:.6} (h + h'' = {margin:.3e})",
            body.theta(at)
        )));
    }
    Ok(body.interpolant().support_area())
}

/// Central symmetrization (K + (−K))/2: h(θ) ↦ (h(θ) + h(θ+π))/2, exact on
/// the even grid.
pub fn central_symmetrize_body(body: &SupportBody) -> SupportBody {
    let n = body.len();
    let h = body.samples();
    let sym: Vec<f64> = (0..n).map(|k| 0.5 * (h[k] + h[(k + n / 2) % n])).collect();
    SupportBody { h: sym }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randers_like() -> AsymNorm {
        AsymNorm::new(|v| v.norm() + 0.5 * v.v1)
    }

    #[test]
    fn euclidean_is_valid_with_unit_convexity_margin() {
        let report = check_norm_validity(&AsymNorm::euclidean(), 512);
        assert!(report.valid, "{report:?}");
        assert!((report.convexity_margin - 1.0).abs() < 1e-6);
        assert!(report.homogeneity_residual <= 1e-12);
    }

    #[test]
    fn cos2_support_norm_is_valid() {
        // h(θ) = 1 − 0.3cos2θ ⇒ h + h'' = 1 + 0.9cos2θ, min 0.1.
        let poly = TrigPoly::interpolate(
            &(0..512)
                .map(|k| 1.0 - 0.3 * (2.0 * TAU * k as f64 / 512.0).cos())
                .collect::<Vec<_>>(),
        );
        let norm = AsymNorm::from_support(poly);
        let report = check_norm_validity(&norm, 512);
        assert!(report.valid, "{report:?}");
        // Oracle: symbolic h + h'' on a fine grid has minimum 0.1.
        let fine_min = (0..10_000)
            .map(|k| {
                let t = TAU * k as f64 / 10_000.0;
                1.0 + 0.9 * (2.0 * t).cos()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((fine_min - 0.1).abs() < 1e-6);
        assert!((report.convexity_margin - fine_min).abs() < 5e-3);
    }

    #[test]
    fn l1_norm_is_rejected_for_flat_facets() {
        let l1 = AsymNorm::new(|v| v.v1.abs() + v.v2.abs());
        let report = check_norm_validity(&l1, 512);
        assert!(!report.valid, "{report:?}");
        assert!(report.convexity_margin < report.convexity_required);
        // Finer grid still detects the zero-curvature facets.
        let fine = check_norm_validity(&l1, 10_000);
        assert!(!fine.valid);
    }

    #[test]
    fn dual_norm_euclidean_self_dual() {
        let e = AsymNorm::euclidean();
        assert!((dual_norm(&e, FiberCovector::new(3.0, 4.0)) - 5.0).abs() < 1e-9);
        assert_eq!(dual_norm(&e, FiberCovector::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn dual_norm_scaling() {
        let f = AsymNorm::new(|v| 2.0 * v.norm());
        assert!((dual_norm(&f, FiberCovector::new(1.0, 0.0)) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn dual_norm_randers_matches_brute_force() {
        use rand::prelude::*;
        let f = randers_like();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = FiberCovector::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if p.norm() < 1e-3 {
                continue;
            }
            // Brute-force sup of p·v/F(v) over many random directions.
            let mut brute = f64::NEG_INFINITY;
            for _ in 0..1_000_000 {
                let theta = rng.gen_range(0.0..TAU);
                let u = FiberVector::from_angle(theta);
                brute = brute.max(p.pair(u) / f.eval(u));
            }
            let h = dual_norm(&f, p);
            assert!(
                h >= brute - 1e-9 && h - brute < 1e-8 * h.abs().max(1.0),
                "H = {h}, brute = {brute}"
            );
        }
    }

    #[test]
    fn legendre_point_euclidean() {
        let e = AsymNorm::euclidean();
        let p = legendre_point(&e, FiberVector::new(1.0, 0.0)).unwrap();
        assert!((p.p1 - 1.0).abs() < 1e-9 && p.p2.abs() < 1e-9);
        assert!(legendre_point(&e, FiberVector::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn legendre_pairs_satisfy_duality_identities() {
        let f = randers_like();
        // v on the indicatrix: F(v) = 1.
        for k in 0..16 {
            let theta = TAU * k as f64 / 16.0;
            let u = FiberVector::from_angle(theta);
            let v = u.scaled(1.0 / f.eval(u));
            let p = legendre_point(&f, v).unwrap();
            assert!((p.pair(v) - f.eval(v)).abs() < 1e-7, "p·v = F(v) fails");
            assert!((dual_norm(&f, p) - 1.0).abs() < 1e-7, "H(p) = 1 fails");
        }
    }

    #[test]
    fn legendre_on_cos3_support_norm() {
        let poly = TrigPoly::interpolate(
            &(0..512)
                .map(|k| 1.0 + 0.1 * (3.0 * TAU * k as f64 / 512.0).cos())
                .collect::<Vec<_>>(),
        );
        let f = AsymNorm::from_support(poly);
        for k in 0..12 {
            let u = FiberVector::from_angle(TAU * k as f64 / 12.0 + 0.05);
            let v = u.scaled(1.0 / f.eval(u));
            let p = legendre_point(&f, v).unwrap();
            assert!((p.pair(v) - f.eval(v)).abs() < 1e-7);
        }
    }

    #[test]
    fn symmetrize_cancels_linear_part() {
        let f = randers_like();
        let s = symmetrize_norm(&f);
        for k in 0..32 {
            let v = FiberVector::from_angle(TAU * k as f64 / 32.0).scaled(1.7);
            assert!((s.eval(v) - v.norm()).abs() < 1e-12);
            assert_eq!(s.eval(v), s.eval(-v));
        }
    }

    #[test]
    fn symmetrize_idempotent_and_kills_odd_harmonics() {
        let poly = TrigPoly::interpolate(
            &(0..512)
                .map(|k| 1.0 + 0.1 * (3.0 * TAU * k as f64 / 512.0).cos())
                .collect::<Vec<_>>(),
        );
        let f = AsymNorm::from_support(poly);
        let s = symmetrize_norm(&f);
        let ss = symmetrize_norm(&s);
        for k in 0..64 {
            let v = FiberVector::from_angle(TAU * k as f64 / 64.0);
            // (h(θ)+h(θ+π))/2 = 1 for a pure third harmonic.
            assert!((s.eval(v) - 1.0).abs() < 1e-12, "at k={k}: {}", s.eval(v));
            assert_eq!(s.eval(v), ss.eval(v));
        }
    }

    #[test]
    fn support_body_samples() {
        let e = AsymNorm::euclidean();
        let body = support_body_of(&e, 64).unwrap();
        assert!(body.samples().iter().all(|&h| (h - 1.0).abs() < 1e-15));
        let two = AsymNorm::new(|v| 2.0 * v.norm());
        let body2 = support_body_of(&two, 128).unwrap();
        assert!(body2.samples().iter().all(|&h| (h - 2.0).abs() < 1e-15));
        let r = randers_like();
        let body3 = support_body_of(&r, 128).unwrap();
        for (k, &h) in body3.samples().iter().enumerate() {
            let expect = 1.0 + 0.5 * body3.theta(k).cos();
            assert!((h - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn support_body_rejects_bad_grids() {
        let e = AsymNorm::euclidean();
        assert!(support_body_of(&e, 63).is_err());
        assert!(support_body_of(&e, 62).is_err());
        assert!(support_body_of(&e, 65).is_err());
    }

    #[test]
    fn body_area_disc_and_translate() {
        let e = support_body_of(&AsymNorm::euclidean(), 256).unwrap();
        assert!((body_area(&e).unwrap() - PI).abs() < 1e-12);
        let t = support_body_of(&randers_like(), 256).unwrap();
        assert!((body_area(&t).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn body_area_cos3_matches_analytic_and_hull() {
        let h: Vec<f64> = (0..512)
            .map(|k| 1.0 + 0.1 * (3.0 * TAU * k as f64 / 512.0).cos())
            .collect();
        let body = SupportBody::new(h).unwrap();
        let area = body_area(&body).unwrap();
        // Analytic: ½∫(h²−h'²) = π(1 + a²/2 − 9a²/2) = 0.96π for a = 0.1.
        assert!((area - 0.96 * PI).abs() < 1e-12, "area = {area}");
        assert!((area - 3.015_928_947_446_201).abs() < 1e-9);
        // Independent oracle: shoelace area of the boundary polygon
        // y(θ) = h u + h' u⊥ on 100k points.
        let poly = body.interpolant();
        let n = 100_000;
        let mut hull = 0.0;
        let mut prev = {
            let (h0, dh0, _) = poly.eval_all(0.0);
            (h0, dh0 * 1.0)
        };
        let mut prev_pt = (prev.0, prev.1);
        let first_pt = prev_pt;
        for k in 1..=n {
            let t = TAU * k as f64 / n as f64;
            let (hv, dhv, _) = poly.eval_all(t);
            let (c, s) = (t.cos(), t.sin());
            let pt = (hv * c - dhv * s, hv * s + dhv * c);
            hull += prev_pt.0 * pt.1 - pt.0 * prev_pt.1;
            prev_pt = pt;
            if k == n {
                hull += pt.0 * first_pt.1 - first_pt.0 * pt.1;
            }
        }
        prev = (0.0, 0.0);
        let _ = prev;
        let hull_area = 0.5 * hull.abs();
        assert!(
            (hull_area - area).abs() < 1e-7,
            "hull {hull_area} vs spectral {area}"
        );
    }

    #[test]
    fn body_area_rejects_nonconvex_support() {
        let h: Vec<f64> = (0..256)
            .map(|k| 1.0 + 0.5 * (4.0 * TAU * k as f64 / 256.0).cos())
            .collect();
        let body = SupportBody::new(h).unwrap();
        let err = body_area(&body).unwrap_err();
        assert!(err.to_string().contains("convexity"));
    }

    #[test]
    fn central_symmetrization_grid_exact() {
        for amp in [0.5, 0.1] {
            let modes = if amp == 0.5 { 1.0 } else { 3.0 };
            let h: Vec<f64> = (0..128)
                .map(|k| 1.0 + amp * (modes * TAU * k as f64 / 128.0).cos())
                .collect();
            let body = SupportBody::new(h).unwrap();
            let sym = central_symmetrize_body(&body);
            for (k, &v) in sym.samples().iter().enumerate() {
                assert!((v - 1.0).abs() < 1e-15, "k={k}: {v}");
                assert_eq!(v, sym.samples()[(k + 64) % 128]);
            }
        }
    }

    #[test]
    fn brunn_minkowski_on_bodies() {
        // cos3θ body strictly gains area under symmetrization; cosθ doesn't.
        let h3: Vec<f64> = (0..256)
            .map(|k| 1.0 + 0.1 * (3.0 * TAU * k as f64 / 256.0).cos())
            .collect();
        let k3 = SupportBody::new(h3).unwrap();
        let a = body_area(&k3).unwrap();
        let a_sym = body_area(&central_symmetrize_body(&k3)).unwrap();
        assert!(a <= a_sym * (1.0 + 1e-9));
        assert!((a_sym - PI).abs() < 1e-12);
        assert!(a_sym - a > 0.03);

        let h1: Vec<f64> = (0..256)
            .map(|k| 1.0 + 0.4 * (TAU * k as f64 / 256.0).sin())
            .collect();
        let k1 = SupportBody::new(h1).unwrap();
        let b = body_area(&k1).unwrap();
        let b_sym = body_area(&central_symmetrize_body(&k1)).unwrap();
        assert!((b - b_sym).abs() <= 1e-9 * b_sym);
    }

    #[test]
    fn dual_gauge_on_disc_and_ellipse() {
        let disc = TrigPoly::constant(2.0);
        for k in 0..12 {
            let psi = TAU * k as f64 / 12.0;
            assert!((disc.dual_gauge(psi) - 0.5).abs() < 1e-12);
        }
        // Ellipse with semi-axes 2, 1: h(θ) = sqrt(4cos²+sin²); gauge of the
        // body at angle ψ is sqrt(cos²ψ/4 + sin²ψ).
        let h: Vec<f64> = (0..512)
            .map(|k| {
                let t = TAU * k as f64 / 512.0;
                (4.0 * t.cos().powi(2) + t.sin().powi(2)).sqrt()
            })
            .collect();
        let poly = TrigPoly::interpolate(&h);
        for k in 0..24 {
            let psi = TAU * k as f64 / 24.0 + 0.03;
            let expect = (psi.cos().powi(2) / 4.0 + psi.sin().powi(2)).sqrt();
            let got = poly.dual_gauge(psi);
            assert!((got - expect).abs() < 1e-9, "psi={psi}: {got} vs {expect}");
        }
    }

    #[test]
    fn biduality_through_polar_interpolant() {
        // polar(polar(h)) recovers h for a smooth asymmetric body.
        let h: Vec<f64> = (0..512)
            .map(|k| {
                let t = TAU * k as f64 / 512.0;
                1.0 + 0.3 * t.cos() + 0.05 * (2.0 * t).sin()
            })
            .collect();
        let poly = TrigPoly::interpolate(&h);
        let polar = poly.polar(512);
        let back = polar.polar(512);
        for k in 0..64 {
            let t = TAU * k as f64 / 64.0;
            assert!(
                (back.eval(t) - poly.eval(t)).abs() < 1e-9,
                "t={t}: {} vs {}",
                back.eval(t),
                poly.eval(t)
            );
        }
    }
}
