//! Hamiltonian geodesic flow for Finsler metrics.
//!
//! The flow integrates K = ½H² on the unit co-sphere bundle H = 1, where the
//! integration parameter is Finsler arclength. An adaptive Dormand–Prince
//! 5(4) pair drives the steps; the momentum is periodically projected back to
//! H = 1, and sphere-atlas trajectories hop charts at the switch radius.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{
    chart_transition, push_covector, Atlas, ChartId, ChartPoint, Metric, SWITCH_RADIUS,
};
use crate::norms::{FiberCovector, FiberVector, TAU};
use crate::util::{halton, splitmix64};

/// Point of the unit co-sphere bundle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhasePoint {
    pub x: ChartPoint,
    pub p: FiberCovector,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceSample {
    pub s: f64,
    pub chart: ChartId,
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub v: [f64; 2],
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    Completed,
    DomainExit,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicTrace {
    pub samples: Vec<TraceSample>,
    pub total_length: f64,
    /// max |H − 1| over recorded samples.
    pub energy_drift: f64,
    pub termination: Termination,
    /// Integrator tolerance the trace was produced with.
    pub tol: f64,
}

impl GeodesicTrace {
    pub fn last(&self) -> &TraceSample {
        self.samples.last().expect("trace has samples")
    }

    /// CSV export: `s,chart,x1,x2,p1,p2,v1,v2,H` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,chart,x1,x2,p1,p2,v1,v2,H\n");
        for smp in &self.samples {
            out.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                smp.s,
                smp.chart.name(),
                smp.x[0],
                smp.x[1],
                smp.p[0],
                smp.p[1],
                smp.v[0],
                smp.v[1],
                smp.h
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowTols {
    /// Per-step integrator tolerance.
    pub step_tol: f64,
    /// Phase-distance gap below which a return counts as closed.
    pub close_tol: f64,
    /// Allowed spread of closed lengths around the median for a Zoll verdict.
    pub length_tol: f64,
}

impl Default for FlowTols {
    fn default() -> Self {
        Self {
            step_tol: 1e-8,
            close_tol: 1e-5,
            length_tol: 1e-4,
        }
    }
}

/// Funk/Hilbert trajectories stop when the domain gauge reaches this value.
const EXIT_GAUGE: f64 = 1.0 - 1e-3;
const RENORM_EVERY: usize = 10;

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Copy)]
struct State {
    chart: ChartId,
    y: [f64; 4], // x1, x2, p1, p2
}

impl State {
    fn point(&self) -> ChartPoint {
        ChartPoint {
            chart: self.chart,
            x: [self.y[0], self.y[1]],
        }
    }

    fn momentum(&self) -> FiberCovector {
        FiberCovector::new(self.y[2], self.y[3])
    }
}

fn rhs(metric: &Metric, state: &State) -> Result<[f64; 4]> {
    let grads = metric.dual_grads(&state.point(), state.momentum())?;
    Ok([
        grads.h * grads.dp.v1,
        grads.h * grads.dp.v2,
        -grads.h * grads.dx[0],
        -grads.h * grads.dx[1],
    ])
}

fn add_scaled(y: &[f64; 4], ks: &[[f64; 4]], coeffs: &[f64], h: f64) -> [f64; 4] {
    let mut out = *y;
    for (k, &c) in ks.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One embedded step; returns (y5, error_norm) or Err if any stage failed.
fn dopri_step(metric: &Metric, state: &State, h: f64, tol: f64) -> Result<([f64; 4], f64)> {
    let mut ks: Vec<[f64; 4]> = Vec::with_capacity(7);
    ks.push(rhs(metric, state)?);
    for stage in 0..6 {
        let y_stage = add_scaled(&state.y, &ks, &DP_A[stage][..=stage], h);
        let trial = State {
            chart: state.chart,
            y: y_stage,
        };
        ks.push(rhs(metric, &trial)?);
        let _ = DP_C;
    }
    let y5 = add_scaled(&state.y, &ks, &DP_B5, h);
    let y4 = add_scaled(&state.y, &ks, &DP_B4, h);
    let mut err_sq = 0.0;
    for i in 0..4 {
        let scale = tol * (1.0 + state.y[i].abs().max(y5[i].abs()));
        let e = (y5[i] - y4[i]) / scale;
        err_sq += e * e;
    }
    Ok((y5, (err_sq / 4.0).sqrt()))
}

fn record(metric: &Metric, state: &State, s: f64) -> Result<TraceSample> {
    let grads = metric.dual_grads(&state.point(), state.momentum())?;
    Ok(TraceSample {
        s,
        chart: state.chart,
        x: [state.y[0], state.y[1]],
        p: [state.y[2], state.y[3]],
        v: [grads.h * grads.dp.v1, grads.h * grads.dp.v2],
        h: grads.h,
    })
}

fn make_trace(
    samples: Vec<TraceSample>,
    termination: Termination,
    tol: f64,
) -> GeodesicTrace {
    let total_length = samples.last().map_or(0.0, |s| s.s);
    let energy_drift = samples
        .iter()
        .fold(0.0f64, |m, smp| m.max((smp.h - 1.0).abs()));
    GeodesicTrace {
        samples,
        total_length,
        energy_drift,
        termination,
        tol,
    }
}

/// Integrate the geodesic with initial point `x0` and direction `v0` (any
/// positive scale) for Finsler arclength `s_max`.
pub fn integrate_geodesic(
    metric: &Metric,
    x0: &ChartPoint,
    v0: FiberVector,
    s_max: f64,
    tol: f64,
) -> Result<GeodesicTrace> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::Config(format!(
            "integrator tolerance {tol:.3e} outside [1e-12, 1e-4]"
        )));
    }
    if !(s_max > 0.0) {
        return Err(Error::Config("s_max must be positive".into()));
    }
    let f0 = metric.eval(x0, v0)?;
    if !(f0 > 0.0) || !f0.is_finite() {
        return Err(Error::Numerical(format!(
            "initial direction has F = {f0}; need F > 0"
        )));
    }
    let unit = v0.scaled(1.0 / f0);
    let mut p = metric.legendre(x0, unit)?;
    let h0 = metric.dual(x0, p)?;
    if !(h0 > 0.0) || !h0.is_finite() {
        return Err(Error::Numerical(format!("initial Hamiltonian H = {h0}")));
    }
    p = p.scaled(1.0 / h0);

    let mut state = State {
        chart: x0.chart,
        y: [x0.x[0], x0.x[1], p.p1, p.p2],
    };
    let mut s = 0.0;
    let mut samples = vec![record(metric, &state, 0.0)?];
    let max_step = (s_max / 16.0).min(0.2);
    let min_step = 1e-14 * s_max.max(1.0);
    let mut h = (tol.powf(0.2) * 2.0).min(max_step).max(min_step * 100.0);
    let mut accepted = 0usize;

    while s < s_max {
        h = h.min(s_max - s).min(max_step);
        match dopri_step(metric, &state, h, tol) {
            Ok((y_new, err)) => {
                if err <= 1.0 {
                    state.y = y_new;
                    s += h;
                    accepted += 1;
                    if accepted % RENORM_EVERY == 0 {
                        let energy = metric.dual(&state.point(), state.momentum())?;
                        if energy.is_finite() && energy > 0.0 {
                            state.y[2] /= energy;
                            state.y[3] /= energy;
                        }
                    }
                    // Chart hop past the switch radius.
                    if metric.atlas() == Atlas::SphereTwoCharts
                        && state.point().radius() > SWITCH_RADIUS
                    {
                        let moved = chart_transition(&state.point())?;
                        let p_new = push_covector([state.y[0], state.y[1]], state.momentum());
                        state = State {
                            chart: moved.chart,
                            y: [moved.x[0], moved.x[1], p_new.p1, p_new.p2],
                        };
                    }
                    samples.push(record(metric, &state, s)?);
                    // Domain exit for Funk/Hilbert metrics.
                    if let Some(domain) = metric.domain() {
                        if domain.gauge([state.y[0], state.y[1]]) >= EXIT_GAUGE {
                            return Ok(make_trace(samples, Termination::DomainExit, tol));
                        }
                    }
                    let grow = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    h *= grow;
                } else {
                    h *= (0.9 * err.powf(-0.2)).clamp(0.2, 0.9);
                }
            }
            Err(_) => {
                // A stage left the valid region; if we are crowding a Funk
                // boundary report the exit, otherwise shrink and retry.
                if let Some(domain) = metric.domain() {
                    if domain.gauge([state.y[0], state.y[1]]) >= 0.9 {
                        return Ok(make_trace(samples, Termination::DomainExit, tol));
                    }
                }
                h *= 0.5;
            }
        }
        if h < min_step {
            return Err(Error::StepUnderflow {
                s,
                trace: Box::new(make_trace(samples, Termination::Completed, tol)),
            });
        }
    }
    Ok(make_trace(samples, Termination::Completed, tol))
}

// ---------------------------------------------------------------------------
// Phase distance and closure detection
// ---------------------------------------------------------------------------

fn embed_sample(smp: &TraceSample) -> ([f64; 3], [f64; 3]) {
    let point = ChartPoint {
        chart: smp.chart,
        x: smp.x,
    };
    let pos = point.embed();
    let vel = point.embed_tangent(FiberVector::new(smp.v[0], smp.v[1]));
    let norm = (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2])
        .sqrt()
        .max(1e-300);
    (pos, [vel[0] / norm, vel[1] / norm, vel[2] / norm])
}

fn phase_distance(a: &([f64; 3], [f64; 3]), b: &([f64; 3], [f64; 3])) -> f64 {
    let dx = [a.0[0] - b.0[0], a.0[1] - b.0[1], a.0[2] - b.0[2]];
    let pos = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
    let dot = (a.1[0] * b.1[0] + a.1[1] * b.1[1] + a.1[2] * b.1[2]).clamp(-1.0, 1.0);
    let cross = [
        a.1[1] * b.1[2] - a.1[2] * b.1[1],
        a.1[2] * b.1[0] - a.1[0] * b.1[2],
        a.1[0] * b.1[1] - a.1[1] * b.1[0],
    ];
    let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    pos + cross_norm.atan2(dot)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub closed: bool,
    pub length: Option<f64>,
    /// Phase-space distance at the best detected return.
    pub return_gap: f64,
}

/// Phase distance to the initial point after re-integrating `sigma` from the
/// given sample with fixed RK4 steps.
fn refine_distance(
    metric: &Metric,
    start: &TraceSample,
    sigma: f64,
    target: &([f64; 3], [f64; 3]),
) -> f64 {
    let mut state = State {
        chart: start.chart,
        y: [start.x[0], start.x[1], start.p[0], start.p[1]],
    };
    let n = 24;
    let h = sigma / n as f64;
    for _ in 0..n {
        // Classic RK4 on the same right-hand side.
        let k1 = match rhs(metric, &state) {
            Ok(k) => k,
            Err(_) => return 1e9,
        };
        let s2 = State {
            chart: state.chart,
            y: add_scaled(&state.y, &[k1], &[0.5], h),
        };
        let k2 = match rhs(metric, &s2) {
            Ok(k) => k,
            Err(_) => return 1e9,
        };
        let s3 = State {
            chart: state.chart,
            y: add_scaled(&state.y, &[k1, k2], &[0.0, 0.5], h),
        };
        let k3 = match rhs(metric, &s3) {
            Ok(k) => k,
            Err(_) => return 1e9,
        };
        let s4 = State {
            chart: state.chart,
            y: add_scaled(&state.y, &[k1, k2, k3], &[0.0, 0.0, 1.0], h),
        };
        let k4 = match rhs(metric, &s4) {
            Ok(k) => k,
            Err(_) => return 1e9,
        };
        for i in 0..4 {
            state.y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if state.point().is_sphere_chart() && state.point().radius() > SWITCH_RADIUS {
            if let Ok(moved) = chart_transition(&state.point()) {
                let p_new = push_covector([state.y[0], state.y[1]], state.momentum());
                state = State {
                    chart: moved.chart,
                    y: [moved.x[0], moved.x[1], p_new.p1, p_new.p2],
                };
            }
        }
    }
    let smp = match record(metric, &state, 0.0) {
        Ok(s) => s,
        Err(_) => return 1e9,
    };
    phase_distance(&embed_sample(&smp), target)
}

/// Scan a trace for returns to its initial phase point and refine the best
/// candidates; reports the prime closed length when one passes `tol_close`.
pub fn detect_closure(metric: &Metric, trace: &GeodesicTrace, tol_close: f64) -> ClosureReport {
    let n = trace.samples.len();
    if n < 4 {
        return ClosureReport {
            closed: false,
            length: None,
            return_gap: f64::MAX,
        };
    }
    let target = embed_sample(&trace.samples[0]);
    let d: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| phase_distance(&embed_sample(s), &target))
        .collect();
    let mean_ds = trace.total_length / (n - 1) as f64;
    let s_guard = 10.0 * mean_ds;

    let mut best_gap = f64::MAX;
    for (i, &di) in d.iter().enumerate().skip(1) {
        if trace.samples[i].s > s_guard {
            best_gap = best_gap.min(di);
        }
    }

    let mut refinements = 0;
    for i in 1..n - 1 {
        if trace.samples[i].s <= s_guard {
            continue;
        }
        let local_min = d[i] <= d[i - 1] && d[i] <= d[i + 1];
        if !local_min || d[i] > 0.5 {
            continue;
        }
        if refinements >= 24 {
            break;
        }
        refinements += 1;
        let start = &trace.samples[i - 1];
        let span = trace.samples[(i + 1).min(n - 1)].s - start.s;
        // Golden-section minimization of the refined phase distance.
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let (mut a, mut b) = (0.0, span);
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = refine_distance(metric, start, x1, &target);
        let mut f2 = refine_distance(metric, start, x2, &target);
        for _ in 0..40 {
            if f1 > f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = refine_distance(metric, start, x2, &target);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = refine_distance(metric, start, x1, &target);
            }
        }
        let (sigma, gap) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        best_gap = best_gap.min(gap);
        if gap <= tol_close {
            return ClosureReport {
                closed: true,
                length: Some(start.s + sigma),
                return_gap: gap,
            };
        }
    }
    ClosureReport {
        closed: false,
        length: None,
        return_gap: best_gap,
    }
}

// ---------------------------------------------------------------------------
// Zoll scan
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LaunchSpec {
    pub x: ChartPoint,
    pub direction_angle: f64,
}

#[derive(Clone, Debug, Serialize)]
pub enum GeodesicOutcome {
    Closure(ClosureReport),
    Failed { error: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct ZollGeodesic {
    pub index: usize,
    pub launch: LaunchSpec,
    pub outcome: GeodesicOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ZollVerdict {
    Zoll,
    NotZoll,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZollReport {
    pub verdict: ZollVerdict,
    pub n_geodesics: usize,
    pub n_closed: usize,
    pub n_failed: usize,
    pub median_length: Option<f64>,
    pub length_spread: Option<f64>,
    pub seed: u64,
    pub geodesics: Vec<ZollGeodesic>,
}

/// Quasi-random launch states over phase space (sphere atlas).
pub fn sphere_launches(count: usize, seed: u64) -> Vec<LaunchSpec> {
    let offset = splitmix64(seed) % 8192;
    (0..count)
        .map(|i| {
            let idx = offset + i as u64;
            let z = 1.0 - 2.0 * halton(idx, 2);
            let phi = TAU * halton(idx, 3);
            let angle = TAU * halton(idx, 5);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let e = [rho * phi.cos(), rho * phi.sin(), z];
            let x = if z >= 0.0 {
                ChartPoint::north(e[0] / (1.0 + z), e[1] / (1.0 + z))
            } else {
                ChartPoint::south(e[0] / (1.0 - z), e[1] / (1.0 - z))
            };
            LaunchSpec {
                x,
                direction_angle: angle,
            }
        })
        .collect()
}

/// Launch `n_geodesics` quasi-random geodesics and test the Zoll property:
/// all closed, all of the same length.
pub fn zoll_scan(
    metric: &Metric,
    n_geodesics: usize,
    s_max: f64,
    tols: &FlowTols,
    seed: u64,
) -> Result<ZollReport> {
    if metric.atlas() != Atlas::SphereTwoCharts {
        return Err(Error::Config(
            "zoll_scan requires the sphere two-chart atlas".into(),
        ));
    }
    let launches = sphere_launches(n_geodesics, seed);
    let geodesics: Vec<ZollGeodesic> = launches
        .into_par_iter()
        .enumerate()
        .map(|(index, launch)| {
            let v = FiberVector::from_angle(launch.direction_angle);
            let outcome = match integrate_geodesic(metric, &launch.x, v, s_max, tols.step_tol) {
                Ok(trace) => GeodesicOutcome::Closure(detect_closure(
                    metric,
                    &trace,
                    tols.close_tol,
                )),
                Err(e) => GeodesicOutcome::Failed {
                    error: e.to_string(),
                },
            };
            ZollGeodesic {
                index,
                launch,
                outcome,
            }
        })
        .collect();

    let mut lengths: Vec<f64> = Vec::new();
    let mut n_failed = 0usize;
    let mut all_closed = true;
    for g in &geodesics {
        match &g.outcome {
            GeodesicOutcome::Closure(c) => {
                if let (true, Some(len)) = (c.closed, c.length) {
                    lengths.push(len);
                } else {
                    all_closed = false;
                }
            }
            GeodesicOutcome::Failed { .. } => n_failed += 1,
        }
    }
    let (median_length, length_spread) = if lengths.is_empty() {
        (None, None)
    } else {
        let mut sorted = lengths.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let spread = sorted
            .iter()
            .fold(0.0f64, |m, &l| m.max((l - median).abs()));
        (Some(median), Some(spread))
    };
    let verdict = if n_failed > 0 {
        ZollVerdict::Inconclusive
    } else if all_closed && length_spread.map_or(false, |s| s <= tols.length_tol) {
        ZollVerdict::Zoll
    } else {
        ZollVerdict::NotZoll
    };
    Ok(ZollReport {
        verdict,
        n_geodesics,
        n_closed: lengths.len(),
        n_failed,
        median_length,
        length_spread,
        seed,
        geodesics,
    })
}

// ---------------------------------------------------------------------------
// Reversibility and straightness
// ---------------------------------------------------------------------------

fn point_segment_distance(q: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let aq = [q[0] - a[0], q[1] - a[1], q[2] - a[2]];
    let ab2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if ab2 > 0.0 {
        ((aq[0] * ab[0] + aq[1] * ab[1] + aq[2] * ab[2]) / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2)).sqrt()
}

/// One-sided Hausdorff distance from the points of `from` to the polyline of `to`.
fn one_sided_hausdorff(from: &[[f64; 3]], to: &[[f64; 3]]) -> f64 {
    let mut worst = 0.0f64;
    for &q in from {
        let mut best = f64::MAX;
        for w in to.windows(2) {
            best = best.min(point_segment_distance(q, w[0], w[1]));
            if best == 0.0 {
                break;
            }
        }
        if to.len() == 1 {
            best = point_segment_distance(q, to[0], to[0]);
        }
        worst = worst.max(best);
    }
    worst
}

fn embedded_points(trace: &GeodesicTrace) -> Vec<[f64; 3]> {
    trace
        .samples
        .iter()
        .map(|s| {
            ChartPoint {
                chart: s.chart,
                x: s.x,
            }
            .embed()
        })
        .collect()
}

/// Geodesic reversibility test: integrate from the endpoint with the reversed
/// direction for the Finsler length of the reversed curve, and measure the
/// one-sided Hausdorff distance from the original point set to the new trace.
pub fn reversibility_residual(metric: &Metric, trace: &GeodesicTrace) -> Result<f64> {
    if trace.samples.len() < 2 {
        return Err(Error::Numerical("trace too short to reverse".into()));
    }
    // Finsler length of the reversed curve: ∫ F(x, −v) ds along the trace.
    let mut rev_length = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for smp in &trace.samples {
        let x = ChartPoint {
            chart: smp.chart,
            x: smp.x,
        };
        let f = metric.eval(&x, FiberVector::new(-smp.v[0], -smp.v[1]))?;
        if let Some((s_prev, f_prev)) = prev {
            rev_length += 0.5 * (f + f_prev) * (smp.s - s_prev);
        }
        prev = Some((smp.s, f));
    }
    let end = trace.last();
    let x_end = ChartPoint {
        chart: end.chart,
        x: end.x,
    };
    let reversed = integrate_geodesic(
        metric,
        &x_end,
        FiberVector::new(-end.v[0], -end.v[1]),
        rev_length,
        trace.tol,
    )?;
    let original = embedded_points(trace);
    let new_points = embedded_points(&reversed);
    Ok(one_sided_hausdorff(&original, &new_points))
}

/// Max distance from the trace samples to the chord through its endpoints
/// (planar charts only).
pub fn straightness_residual(trace: &GeodesicTrace) -> Result<f64> {
    if trace.samples.len() < 3 {
        return Err(Error::Numerical(
            "straightness needs at least 3 samples".into(),
        ));
    }
    if trace.samples.iter().any(|s| s.chart != ChartId::Plane) {
        return Err(Error::Config(
            "straightness residual is defined on the planar chart".into(),
        ));
    }
    let a = trace.samples.first().unwrap().x;
    let b = trace.samples.last().unwrap().x;
    let chord = [b[0] - a[0], b[1] - a[1]];
    let len = chord[0].hypot(chord[1]);
    if len < 1e-12 {
        return Err(Error::Numerical("degenerate chord".into()));
    }
    let mut worst = 0.0f64;
    for smp in &trace.samples {
        let d = ((smp.x[0] - a[0]) * chord[1] - (smp.x[1] - a[1]) * chord[0]).abs() / len;
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;

    #[test]
    fn euclidean_straight_segment() {
        let m = Metric::euclidean();
        let trace = integrate_geodesic(
            &m,
            &ChartPoint::plane(0.0, 0.0),
            FiberVector::new(1.0, 0.0),
            2.0,
            1e-9,
        )
        .unwrap();
        let end = trace.last();
        assert!((end.x[0] - 2.0).abs() < 1e-9, "end {:?}", end.x);
        assert!(end.x[1].abs() < 1e-12);
        assert!(trace.energy_drift <= 1e-8);
        assert!(straightness_residual(&trace).unwrap() < 1e-10);
        let closure = detect_closure(&m, &trace, 1e-5);
        assert!(!closure.closed);
    }

    #[test]
    fn great_circle_closes_at_two_pi() {
        let m = Metric::sphere_round();
        let trace = integrate_geodesic(
            &m,
            &ChartPoint::north(0.0, 0.0),
            FiberVector::new(1.0, 0.0),
            7.0,
            1e-9,
        )
        .unwrap();
        assert!(trace.energy_drift <= 1e-8, "drift {}", trace.energy_drift);
        // Analytic great circle through the pole: x(s) = (tan(s/2), 0).
        for smp in trace.samples.iter().take_while(|s| s.s < 1.9) {
            let expect = (smp.s / 2.0).tan();
            assert!(
                (smp.x[0] - expect).abs() < 1e-7 && smp.x[1].abs() < 1e-9,
                "s = {}: {:?}",
                smp.s,
                smp.x
            );
        }
        // The trajectory must have hopped charts on the far side.
        assert!(trace.samples.iter().any(|s| s.chart == ChartId::South));
        let closure = detect_closure(&m, &trace, 1e-5);
        assert!(closure.closed, "gap {}", closure.return_gap);
        let len = closure.length.unwrap();
        assert!((len - TAU).abs() < 1e-6, "length {len}");
    }

    #[test]
    fn round_sphere_is_zoll() {
        let m = Metric::sphere_round();
        let report = zoll_scan(&m, 12, 7.0, &FlowTols::default(), 0).unwrap();
        assert_eq!(report.verdict, ZollVerdict::Zoll, "{report:?}");
        assert!(report.length_spread.unwrap() <= 1e-5);
        assert!((report.median_length.unwrap() - TAU).abs() < 1e-5);
    }

    #[test]
    fn euclidean_reversibility_is_tiny() {
        let m = Metric::euclidean();
        let trace = integrate_geodesic(
            &m,
            &ChartPoint::plane(0.1, -0.2),
            FiberVector::new(0.6, 0.8),
            1.5,
            1e-9,
        )
        .unwrap();
        let residual = reversibility_residual(&m, &trace).unwrap();
        assert!(residual < 1e-9, "residual {residual}");
    }

    #[test]
    fn rejects_bad_tolerances() {
        let m = Metric::euclidean();
        let x = ChartPoint::plane(0.0, 0.0);
        assert!(integrate_geodesic(&m, &x, FiberVector::new(1.0, 0.0), 1.0, 1e-2).is_err());
        assert!(integrate_geodesic(&m, &x, FiberVector::new(1.0, 0.0), -1.0, 1e-8).is_err());
        assert!(integrate_geodesic(&m, &x, FiberVector::new(0.0, 0.0), 1.0, 1e-8).is_err());
    }
}
