//! Decomposition of a metric into its symmetrization plus a 1-form:
//! fiberwise first-harmonic extraction of β = L − L̄, closedness (curl) and
//! exactness (potential reconstruction) tests, and the end-to-end
//! theorem-verification pipeline.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{
    integrate_geodesic, reversibility_residual, sphere_launches, zoll_scan, FlowTols, ZollReport,
    ZollVerdict,
};
use crate::metrics::{chart_transition, Atlas, ChartId, ChartPoint, Metric, Region};
use crate::norms::{FiberCovector, FiberVector, TAU};
use crate::util::{cumulative_integral, halton, splitmix64};
use crate::volume::{bm_compare, BmReport, BmVerdict};

/// Radius of each chart's core grid for sphere-atlas pipelines. The two
/// cores overlap in the ring 1/1.2 ≤ |x| ≤ 1.2 and cover the sphere.
pub const CHART_CORE_RADIUS: f64 = 1.2;

/// Curl threshold above which potential reconstruction refuses to run.
pub const CURL_CLOSED_TOL: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridGeom {
    pub chart: ChartId,
    pub nx: usize,
    pub ny: usize,
    pub x0: [f64; 2],
    pub h: [f64; 2],
}

impl GridGeom {
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.x0[0] + i as f64 * self.h[0],
            self.x0[1] + j as f64 * self.h[1],
        ]
    }

    pub fn chart_point(&self, i: usize, j: usize) -> ChartPoint {
        ChartPoint {
            chart: self.chart,
            x: self.point(i, j),
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index of the node nearest to `q` (clamped to the grid).
    fn nearest(&self, q: [f64; 2]) -> (usize, usize) {
        let fi = ((q[0] - self.x0[0]) / self.h[0]).round();
        let fj = ((q[1] - self.x0[1]) / self.h[1]).round();
        (
            (fi.max(0.0) as usize).min(self.nx - 1),
            (fj.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Catmull–Rom bicubic interpolation; None when the 4×4 stencil would
    /// leave the grid.
    fn bicubic(&self, values: &[f64], q: [f64; 2]) -> Option<f64> {
        let gx = (q[0] - self.x0[0]) / self.h[0];
        let gy = (q[1] - self.x0[1]) / self.h[1];
        let i = gx.floor() as isize;
        let j = gy.floor() as isize;
        if i < 1 || j < 1 || i + 2 >= self.nx as isize || j + 2 >= self.ny as isize {
            return None;
        }
        let u = gx - i as f64;
        let v = gy - j as f64;
        let spline = |p: [f64; 4], t: f64| -> f64 {
            0.5 * (2.0 * p[1]
                + (-p[0] + p[2]) * t
                + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
                + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * t * t * t)
        };
        let mut rows = [0.0; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            let jj = (j - 1 + r as isize) as usize;
            let p = [
                values[self.idx((i - 1) as usize, jj)],
                values[self.idx(i as usize, jj)],
                values[self.idx((i + 1) as usize, jj)],
                values[self.idx((i + 2) as usize, jj)],
            ];
            *row = spline(p, u);
        }
        Some(spline(rows, v))
    }
}

/// Sampled 1-form on one chart grid.
#[derive(Clone, Debug, Serialize)]
pub struct OneFormChart {
    pub geom: GridGeom,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    /// Fiberwise linearity residual of the extraction at each node.
    pub residual: Vec<f64>,
}

/// 1-form field over the atlas (one chart grid for the plane, two for S²).
#[derive(Clone, Debug, Serialize)]
pub struct OneFormField {
    pub charts: Vec<OneFormChart>,
}

impl OneFormField {
    pub fn max_residual(&self) -> f64 {
        self.charts
            .iter()
            .flat_map(|c| c.residual.iter())
            .fold(0.0f64, |m, &r| m.max(r))
    }

    pub fn max_component(&self) -> f64 {
        self.charts
            .iter()
            .flat_map(|c| c.b1.iter().chain(c.b2.iter()))
            .fold(0.0f64, |m, &b| m.max(b.abs()))
    }
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Least-squares first-harmonic fit of the odd part of the fiber norm:
/// g(θ) = (F(x,u(θ)) − F(x,−u(θ)))/2 ≈ b·u(θ). Returns (b, max residual).
pub fn extract_beta_at(metric: &Metric, x: &ChartPoint, n: usize) -> Result<(FiberCovector, f64)> {
    if n < 256 || n % 2 != 0 {
        return Err(Error::Config(format!(
            "beta extraction needs an even angular grid of at least 256, got {n}"
        )));
    }
    let fiber = metric.fiber_eval(x)?;
    let mut f = Vec::with_capacity(n);
    for k in 0..n {
        let value = fiber.eval(FiberVector::from_angle(TAU * k as f64 / n as f64))?;
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite fiber value at ({}, {})",
                x.x[0], x.x[1]
            )));
        }
        f.push(value);
    }
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    let odd: Vec<f64> = (0..n).map(|k| 0.5 * (f[k] - f[(k + n / 2) % n])).collect();
    for (k, &g) in odd.iter().enumerate() {
        let theta = TAU * k as f64 / n as f64;
        b1 += g * theta.cos();
        b2 += g * theta.sin();
    }
    b1 *= 2.0 / n as f64;
    b2 *= 2.0 / n as f64;
    let mut residual = 0.0f64;
    for (k, &g) in odd.iter().enumerate() {
        let theta = TAU * k as f64 / n as f64;
        residual = residual.max((g - b1 * theta.cos() - b2 * theta.sin()).abs());
    }
    Ok((FiberCovector::new(b1, b2), residual))
}

fn chart_grids(metric: &Metric, grid_n: usize) -> Result<Vec<GridGeom>> {
    if grid_n < 5 {
        return Err(Error::Config("decomposition grid needs at least 5 nodes".into()));
    }
    match metric.atlas() {
        Atlas::SphereTwoCharts => {
            let h = 2.0 * CHART_CORE_RADIUS / (grid_n - 1) as f64;
            Ok([ChartId::North, ChartId::South]
                .iter()
                .map(|&chart| GridGeom {
                    chart,
                    nx: grid_n,
                    ny: grid_n,
                    x0: [-CHART_CORE_RADIUS, -CHART_CORE_RADIUS],
                    h: [h, h],
                })
                .collect())
        }
        Atlas::Plane => {
            let (lo, hi) = match metric.region() {
                Region::Rect { lo, hi } => (lo, hi),
                Region::Sphere => {
                    return Err(Error::Config("planar metric with sphere region".into()))
                }
            };
            Ok(vec![GridGeom {
                chart: ChartId::Plane,
                nx: grid_n,
                ny: grid_n,
                x0: lo,
                h: [
                    (hi[0] - lo[0]) / (grid_n - 1) as f64,
                    (hi[1] - lo[1]) / (grid_n - 1) as f64,
                ],
            }])
        }
    }
}

/// Extract β on the pipeline grids (chart cores for S², the region for the
/// plane).
pub fn extract_beta_field(metric: &Metric, grid_n: usize, n_fiber: usize) -> Result<OneFormField> {
    let grids = chart_grids(metric, grid_n)?;
    let mut charts = Vec::new();
    for geom in grids {
        let nodes: Vec<(usize, usize)> = (0..geom.ny)
            .flat_map(|j| (0..geom.nx).map(move |i| (i, j)))
            .collect();
        let results: Vec<Result<(FiberCovector, f64)>> = nodes
            .par_iter()
            .map(|&(i, j)| extract_beta_at(metric, &geom.chart_point(i, j), n_fiber))
            .collect();
        let mut b1 = vec![0.0; geom.nx * geom.ny];
        let mut b2 = vec![0.0; geom.nx * geom.ny];
        let mut residual = vec![0.0; geom.nx * geom.ny];
        for (&(i, j), result) in nodes.iter().zip(results) {
            let (b, r) = result?;
            let idx = geom.idx(i, j);
            b1[idx] = b.p1;
            b2[idx] = b.p2;
            residual[idx] = r;
        }
        charts.push(OneFormChart {
            geom,
            b1,
            b2,
            residual,
        });
    }
    Ok(OneFormField { charts })
}

// ---------------------------------------------------------------------------
// Closedness and exactness
// ---------------------------------------------------------------------------

/// Max |∂₁β₂ − ∂₂β₁| over interior nodes, five-point (4th order) stencils.
pub fn curl_residual(field: &OneFormField) -> Result<f64> {
    let mut worst = 0.0f64;
    for chart in &field.charts {
        let g = &chart.geom;
        if g.nx < 5 || g.ny < 5 {
            return Err(Error::Config(format!(
                "grid too coarse for the curl stencil: {}×{}",
                g.nx, g.ny
            )));
        }
        for j in 2..g.ny - 2 {
            for i in 2..g.nx - 2 {
                let d1_b2 = (-chart.b2[g.idx(i + 2, j)] + 8.0 * chart.b2[g.idx(i + 1, j)]
                    - 8.0 * chart.b2[g.idx(i - 1, j)]
                    + chart.b2[g.idx(i - 2, j)])
                    / (12.0 * g.h[0]);
                let d2_b1 = (-chart.b1[g.idx(i, j + 2)] + 8.0 * chart.b1[g.idx(i, j + 1)]
                    - 8.0 * chart.b1[g.idx(i, j - 1)]
                    + chart.b1[g.idx(i, j - 2)])
                    / (12.0 * g.h[1]);
                worst = worst.max((d1_b2 - d2_b1).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialChart {
    pub geom: GridGeom,
    pub f: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Potential {
    pub charts: Vec<PotentialChart>,
    /// Max cell circulation of β (path-independence audit).
    pub loop_residual: f64,
    /// Sphere atlas: worst overlap disagreement after constant stitching.
    pub stitch_residual: Option<f64>,
    pub basepoint: ChartPoint,
}

impl Potential {
    pub fn chart(&self, id: ChartId) -> Option<&PotentialChart> {
        self.charts.iter().find(|c| c.geom.chart == id)
    }
}

/// Integrate β along axis-first paths from the basepoint node.
fn integrate_chart(chart: &OneFormChart, origin: (usize, usize)) -> Vec<f64> {
    let g = &chart.geom;
    let (i0, j0) = origin;
    let mut f = vec![0.0; g.nx * g.ny];
    // Base row: ∫ b1 dx1 along j0.
    let row: Vec<f64> = (0..g.nx).map(|i| chart.b1[g.idx(i, j0)]).collect();
    let row_cum = cumulative_integral(&row, g.h[0]);
    // Columns: ∫ b2 dx2 from the base row.
    for i in 0..g.nx {
        let col: Vec<f64> = (0..g.ny).map(|j| chart.b2[g.idx(i, j)]).collect();
        let col_cum = cumulative_integral(&col, g.h[1]);
        for j in 0..g.ny {
            f[g.idx(i, j)] = (row_cum[i] - row_cum[i0]) + (col_cum[j] - col_cum[j0]);
        }
    }
    f
}

fn max_cell_circulation(chart: &OneFormChart) -> f64 {
    let g = &chart.geom;
    let mut worst = 0.0f64;
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let bottom = 0.5 * (chart.b1[g.idx(i, j)] + chart.b1[g.idx(i + 1, j)]) * g.h[0];
            let right = 0.5 * (chart.b2[g.idx(i + 1, j)] + chart.b2[g.idx(i + 1, j + 1)]) * g.h[1];
            let top = 0.5 * (chart.b1[g.idx(i, j + 1)] + chart.b1[g.idx(i + 1, j + 1)]) * g.h[0];
            let left = 0.5 * (chart.b2[g.idx(i, j)] + chart.b2[g.idx(i, j + 1)]) * g.h[1];
            worst = worst.max((bottom + right - top - left).abs());
        }
    }
    worst
}

/// Reconstruct f with β = df by trapezoid-order-matched path integration.
/// Fails with NOT_CLOSED when the curl residual exceeds the threshold. On the
/// sphere the south chart is stitched to the north through the overlap ring
/// and the worst disagreement is reported.
pub fn reconstruct_potential(field: &OneFormField, basepoint: &ChartPoint) -> Result<Potential> {
    let curl = curl_residual(field)?;
    if curl > CURL_CLOSED_TOL {
        return Err(Error::NotClosed {
            curl_residual: curl,
            threshold: CURL_CLOSED_TOL,
        });
    }
    let loop_residual = field
        .charts
        .iter()
        .map(max_cell_circulation)
        .fold(0.0f64, f64::max);

    let mut charts = Vec::new();
    let mut stitch_residual = None;

    let base_chart_idx = field
        .charts
        .iter()
        .position(|c| c.geom.chart == basepoint.chart)
        .ok_or_else(|| {
            Error::Config(format!(
                "basepoint chart {} has no grid",
                basepoint.chart.name()
            ))
        })?;
    let base_geom = field.charts[base_chart_idx].geom;
    let origin = base_geom.nearest(basepoint.x);
    let f_base = integrate_chart(&field.charts[base_chart_idx], origin);
    charts.push(PotentialChart {
        geom: base_geom,
        f: f_base,
    });

    for (idx, chart) in field.charts.iter().enumerate() {
        if idx == base_chart_idx {
            continue;
        }
        let g = &chart.geom;
        let center = (g.nx / 2, g.ny / 2);
        let mut f_other = integrate_chart(chart, center);
        // Stitch the additive constant through the chart overlap.
        let base = &charts[0];
        let mut diffs = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let y = g.point(i, j);
                let r = y[0].hypot(y[1]);
                if !(0.87..=1.15).contains(&r) {
                    continue;
                }
                let image = match chart_transition(&ChartPoint {
                    chart: g.chart,
                    x: y,
                }) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                if let Some(value) = base.geom.bicubic(&base.f, image.x) {
                    diffs.push(value - f_other[g.idx(i, j)]);
                }
            }
        }
        if diffs.is_empty() {
            return Err(Error::Numerical(
                "empty chart overlap; cannot stitch the potential".into(),
            ));
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        for value in &mut f_other {
            *value += mean;
        }
        let worst = diffs
            .iter()
            .fold(0.0f64, |m, &d| m.max((d - mean).abs()));
        stitch_residual = Some(stitch_residual.unwrap_or(0.0f64).max(worst));
        charts.push(PotentialChart {
            geom: *g,
            f: f_other,
        });
    }

    Ok(Potential {
        charts,
        loop_residual,
        stitch_residual,
        basepoint: *basepoint,
    })
}

// ---------------------------------------------------------------------------
// Theorem verification pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stage {
    Pass,
    Fail,
    Skipped,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Partial,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Zoll stage: number of geodesics and trace length.
    pub n_geodesics: usize,
    pub zoll_smax: f64,
    pub flow: FlowTols,
    /// Reversibility stage: number of probe traces, their length, threshold.
    pub n_reverse: usize,
    pub rev_smax: f64,
    pub rev_tol: f64,
    /// Volume stage quadrature.
    pub n_base: usize,
    pub n_fiber: usize,
    /// Decomposition grid nodes per axis and angular samples per fiber.
    pub grid_n: usize,
    pub extract_fiber_n: usize,
    pub linearity_tol: f64,
    pub loop_tol: f64,
    pub overlap_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_geodesics: 50,
            zoll_smax: 7.0,
            flow: FlowTols::default(),
            n_reverse: 8,
            rev_smax: 0.5,
            rev_tol: 1e-4,
            n_base: 48,
            n_fiber: 512,
            grid_n: 61,
            extract_fiber_n: 512,
            linearity_tol: 1e-6,
            loop_tol: 1e-4,
            overlap_tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReversibilityStats {
    pub n_traces: usize,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionStats {
    pub max_linearity_residual: f64,
    pub max_beta_component: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessStats {
    pub curl_residual: f64,
    pub loop_residual: Option<f64>,
    pub stitch_residual: Option<f64>,
    /// RP² flag: worst |f(a(x)) − f(x)| over the grid, after mean alignment.
    pub antipodal_residual: Option<f64>,
}

/// Structured verdict of the verification pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub metric: String,
    pub seed: u64,
    pub zoll: Option<ZollReport>,
    pub zoll_stage: Stage,
    pub reversibility: ReversibilityStats,
    pub reversibility_stage: Stage,
    pub volume_equality: BmReport,
    pub volume_stage: Stage,
    pub decomposition: DecompositionStats,
    pub decomposition_stage: Stage,
    pub exactness: ExactnessStats,
    pub exactness_stage: Stage,
    pub beta: OneFormField,
    pub potential: Option<Potential>,
    pub config: VerifyConfig,
    pub verdict: Verdict,
}

fn reversibility_stage(metric: &Metric, config: &VerifyConfig) -> ReversibilityStats {
    let mut residuals = Vec::new();
    let mut failures = Vec::new();
    let launches: Vec<(ChartPoint, f64)> = match metric.atlas() {
        Atlas::SphereTwoCharts => sphere_launches(config.n_reverse, config.seed + 1)
            .into_iter()
            .map(|l| (l.x, l.direction_angle))
            .collect(),
        Atlas::Plane => {
            let points = metric.sample_base_points(config.n_reverse, config.seed + 1);
            let offset = splitmix64(config.seed + 1) % 8192;
            points
                .into_iter()
                .enumerate()
                .map(|(i, x)| (x, TAU * halton(offset + i as u64, 5)))
                .collect()
        }
    };
    let results: Vec<std::result::Result<f64, String>> = launches
        .par_iter()
        .map(|&(x, angle)| {
            let v = FiberVector::from_angle(angle);
            integrate_geodesic(metric, &x, v, config.rev_smax, config.flow.step_tol)
                .and_then(|trace| reversibility_residual(metric, &trace))
                .map_err(|e| e.to_string())
        })
        .collect();
    for r in results {
        match r {
            Ok(residual) => residuals.push(residual),
            Err(e) => failures.push(e),
        }
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    ReversibilityStats {
        n_traces: launches.len(),
        residuals,
        max_residual,
        failures,
    }
}

fn antipodal_potential_residual(potential: &Potential) -> Option<f64> {
    // f on RP² must descend through the antipodal map (north, x) ↦ (south, −x).
    let north = potential.chart(ChartId::North)?;
    let south = potential.chart(ChartId::South)?;
    let mut diffs = Vec::new();
    for j in 0..north.geom.ny {
        for i in 0..north.geom.nx {
            let x = north.geom.point(i, j);
            if x[0].hypot(x[1]) > 1.0 {
                continue;
            }
            if let Some(value) = south.geom.bicubic(&south.f, [-x[0], -x[1]]) {
                diffs.push(value - north.f[north.geom.idx(i, j)]);
            }
        }
    }
    if diffs.is_empty() {
        return None;
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Some(
        diffs
            .iter()
            .fold(0.0f64, |m, &d| m.max((d - mean).abs())),
    )
}

/// Run the full verification chain on a metric: Zoll scan, geodesic
/// reversibility, volume equality against the symmetrization, fiberwise
/// linearity of the difference, closedness and exactness of the extracted
/// 1-form. Stage failures are recorded, not thrown.
pub fn verify_theorem(metric: &Metric, config: &VerifyConfig) -> Result<TheoremReport> {
    // Stage 1: Zoll (sphere atlas only; planar runs flag the report PARTIAL).
    let (zoll, zoll_stage) = if metric.atlas() == Atlas::SphereTwoCharts {
        match zoll_scan(
            metric,
            config.n_geodesics,
            config.zoll_smax,
            &config.flow,
            config.seed,
        ) {
            Ok(report) => {
                let stage = match report.verdict {
                    ZollVerdict::Zoll => Stage::Pass,
                    ZollVerdict::NotZoll => Stage::Fail,
                    ZollVerdict::Inconclusive => Stage::Inconclusive,
                };
                (Some(report), stage)
            }
            Err(e) => {
                return Err(e);
            }
        }
    } else {
        (None, Stage::Skipped)
    };

    // Stage 2: geodesic reversibility.
    let reversibility = reversibility_stage(metric, config);
    let reversibility_stage_verdict = if reversibility.max_residual > config.rev_tol {
        Stage::Fail
    } else if !reversibility.failures.is_empty() || reversibility.residuals.is_empty() {
        Stage::Inconclusive
    } else {
        Stage::Pass
    };

    // Stage 3: Holmes–Thompson volume vs the symmetrization.
    let volume_equality = bm_compare(metric, &metric.region(), config.n_base, config.n_fiber)?;
    let volume_stage = match volume_equality.verdict {
        BmVerdict::Equal => Stage::Pass,
        BmVerdict::Strict => Stage::Fail,
        BmVerdict::Inconclusive => Stage::Inconclusive,
    };

    // Stage 4: fiberwise linearity of L − L̄.
    let beta = extract_beta_field(metric, config.grid_n, config.extract_fiber_n)?;
    let decomposition = DecompositionStats {
        max_linearity_residual: beta.max_residual(),
        max_beta_component: beta.max_component(),
    };
    let decomposition_stage = if decomposition.max_linearity_residual <= config.linearity_tol {
        Stage::Pass
    } else {
        Stage::Fail
    };

    // Stage 5: closedness, then exactness by path integration.
    let curl = curl_residual(&beta)?;
    let basepoint = match metric.atlas() {
        Atlas::SphereTwoCharts => ChartPoint::north(0.0, 0.0),
        Atlas::Plane => {
            let grids = chart_grids(metric, config.grid_n)?;
            let g = grids[0];
            ChartPoint::plane(
                g.x0[0] + g.h[0] * ((g.nx - 1) / 2) as f64,
                g.x0[1] + g.h[1] * ((g.ny - 1) / 2) as f64,
            )
        }
    };
    let (potential, exactness, exactness_stage) = match reconstruct_potential(&beta, &basepoint) {
        Ok(potential) => {
            let antipodal = if metric.antipodal() {
                antipodal_potential_residual(&potential)
            } else {
                None
            };
            let stats = ExactnessStats {
                curl_residual: curl,
                loop_residual: Some(potential.loop_residual),
                stitch_residual: potential.stitch_residual,
                antipodal_residual: antipodal,
            };
            let mut ok = potential.loop_residual <= config.loop_tol;
            if let Some(stitch) = potential.stitch_residual {
                ok &= stitch <= config.overlap_tol;
            }
            if let Some(anti) = antipodal {
                ok &= anti <= config.overlap_tol;
            }
            let stage = if ok { Stage::Pass } else { Stage::Fail };
            (Some(potential), stats, stage)
        }
        Err(Error::NotClosed { curl_residual, .. }) => (
            None,
            ExactnessStats {
                curl_residual,
                loop_residual: None,
                stitch_residual: None,
                antipodal_residual: None,
            },
            Stage::Fail,
        ),
        Err(e) => return Err(e),
    };

    let stages = [
        zoll_stage,
        reversibility_stage_verdict,
        volume_stage,
        decomposition_stage,
        exactness_stage,
    ];
    let verdict = if stages.contains(&Stage::Fail) {
        Verdict::Fail
    } else if stages.contains(&Stage::Inconclusive) {
        Verdict::Inconclusive
    } else if stages.contains(&Stage::Skipped) {
        Verdict::Partial
    } else {
        Verdict::Pass
    };

    Ok(TheoremReport {
        metric: metric.label().to_string(),
        seed: config.seed,
        zoll,
        zoll_stage,
        reversibility,
        reversibility_stage: reversibility_stage_verdict,
        volume_equality,
        volume_stage,
        decomposition,
        decomposition_stage,
        exactness,
        exactness_stage,
        beta,
        potential,
        config: config.clone(),
        verdict,
    })
}

/// CSV rows `x1,x2,b1,b2,f` for one chart of a decomposition.
pub fn decomposition_csv(beta: &OneFormChart, potential: Option<&PotentialChart>) -> String {
    let mut out = String::from("x1,x2,b1,b2,f\n");
    let g = &beta.geom;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let x = g.point(i, j);
            let idx = g.idx(i, j);
            let f = potential.map_or(0.0, |p| p.f[idx]);
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                x[0], x[1], beta.b1[idx], beta.b2[idx], f
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::parse_spec;

    fn grid_field(
        lo: [f64; 2],
        hi: [f64; 2],
        n: usize,
        b: impl Fn([f64; 2]) -> [f64; 2],
    ) -> OneFormField {
        let geom = GridGeom {
            chart: ChartId::Plane,
            nx: n,
            ny: n,
            x0: lo,
            h: [
                (hi[0] - lo[0]) / (n - 1) as f64,
                (hi[1] - lo[1]) / (n - 1) as f64,
            ],
        };
        let mut b1 = vec![0.0; n * n];
        let mut b2 = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let value = b(geom.point(i, j));
                b1[geom.idx(i, j)] = value[0];
                b2[geom.idx(i, j)] = value[1];
            }
        }
        OneFormField {
            charts: vec![OneFormChart {
                geom,
                b1,
                b2,
                residual: vec![0.0; n * n],
            }],
        }
    }

    #[test]
    fn extract_beta_from_linear_asymmetry() {
        let m = parse_spec("[metric] kind=randers; a=conformal(1); b=covector(0.3, 0)").unwrap();
        let (b, residual) = extract_beta_at(&m, &ChartPoint::plane(0.2, 0.5), 256).unwrap();
        assert!((b.p1 - 0.3).abs() < 1e-12 && b.p2.abs() < 1e-12);
        assert!(residual <= 1e-12, "residual {residual}");
        let e = Metric::euclidean();
        let (b0, r0) = extract_beta_at(&e, &ChartPoint::plane(0.2, 0.5), 256).unwrap();
        assert_eq!((b0.p1, b0.p2, r0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn extract_beta_sees_cos3_as_nonlinear() {
        let m = parse_spec("[metric] kind=minkowski; h = 1 + 0.1*cos(3*t)").unwrap();
        let (b, residual) = extract_beta_at(&m, &ChartPoint::plane(0.1, 0.1), 512).unwrap();
        // cos3θ is orthogonal to the first harmonics on the grid.
        assert!(b.p1.abs() < 1e-12 && b.p2.abs() < 1e-12);
        assert!((residual - 0.1).abs() < 1e-9, "residual {residual}");
    }

    #[test]
    fn curl_of_exact_and_nonexact_fields() {
        // β = d(x1²x2): curl vanishes to stencil accuracy.
        let exact = grid_field([-1.0, -1.0], [1.0, 1.0], 21, |x| {
            [2.0 * x[0] * x[1], x[0] * x[0]]
        });
        assert!(curl_residual(&exact).unwrap() < 1e-12);
        // β = x1 dx2: curl ≡ 1.
        let rot = grid_field([-1.0, -1.0], [1.0, 1.0], 21, |x| [0.0, x[0]]);
        assert!((curl_residual(&rot).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_roundtrip_polynomial() {
        let field = grid_field([-1.0, -1.0], [1.0, 1.0], 41, |x| {
            [2.0 * x[0] * x[1], x[0] * x[0]]
        });
        let potential =
            reconstruct_potential(&field, &ChartPoint::plane(0.0, 0.0)).unwrap();
        assert!(potential.loop_residual <= 1e-8);
        let chart = &potential.charts[0];
        for j in 0..chart.geom.ny {
            for i in 0..chart.geom.nx {
                let x = chart.geom.point(i, j);
                let expect = x[0] * x[0] * x[1];
                let got = chart.f[chart.geom.idx(i, j)];
                assert!((got - expect).abs() < 1e-6, "at {x:?}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn potential_of_constant_form() {
        let field = grid_field([0.0, 0.0], [1.0, 1.0], 21, |_| [0.3, 0.0]);
        let potential = reconstruct_potential(&field, &ChartPoint::plane(0.0, 0.0)).unwrap();
        let chart = &potential.charts[0];
        for j in 0..chart.geom.ny {
            for i in 0..chart.geom.nx {
                let x = chart.geom.point(i, j);
                let got = chart.f[chart.geom.idx(i, j)];
                assert!((got - 0.3 * x[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_form_refused_as_not_closed() {
        let field = grid_field([-1.0, -1.0], [1.0, 1.0], 21, |x| [0.0, x[0]]);
        match reconstruct_potential(&field, &ChartPoint::plane(0.0, 0.0)) {
            Err(Error::NotClosed { curl_residual, .. }) => {
                assert!((curl_residual - 1.0).abs() < 1e-9)
            }
            other => panic!("expected NOT_CLOSED, got {other:?}"),
        }
    }

    #[test]
    fn bicubic_reproduces_cubics() {
        let geom = GridGeom {
            chart: ChartId::Plane,
            nx: 11,
            ny: 11,
            x0: [0.0, 0.0],
            h: [0.1, 0.1],
        };
        let f = |x: [f64; 2]| x[0].powi(3) - 2.0 * x[1].powi(2) + x[0] * x[1];
        let values: Vec<f64> = (0..11)
            .flat_map(|j| (0..11).map(move |i| (i, j)))
            .map(|(i, j)| f(geom.point(i, j)))
            .collect();
        for &q in &[[0.23, 0.57], [0.41, 0.18], [0.55, 0.85]] {
            let got = geom.bicubic(&values, q).unwrap();
            assert!((got - f(q)).abs() < 2e-4, "at {q:?}: {got} vs {}", f(q));
        }
        assert!(geom.bicubic(&values, [0.01, 0.5]).is_none());
    }
}
