//! Small numerical utilities shared across modules.

/// Halton low-discrepancy sequence value, index `i` (0-based), prime `base`.
pub(crate) fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    i += 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// splitmix64 hash, used to derive deterministic offsets from a seed.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic pairwise summation (fixed reduction order, independent of
/// thread count).
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Gauss–Legendre nodes and weights on [a, b].
pub(crate) fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Initial guess (Abramowitz–Stegun), then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid - half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

/// C⁴ smoothstep: 0 for t ≤ 0, 1 for t ≥ 1.
pub(crate) fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t2 = t * t;
        let t4 = t2 * t2;
        t4 * t * (126.0 - 420.0 * t + 540.0 * t2 - 315.0 * t2 * t + 70.0 * t4)
    }
}

/// Cumulative integral of uniformly sampled values with spacing `h`, using a
/// 4-point (cubic) composite rule; returns F with F[0] = 0, error O(h⁴).
pub(crate) fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for k in 1..n {
            out[k] = out[k - 1] + 0.5 * h * (values[k - 1] + values[k]);
        }
        return out;
    }
    for k in 1..n {
        let seg = if k == 1 {
            // ∫₀¹ of the cubic through nodes 0..3.
            h / 24.0 * (9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] + values[3])
        } else if k == n - 1 {
            h / 24.0
                * (9.0 * values[n - 1] + 19.0 * values[n - 2] - 5.0 * values[n - 3]
                    + values[n - 4])
        } else {
            // ∫ over [k-1, k] of the cubic through nodes k-2..k+1.
            h / 24.0
                * (-values[k - 2] + 13.0 * values[k - 1] + 13.0 * values[k] - values[k + 1])
        };
        out[k] = out[k - 1] + seg;
    }
    out
}
