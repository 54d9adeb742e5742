//! Approximation constants of the scheduling roundings.
//!
//! For `θ(t) = t^k` the ratio is
//! `α(k) = sup_{t ∈ (0,1), y ∈ (0,1]} (t(1 + y(1−t))^k + (1−t)(y(1−t))^k) / (t + (1−t)y^k)`,
//! evaluated on a grid and polished with Nelder–Mead. The completion-time
//! constant `(1+√2)/2` is returned with a numeric check of the inequality
//! behind it.

use crate::{Error, Result};

pub const DEFAULT_RESOLUTION: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaResult {
    pub alpha: f64,
    pub t: f64,
    pub y: f64,
    pub resolution: usize,
    /// Nelder–Mead iterations spent refining the best grid point.
    pub refinement_iterations: usize,
}

/// Ratio whose supremum is `α(k)`.
pub fn ratio(k: f64, t: f64, y: f64) -> f64 {
    let s = 1.0 - t;
    (t * (1.0 + y * s).powf(k) + s * (y * s).powf(k)) / (t + s * y.powf(k))
}

pub fn compute_alpha_power(k: f64) -> Result<AlphaResult> {
    compute_alpha_power_at(k, DEFAULT_RESOLUTION)
}

pub fn compute_alpha_power_at(k: f64, resolution: usize) -> Result<AlphaResult> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent {k} must be at least 1")));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    // t at cell centres of (0,1); y on (0,1] including 1.
    let r = resolution as f64;
    let mut best = (f64::NEG_INFINITY, 0.5, 1.0);
    for a in 0..resolution {
        let t = (a as f64 + 0.5) / r;
        for b in 0..resolution {
            let y = (b as f64 + 1.0) / r;
            let v = ratio(k, t, y);
            if v > best.0 {
                best = (v, t, y);
            }
        }
    }
    let start = [best.1, best.2];
    let step = 1.0 / r;
    let (point, value, iterations) = nelder_mead(|p| -ratio(k, clamp_t(p[0]), clamp_y(p[1])), start, step);
    let (t, y) = (clamp_t(point[0]), clamp_y(point[1]));
    let alpha = (-value).max(best.0);
    let (t, y) = if -value >= best.0 { (t, y) } else { (best.1, best.2) };
    Ok(AlphaResult { alpha, t, y, resolution, refinement_iterations: iterations })
}

fn clamp_t(t: f64) -> f64 {
    t.clamp(1e-12, 1.0 - 1e-12)
}

fn clamp_y(y: f64) -> f64 {
    y.clamp(1e-12, 1.0)
}

/// Minimises `f` over the plane from `start` with an initial simplex of size `step`.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64) -> ([f64; 2], f64, usize) {
    let mut simplex = [start, [start[0] + step, start[1]], [start[0], start[1] - step]];
    let mut values = simplex.map(&f);
    let mut iterations = 0;
    while iterations < 2000 {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let [lo, mid, hi] = order;
        if (values[hi] - values[lo]).abs() <= 1e-15 * values[lo].abs().max(1.0) {
            break;
        }
        iterations += 1;
        let centroid = [(simplex[lo][0] + simplex[mid][0]) / 2.0, (simplex[lo][1] + simplex[mid][1]) / 2.0];
        let along = |c: f64| [centroid[0] + c * (simplex[hi][0] - centroid[0]), centroid[1] + c * (simplex[hi][1] - centroid[1])];
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < values[lo] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            (simplex[hi], values[hi]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < values[mid] {
            (simplex[hi], values[hi]) = (reflected, fr);
        } else {
            let contracted = if fr < values[hi] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < values[hi].min(fr) {
                (simplex[hi], values[hi]) = (contracted, fc);
            } else {
                for v in [mid, hi] {
                    simplex[v] = [
                        simplex[lo][0] + 0.5 * (simplex[v][0] - simplex[lo][0]),
                        simplex[lo][1] + 0.5 * (simplex[v][1] - simplex[lo][1]),
                    ];
                    values[v] = f(simplex[v]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("three vertices");
    (simplex[best], values[best], iterations)
}

/// `(1+√2)/2` and the numeric check that it bounds the completion-time ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletionCertificate {
    pub alpha: f64,
    /// `−a² + αa − 2(α−1)` at its maximiser `a = α/2`.
    pub b_zero_peak: f64,
    /// Largest value of the `b = 0` face over the grid.
    pub b_zero_max: f64,
    /// Largest value of the `b = 1 − a` face over the grid.
    pub b_diagonal_max: f64,
    /// Largest value of the full bound over the triangle `a, b ≥ 0, a + b ≤ 1`.
    pub triangle_max: f64,
    pub grid_points: usize,
}

impl CompletionCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.b_zero_max <= tol && self.b_diagonal_max <= tol && self.triangle_max <= tol
    }
}

pub fn completion_alpha() -> f64 {
    (1.0 + std::f64::consts::SQRT_2) / 2.0
}

/// Upper bound on `2(cost − α·opt)/(m h²)` at `a = ψ/h`, `b = m₁/m`.
pub fn completion_bound(alpha: f64, a: f64, b: f64) -> f64 {
    (2.0 * alpha - 1.0) / (2.0 * (alpha - 1.0)) * a * a * b
        + (1.0 - b - a) * ((1.0 + a).powi(2) - (alpha - 1.0))
        + a.powi(3)
        - alpha * (1.0 - b)
}

pub fn completion_certificate(grid_points: usize) -> CompletionCertificate {
    let alpha = completion_alpha();
    let g = grid_points.max(2);
    let point = |k: usize| k as f64 / (g - 1) as f64;
    let face0 = |a: f64| -a * a + alpha * a - 2.0 * (alpha - 1.0);
    let diag = |a: f64| a / (2.0 * (alpha - 1.0)) * (-a * a + (2.0 * alpha - 1.0) * a - 2.0 * alpha * (alpha - 1.0));
    let mut b_zero_max = f64::NEG_INFINITY;
    let mut b_diagonal_max = f64::NEG_INFINITY;
    for k in 0..g {
        let a = point(k);
        b_zero_max = b_zero_max.max(face0(a));
        b_diagonal_max = b_diagonal_max.max(diag(a));
    }
    let side = (g as f64).sqrt().ceil() as usize + 1;
    let mut triangle_max = f64::NEG_INFINITY;
    for u in 0..side {
        let a = u as f64 / (side - 1) as f64;
        for w in 0..side {
            let b = (1.0 - a) * w as f64 / (side - 1) as f64;
            triangle_max = triangle_max.max(completion_bound(alpha, a, b));
        }
    }
    CompletionCertificate {
        alpha,
        b_zero_peak: face0(alpha / 2.0),
        b_zero_max,
        b_diagonal_max,
        triangle_max,
        grid_points: g,
    }
}
