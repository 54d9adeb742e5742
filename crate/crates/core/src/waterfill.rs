//! Water-filling levels and the per-player objective functions built on them.
//!
//! A player's fractional bundle is a [`Profile`] of `(value, mass)` pairs. Its
//! water level `h` solves `Σ_j min{v_j, h}·x_j = h`: the top unit of mass is
//! kept as solid columns and everything else is poured on top as water.
//!
//! * NSW: `f(x) = Σ_{v_j > h} x_j ln(v_j/h) + ln h`, concave, and the minimum
//!   over `h > 0` of the linear-in-`x` family `g(x, h)`.
//! * Scheduling with an increasing convex `θ`, `θ(0) = 0`:
//!   `f(x) = Σ_{p_j > h} x_j (θ(p_j) − θ(h)) + θ(h)`, convex, and the maximum
//!   over `h ≥ 0` of the family `g(x, h)`.
//!
//! Restricting `h` to a geometric [`Grid`] yields the surrogates `f̄` that the
//! relaxations encode as LP epigraph rows.

use crate::tol;
use crate::{Error, Result};

/// Grids larger than this are refused.
pub const MAX_GRID_LEN: usize = 5_000_000;

/// One player's fractional bundle: `(value or size, mass)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pairs: Vec<(f64, f64)>,
}

impl Profile {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        for &(v, m) in &pairs {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("profile value {v} is not positive")));
            }
            if !(-tol::FEASIBILITY..=1.0 + tol::FEASIBILITY).contains(&m) {
                return Err(Error::InvalidArgument(format!("profile mass {m} outside [0, 1]")));
            }
        }
        Ok(Self { pairs })
    }

    pub fn from_parts(values: &[f64], masses: &[f64]) -> Result<Self> {
        if values.len() != masses.len() {
            return Err(Error::InvalidArgument("values and masses differ in length".into()));
        }
        Self::new(values.iter().copied().zip(masses.iter().copied()).collect())
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Pairs whose mass is not negligible.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pairs.iter().copied().filter(|&(_, m)| m > tol::MASS_ZERO)
    }

    pub fn total_mass(&self) -> f64 {
        self.support().map(|(_, m)| m).sum()
    }

    /// `Σ_j min{v_j, h}·x_j`.
    pub fn capped_sum(&self, h: f64) -> f64 {
        self.support().map(|(v, m)| v.min(h) * m).sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|&(v, _)| v).collect()
    }
}

/// How to pick the level when the total mass does not exceed one, where the
/// defining equation has no unique positive root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelConvention {
    /// NSW: the smallest value carrying mass. Any level in `(0, min]` gives the same `f`.
    MinSupportValue,
    /// Scheduling: level zero.
    Zero,
}

/// Positive root of `c + Σ min{v_j, h}·m_j = h`, by an exact scan over the
/// sorted breakpoints; the equation is linear in `h` between breakpoints.
///
/// Requires a unique positive root: either `c > 0` or total mass above one.
pub fn solve_level(pairs: &[(f64, f64)], constant: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(v, m)| m > tol::MASS_ZERO && v > 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let len = pts.len();
    // above[k] = mass with value >= pts[k].0
    let mut above = vec![0.0; len + 1];
    for k in (0..len).rev() {
        above[k] = above[k + 1] + pts[k].1;
    }
    let mut below = constant;
    let mut lo = 0.0;
    let mut k = 0;
    loop {
        // on [lo, next breakpoint]: below + h·(above[k] − 1) = 0
        let slope = above[k] - 1.0;
        if slope < 0.0 {
            let h = below / -slope;
            if k == len || h <= pts[k].0 {
                return h.max(lo);
            }
        }
        if k == len {
            // unreachable for valid input; the last segment has zero mass above
            return below;
        }
        let v = pts[k].0;
        while k < len && pts[k].0 == v {
            below += v * pts[k].1;
            k += 1;
        }
        lo = v;
    }
}

/// Water level `h` of a profile.
///
/// Total mass above one: the unique `h > 0` with `Σ min{v_j, h}·x_j = h`.
/// Otherwise the convention decides; NSW profiles must carry mass at least one.
pub fn water_level(profile: &Profile, convention: LevelConvention) -> Result<f64> {
    let total = profile.total_mass();
    match convention {
        LevelConvention::MinSupportValue => {
            if total < 1.0 - tol::RESIDUAL {
                return Err(Error::InsufficientMass { mass: total });
            }
            if total <= 1.0 + tol::MASS_ZERO {
                return Ok(profile.support().map(|(v, _)| v).fold(f64::INFINITY, f64::min));
            }
        }
        LevelConvention::Zero => {
            if total <= 1.0 + tol::MASS_ZERO {
                return Ok(0.0);
            }
        }
    }
    Ok(solve_level(profile.pairs(), 0.0))
}

/// NSW objective `f(x) = Σ_{v_j > h} x_j ln(v_j/h) + ln h` at the water level.
pub fn f_nsw(profile: &Profile) -> Result<f64> {
    let h = water_level(profile, LevelConvention::MinSupportValue)?;
    Ok(profile
        .support()
        .filter(|&(v, _)| v > h)
        .map(|(v, m)| m * (v / h).ln())
        .sum::<f64>()
        + h.ln())
}

/// `g(x, h) = Σ_{v_j > h} x_j ln(v_j/h) + ln h + (1/h) Σ min{v_j, h} x_j − 1`.
pub fn g_nsw(profile: &Profile, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("level {h} must be positive")));
    }
    let mut acc = h.ln() - 1.0;
    for (v, m) in profile.support() {
        if v > h {
            acc += m * (v / h).ln();
        }
        acc += v.min(h) * m / h;
    }
    Ok(acc)
}

/// Coefficient of `x_j` in `g_nsw(·, h)` for an item of value `v`.
pub fn nsw_cut_coefficient(v: f64, h: f64) -> f64 {
    let log_part = if v > h { (v / h).ln() } else { 0.0 };
    log_part + v.min(h) / h
}

/// Constant term of `g_nsw(·, h)`.
pub fn nsw_cut_constant(h: f64) -> f64 {
    h.ln() - 1.0
}

/// `f̄(x) = min_{h ∈ H} g_nsw(x, h)`.
pub fn f_bar_nsw(profile: &Profile, grid: &Grid) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best = f64::INFINITY;
    for &h in grid.levels() {
        best = best.min(g_nsw(profile, h)?);
    }
    Ok(best)
}

/// Increasing convex cost `θ` with `θ(0) = 0`, given with its derivative.
pub trait Theta {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// `θ(t) = t^k`, `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Power {
    k: f64,
}

impl Power {
    pub fn new(k: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("exponent {k} must be at least 1")));
        }
        Ok(Self { k })
    }

    pub fn exponent(&self) -> f64 {
        self.k
    }
}

impl Theta for Power {
    fn value(&self, t: f64) -> f64 {
        t.powf(self.k)
    }

    fn derivative(&self, t: f64) -> f64 {
        if self.k == 1.0 {
            1.0
        } else {
            self.k * t.powf(self.k - 1.0)
        }
    }
}

/// `θ` from a pair of closures.
pub struct ThetaFn<F, D> {
    pub value: F,
    pub derivative: D,
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Theta for ThetaFn<F, D> {
    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }
}

/// Scheduling objective `f(x) = Σ_{p_j > h} x_j (θ(p_j) − θ(h)) + θ(h)`.
pub fn f_theta(profile: &Profile, theta: &impl Theta) -> f64 {
    // Zero convention never fails.
    let h = water_level(profile, LevelConvention::Zero).unwrap_or(0.0);
    let th = theta.value(h);
    profile
        .support()
        .filter(|&(p, _)| p > h)
        .map(|(p, m)| m * (theta.value(p) - th))
        .sum::<f64>()
        + th
}

/// `g(x, h) = Σ_{p_j > h} x_j (θ(p_j) − θ(h)) + θ(h) + θ'(h)(Σ min{p_j, h} x_j − h)`.
pub fn g_theta(profile: &Profile, h: f64, theta: &impl Theta) -> f64 {
    let th = theta.value(h);
    let mut acc = th - theta.derivative(h) * h;
    for (p, m) in profile.support() {
        if p > h {
            acc += m * (theta.value(p) - th);
        }
        acc += theta.derivative(h) * p.min(h) * m;
    }
    acc
}

/// Coefficient of `x_j` in `g_theta(·, h)` for a job of size `p`.
pub fn theta_cut_coefficient(p: f64, h: f64, theta: &impl Theta) -> f64 {
    let excess = if p > h { theta.value(p) - theta.value(h) } else { 0.0 };
    excess + theta.derivative(h) * p.min(h)
}

/// Constant term of `g_theta(·, h)`.
pub fn theta_cut_constant(h: f64, theta: &impl Theta) -> f64 {
    theta.value(h) - theta.derivative(h) * h
}

/// `f̄(x) = max_{h ∈ H} g_theta(x, h)`.
pub fn f_bar_theta(profile: &Profile, grid: &Grid, theta: &impl Theta) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid
        .levels()
        .iter()
        .map(|&h| g_theta(profile, h, theta))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Candidate water levels for one player, sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    levels: Vec<f64>,
    eps: f64,
}

impl Grid {
    /// `{r(1+ε)^{-t} ≥ ℓ : t ≥ 0}` with `ℓ = min v`, `r = Σ v`.
    pub fn nsw(values: &[f64], eps: f64) -> Result<Self> {
        let (lo, hi) = span(values, eps)?;
        let base = 1.0 + eps;
        let count = ladder_len(lo, hi, base)?;
        let mut levels: Vec<f64> = (0..count)
            .map(|t| hi / base.powi(t as i32))
            .take_while(|&h| h >= lo)
            .collect();
        levels.reverse();
        Ok(Self { levels, eps })
    }

    /// `{0} ∪ {ℓ(1+ε)^t ≤ r : t ≥ 0} ∪ {r}` with `ℓ = min p`, `r = Σ p`.
    pub fn sched(values: &[f64], eps: f64) -> Result<Self> {
        let (lo, hi) = span(values, eps)?;
        let base = 1.0 + eps;
        let count = ladder_len(lo, hi, base)?;
        let mut levels = Vec::with_capacity(count + 2);
        levels.push(0.0);
        levels.extend((0..count).map(|t| lo * base.powi(t as i32)).take_while(|&h| h <= hi));
        if *levels.last().unwrap() < hi * (1.0 - 1e-12) {
            levels.push(hi);
        }
        Ok(Self { levels, eps })
    }

    pub fn from_levels(mut levels: Vec<f64>, eps: f64) -> Self {
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Self { levels, eps }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

fn span(values: &[f64], eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must be positive")));
    }
    if values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("grid values must be positive".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().sum();
    Ok((lo, hi))
}

fn ladder_len(lo: f64, hi: f64, base: f64) -> Result<usize> {
    let steps = ((hi / lo).ln() / base.ln()).floor();
    let count = steps as usize + 2;
    if !steps.is_finite() || count > MAX_GRID_LEN {
        return Err(Error::InvalidArgument(format!(
            "grid would need {steps} levels; increase ε"
        )));
    }
    Ok(count)
}
