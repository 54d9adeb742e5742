//! Numerical tolerances shared by every module.

/// Constraint feasibility (LP rows, assignment rows, f-SR rows).
pub const FEASIBILITY: f64 = 1e-7;

/// Residual of scalar fixed-point equations (water levels).
pub const RESIDUAL: f64 = 1e-9;

/// Agent weights must sum to one within this.
pub const WEIGHT_SUM: f64 = 1e-9;

/// Masses below this are treated as zero by the water-filling routines.
pub const MASS_ZERO: f64 = 1e-12;

/// LP solution entries below this are pruned before rounding.
pub const PRUNE: f64 = 1e-9;

/// Marginal reproduction of a matching decomposition.
pub const MARGINAL: f64 = 1e-6;
