//! Compact convex relaxations for weighted Nash social welfare (NSW) and
//! unrelated-machine scheduling, together with the matching-based rounding
//! that turns their fractional optima into integral allocations.
//!
//! The pipeline for NSW is
//!
//! 1. [`relax::solve_cp_nsw`] builds the discretized water-filling LP and solves
//!    it with the built-in simplex ([`lp`]);
//! 2. [`rounding::partition_groups`] cuts every agent's fractional bundle
//!    into unit groups, ordered by value;
//! 3. [`rounding::decompose`] writes the group/item fractional matching as a
//!    convex combination of integral matchings;
//! 4. [`rounding::best_allocation`] (or [`rounding::sample`]) picks an
//!    allocation from the combination.
//!
//! The scheduling variants follow the same route with
//! [`relax::solve_cp_theta`] and [`relax::solve_cp_completion`].
//! [`oracle`] holds exhaustive solvers used as ground truth on small instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha;
pub mod ef1;
mod error;
pub mod fisher;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod relax;
pub mod rounding;
pub mod tol;
pub mod waterfill;

pub use error::{Error, Result};
pub use model::{
    Allocation, FractionalAssignment, NswInstance, SchedInstance, SchedObjective, Violation,
};
