//! Linear programs and a dense two-phase simplex solver.
//!
//! [`LpModel`] is a plain container of bounded variables, linear rows and a
//! linear objective. [`solve_lp`] runs the built-in [`DenseSimplex`]; any other
//! [`LpBackend`] may be substituted. [`solve_lp_lazy`] solves models with many
//! similar rows (the epigraph rows of the relaxations) by row generation: it
//! only hands the active rows to the backend and adds the most violated row of
//! each lazy group until the point satisfies the full model.

mod mps;
mod simplex;

use std::collections::HashMap;
use std::fmt;

pub use mps::write_mps;
pub use simplex::DenseSimplex;

use crate::tol;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * point[v.0]).sum()
    }

    /// Amount by which `point` violates the row; zero when satisfied.
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs = self.activity(point);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpModel {
    name: String,
    sense: Sense,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    var_names: HashMap<String, VarId>,
    row_names: HashMap<String, RowId>,
}

impl LpModel {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            var_names: HashMap::new(),
            row_names: HashMap::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("variable `{name}` has bounds [{lower}, {upper}]")));
        }
        let id = VarId(self.vars.len());
        if self.var_names.insert(name.clone(), id).is_some() {
            return Err(Error::DuplicateId { kind: "variable", id: name });
        }
        self.vars.push(Variable { name, lower, upper });
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<RowId> {
        let name = name.into();
        if !rhs.is_finite() || coeffs.iter().any(|&(v, a)| !a.is_finite() || v.0 >= self.vars.len()) {
            return Err(Error::InvalidArgument(format!("constraint `{name}` is malformed")));
        }
        let id = RowId(self.rows.len());
        if self.row_names.insert(name.clone(), id).is_some() {
            return Err(Error::DuplicateId { kind: "constraint", id: name });
        }
        self.rows.push(Constraint { name, coeffs, relation, rhs });
        Ok(id)
    }

    pub fn set_objective(&mut self, coeffs: Vec<(VarId, f64)>) -> Result<()> {
        if coeffs.iter().any(|&(v, a)| !a.is_finite() || v.0 >= self.vars.len()) {
            return Err(Error::InvalidArgument("objective is malformed".into()));
        }
        self.objective = coeffs;
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.row_names.get(name).copied()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * point[v.0]).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpStatus {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Simplex pivots, summed over all rounds for row generation.
    pub iterations: usize,
}

impl LpResult {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match &self.status {
            LpStatus::Optimal { values, objective } => Some((values, *objective)),
            _ => None,
        }
    }
}

/// Anything that solves an LP restricted to a subset of its rows.
pub trait LpBackend {
    /// Solves `model` keeping only the rows in `rows` (all rows when `None`).
    fn solve_rows(&self, model: &LpModel, rows: Option<&[RowId]>) -> Result<LpResult>;

    fn solve(&self, model: &LpModel) -> Result<LpResult> {
        self.solve_rows(model, None)
    }
}

/// Solves `model` with the built-in dense simplex.
pub fn solve_lp(model: &LpModel) -> Result<LpResult> {
    DenseSimplex::default().solve(model)
}

/// Worst violation of a point against a model's rows and bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    pub max_violation: f64,
    /// Name of the worst row (or `bound:<var>`); `None` when nothing is violated.
    pub worst: Option<String>,
}

impl Feasibility {
    pub fn is_ok(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

pub fn check_feasible(model: &LpModel, point: &[f64]) -> Result<Feasibility> {
    if point.len() != model.n_vars() {
        return Err(Error::InvalidArgument(format!(
            "point has {} entries, model has {} variables",
            point.len(),
            model.n_vars()
        )));
    }
    let mut worst = Feasibility { max_violation: 0.0, worst: None };
    let mut note = |v: f64, name: &dyn Fn() -> String| {
        if v > worst.max_violation {
            worst = Feasibility { max_violation: v, worst: Some(name()) };
        }
    };
    for (var, &x) in model.vars.iter().zip(point) {
        note((var.lower - x).max(x - var.upper).max(0.0), &|| format!("bound:{}", var.name));
    }
    for row in &model.rows {
        note(row.violation(point), &|| row.name.clone());
    }
    Ok(worst)
}

/// Rows solved lazily by [`solve_lp_lazy`].
///
/// Rows that belong to no group are always active. Each group starts with the
/// rows listed in `initial`; the initially active rows must bound the objective.
///
/// `epigraph[g]`, when present, names a variable that group `g` bounds on the
/// side the objective pushes it to, as `t ≤ min_k (a_k·x + b_k)` does for `t`.
#[derive(Clone, Debug, Default)]
pub struct LazyRows {
    pub groups: Vec<Vec<RowId>>,
    pub initial: Vec<RowId>,
    pub epigraph: Vec<Option<VarId>>,
}

/// Row-generation solve of the full `model`: repeatedly solves the active
/// subproblem and activates, per lazy group, the row most violated by its
/// optimum. Terminates with an optimum of the full model.
///
/// When every violated group has an epigraph variable, the subproblem optimum
/// is also pulled back onto all rows of those groups. If that feasible point
/// is within `LAZY_GAP` of the subproblem bound it is returned, which stops
/// the long tail of rounds on degenerate optima.
pub fn solve_lp_lazy(model: &LpModel, lazy: &LazyRows, backend: &impl LpBackend) -> Result<LpResult> {
    let mut active = vec![true; model.n_rows()];
    for group in &lazy.groups {
        for r in group {
            active[r.0] = false;
        }
    }
    for r in &lazy.initial {
        active[r.0] = true;
    }
    let mut iterations = 0;
    let max_rounds = model.n_rows() + 1;
    for _ in 0..max_rounds {
        let rows: Vec<RowId> = (0..model.n_rows()).filter(|&r| active[r]).map(RowId).collect();
        let result = backend.solve_rows(model, Some(&rows))?;
        iterations += result.iterations;
        let Some((values, _)) = result.optimal() else {
            return Ok(LpResult { status: result.status, iterations });
        };
        let bound = model.objective_value(values);
        if let Some(point) = pull_back(model, lazy, values) {
            let objective = model.objective_value(&point);
            if (objective - bound).abs() <= LAZY_GAP * bound.abs().max(1.0) {
                return Ok(LpResult { status: LpStatus::Optimal { values: point, objective }, iterations });
            }
        }
        let mut added = false;
        for group in &lazy.groups {
            let mut best: Option<(f64, RowId)> = None;
            for &r in group {
                if active[r.0] {
                    continue;
                }
                let row = &model.rows[r.0];
                let v = row.violation(values);
                if v > ROWGEN_TOL * row.rhs.abs().max(1.0) && best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, r));
                }
            }
            if let Some((_, r)) = best {
                active[r.0] = true;
                added = true;
            }
        }
        if !added {
            return Ok(LpResult { status: result.status, iterations });
        }
    }
    Err(Error::Internal("row generation did not converge".into()))
}

/// Violation below which a lazy row counts as satisfied.
const ROWGEN_TOL: f64 = 1e-10;

/// Relative objective gap at which a pulled-back point is accepted.
const LAZY_GAP: f64 = 1e-10;

/// Moves each epigraph variable to the tightest value its whole group allows.
/// `None` when some group lacks an epigraph variable or the result is infeasible.
fn pull_back(model: &LpModel, lazy: &LazyRows, values: &[f64]) -> Option<Vec<f64>> {
    if lazy.groups.is_empty() || lazy.epigraph.len() != lazy.groups.len() {
        return None;
    }
    let mut point = values.to_vec();
    for (group, epi) in lazy.groups.iter().zip(&lazy.epigraph) {
        let t = (*epi)?;
        let (mut lo, mut hi) = (model.vars[t.0].lower, model.vars[t.0].upper);
        for &r in group {
            let row = &model.rows[r.0];
            let a: f64 = row.coeffs.iter().filter(|c| c.0 == t).map(|c| c.1).sum();
            if a == 0.0 {
                return None;
            }
            let rest = row.activity(values) - a * values[t.0];
            let limit = (row.rhs - rest) / a;
            match (row.relation, a > 0.0) {
                (Relation::Le, true) | (Relation::Ge, false) => hi = hi.min(limit),
                (Relation::Le, false) | (Relation::Ge, true) => lo = lo.max(limit),
                (Relation::Eq, _) => return None,
            }
        }
        let c: f64 = model.objective.iter().filter(|c| c.0 == t).map(|c| c.1).sum();
        let up = (c > 0.0) == (model.sense == Sense::Maximize);
        let v = if up { hi } else { lo };
        if !v.is_finite() || lo > hi {
            return None;
        }
        point[t.0] = v;
    }
    check_feasible(model, &point).ok()?.is_ok(tol::FEASIBILITY).then_some(point)
}

/// Residual check used by tests and callers: every row within the feasibility tolerance.
pub fn is_feasible(model: &LpModel, point: &[f64]) -> bool {
    check_feasible(model, point).is_ok_and(|f| f.is_ok(tol::FEASIBILITY))
}
