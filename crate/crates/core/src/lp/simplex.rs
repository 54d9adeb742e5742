use super::{LpBackend, LpModel, LpResult, LpStatus, Relation, RowId, Sense};
use crate::{Error, Result};

/// Two-phase primal simplex on a dense tableau with Bland's pivoting rule.
#[derive(Clone, Debug)]
pub struct DenseSimplex {
    pub max_iterations: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self { max_iterations: 5_000_000 }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const RAY_TOL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-9;

/// How an original variable is expressed through nonnegative tableau columns.
#[derive(Clone, Copy, Debug)]
enum Column {
    /// x = offset + sign * y
    Shifted { col: usize, offset: f64, sign: f64 },
    /// x = y⁺ − y⁻
    Free { pos: usize, neg: usize },
}

struct Tableau {
    /// Row-major, `width` entries per row; the last entry of each row is the rhs.
    a: Vec<f64>,
    width: usize,
    rows: usize,
    basis: Vec<usize>,
    /// Reduced costs followed by minus the current objective value.
    cost: Vec<f64>,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.a[pr * w + pc];
        for v in &mut self.a[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        self.a[pr * w + pc] = 1.0;
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (v, &q) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * q;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for (v, &q) in self.cost.iter_mut().zip(prow.iter()) {
                *v -= f * q;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Sets the cost row to the reduced costs of `c` for the current basis.
    fn price(&mut self, c: &[f64]) {
        self.cost.clear();
        self.cost.extend_from_slice(c);
        self.cost.push(0.0);
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * self.width..(r + 1) * self.width];
                for (v, &q) in self.cost.iter_mut().zip(row) {
                    *v -= cb * q;
                }
            }
        }
    }

    /// Minimises the priced objective; columns `>= allowed` never enter.
    ///
    /// Bland's rule takes the first improving column that has a usable pivot.
    /// A column without one is a ray; it proves unboundedness only when its
    /// reduced cost is clearly negative and no entry is positive at all,
    /// otherwise it is rounding noise from nearly parallel rows and is skipped.
    fn run(&mut self, allowed: usize, max_iterations: usize) -> Result<PhaseEnd> {
        loop {
            if self.iterations >= max_iterations {
                return Err(Error::Internal("simplex iteration limit reached".into()));
            }
            let mut entering = None;
            for pc in (0..allowed).filter(|&c| self.cost[c] < -COST_TOL) {
                if let Some(pr) = self.ratio_test(pc) {
                    entering = Some((pr, pc));
                    break;
                }
                if self.cost[pc] < -RAY_TOL && (0..self.rows).all(|r| self.at(r, pc) <= 0.0) {
                    return Ok(PhaseEnd::Unbounded);
                }
            }
            match entering {
                Some((pr, pc)) => self.pivot(pr, pc),
                None => return Ok(PhaseEnd::Optimal),
            }
        }
    }

    /// Leaving row for column `pc` by a two-pass Harris test: the step may
    /// overshoot a bound by `HARRIS_TOL`, and among the rows that allow it the
    /// largest pivot wins (then the smallest basic index).
    fn ratio_test(&self, pc: usize) -> Option<usize> {
        let mut limit = f64::INFINITY;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOL {
                limit = limit.min((self.rhs(r).max(0.0) + HARRIS_TOL) / a);
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOL && self.rhs(r).max(0.0) / a <= limit {
                let better = match best {
                    None => true,
                    Some((ba, b)) => a > ba || (a == ba && self.basis[r] < self.basis[b]),
                };
                if better {
                    best = Some((a, r));
                }
            }
        }
        best.map(|(_, r)| r)
    }
}

impl LpBackend for DenseSimplex {
    fn solve_rows(&self, model: &LpModel, rows: Option<&[RowId]>) -> Result<LpResult> {
        // Standard form: every original variable becomes one or two nonnegative columns.
        let mut columns = Vec::with_capacity(model.n_vars());
        let mut n_struct = 0;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for var in model.vars() {
            let (lo, hi) = (var.lower, var.upper);
            let col = n_struct;
            if lo.is_finite() {
                columns.push(Column::Shifted { col, offset: lo, sign: 1.0 });
                n_struct += 1;
                if hi.is_finite() {
                    bound_rows.push((col, hi - lo));
                }
            } else if hi.is_finite() {
                columns.push(Column::Shifted { col, offset: hi, sign: -1.0 });
                n_struct += 1;
            } else {
                columns.push(Column::Free { pos: col, neg: col + 1 });
                n_struct += 2;
            }
        }

        // Dense rows in terms of structural columns: (coeffs, relation, rhs).
        let selected: Vec<usize> = match rows {
            Some(r) => r.iter().map(|r| r.0).collect(),
            None => (0..model.n_rows()).collect(),
        };
        let mut dense: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(selected.len() + bound_rows.len());
        for &r in &selected {
            let row = &model.constraints()[r];
            let mut coeffs = vec![0.0; n_struct];
            let mut rhs = row.rhs;
            for &(v, a) in &row.coeffs {
                match columns[v.0] {
                    Column::Shifted { col, offset, sign } => {
                        coeffs[col] += a * sign;
                        rhs -= a * offset;
                    }
                    Column::Free { pos, neg } => {
                        coeffs[pos] += a;
                        coeffs[neg] -= a;
                    }
                }
            }
            dense.push((coeffs, row.relation, rhs));
        }
        for &(col, ub) in &bound_rows {
            let mut coeffs = vec![0.0; n_struct];
            coeffs[col] = 1.0;
            dense.push((coeffs, Relation::Le, ub));
        }
        for (coeffs, rel, rhs) in &mut dense {
            if *rhs < 0.0 {
                coeffs.iter_mut().for_each(|v| *v = -*v);
                *rhs = -*rhs;
                *rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        // Column layout: structural | slack/surplus | artificial | rhs.
        let m = dense.len();
        let n_slack = dense.iter().filter(|d| d.1 != Relation::Eq).count();
        let n_art = dense.iter().filter(|d| d.1 != Relation::Le).count();
        let art0 = n_struct + n_slack;
        let n_cols = art0 + n_art;
        let width = n_cols + 1;
        let mut a = vec![0.0; m * width];
        let mut basis = Vec::with_capacity(m);
        let (mut s, mut t) = (n_struct, art0);
        for (r, (coeffs, rel, rhs)) in dense.iter().enumerate() {
            let row = &mut a[r * width..(r + 1) * width];
            row[..n_struct].copy_from_slice(coeffs);
            row[n_cols] = *rhs;
            match rel {
                Relation::Le => {
                    row[s] = 1.0;
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[t] = 1.0;
                    basis.push(t);
                    t += 1;
                }
                Relation::Eq => {
                    row[t] = 1.0;
                    basis.push(t);
                    t += 1;
                }
            }
        }
        let mut tab = Tableau { a, width, rows: m, basis, cost: Vec::new(), iterations: 0 };

        // Phase 1: minimise the sum of artificials.
        if n_art > 0 {
            let mut c1 = vec![0.0; n_cols];
            c1[art0..].iter_mut().for_each(|v| *v = 1.0);
            tab.price(&c1);
            tab.run(n_cols, self.max_iterations)?;
            let infeas = -tab.cost[n_cols];
            let scale = dense.iter().map(|d| d.2).fold(1.0, f64::max);
            if infeas > 1e-9 * scale {
                return Ok(LpResult { status: LpStatus::Infeasible, iterations: tab.iterations });
            }
            // Drive zero-valued artificials out of the basis where possible.
            for r in 0..m {
                if tab.basis[r] >= art0 {
                    if let Some(c) = (0..art0).find(|&c| tab.at(r, c).abs() > PIVOT_TOL) {
                        tab.pivot(r, c);
                    }
                }
            }
        }

        // Phase 2 on the real objective (always minimised internally).
        let flip = if model.sense() == Sense::Maximize { -1.0 } else { 1.0 };
        let mut c2 = vec![0.0; n_cols];
        for &(v, c) in model.objective() {
            match columns[v.0] {
                Column::Shifted { col, sign, .. } => c2[col] += flip * c * sign,
                Column::Free { pos, neg } => {
                    c2[pos] += flip * c;
                    c2[neg] -= flip * c;
                }
            }
        }
        tab.price(&c2);
        if let PhaseEnd::Unbounded = tab.run(art0, self.max_iterations)? {
            return Ok(LpResult { status: LpStatus::Unbounded, iterations: tab.iterations });
        }

        let mut y = vec![0.0; n_cols];
        for r in 0..m {
            y[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
        let values: Vec<f64> = model
            .vars()
            .iter()
            .zip(&columns)
            .map(|(var, col)| {
                let x = match *col {
                    Column::Shifted { col, offset, sign } => offset + sign * y[col],
                    Column::Free { pos, neg } => y[pos] - y[neg],
                };
                x.clamp(var.lower, var.upper)
            })
            .collect();
        let objective = model.objective_value(&values);
        Ok(LpResult { status: LpStatus::Optimal { values, objective }, iterations: tab.iterations })
    }
}
