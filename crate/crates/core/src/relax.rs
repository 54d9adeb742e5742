//! Discretised LP relaxations of the NSW and scheduling convex programs.
//!
//! Each player's concave (NSW) or convex (scheduling) objective is replaced by
//! an epigraph variable `f̄_i` cut by the tangent planes `g(x_i, h)` for every
//! level `h` of the player's grid. The resulting LPs have one row per grid
//! level and are solved by row generation: the grids are long, but only a few
//! cuts per player are ever tight.

use crate::lp::{self, DenseSimplex, LazyRows, LpBackend, LpModel, LpStatus, Relation, RowId, Sense, VarId};
use crate::model::{FracEntry, FractionalAssignment, NswInstance, SchedInstance, SchedObjective};
use crate::tol;
use crate::waterfill::{self, Grid, LevelConvention, Power, Profile, Theta};
use crate::{Error, Result};

/// Default grid ratio `1 + ε`.
pub const DEFAULT_EPS: f64 = 1e-3;

/// An LP relaxation together with the meaning of its variables and cut rows.
#[derive(Clone, Debug)]
pub struct RelaxationLp {
    pub model: LpModel,
    /// `(player, object, variable)` for every assignable pair.
    pub x_vars: Vec<(usize, usize, VarId)>,
    /// Epigraph variable `f̄_i` of each player.
    pub f_vars: Vec<VarId>,
    pub grids: Vec<Grid>,
    /// Cut rows of each player, one per grid level.
    pub cut_rows: Vec<Vec<RowId>>,
}

impl RelaxationLp {
    /// The cut rows as lazy groups, each starting from a handful of spread-out levels.
    pub fn lazy_rows(&self) -> LazyRows {
        let initial = self.cut_rows.iter().flat_map(|rows| spread(rows, 9)).collect();
        LazyRows { groups: self.cut_rows.clone(), initial, epigraph: self.f_vars.iter().copied().map(Some).collect() }
    }
}

fn spread(rows: &[RowId], count: usize) -> Vec<RowId> {
    if rows.len() <= count {
        return rows.to_vec();
    }
    let mut out: Vec<RowId> = (0..count).map(|k| rows[k * (rows.len() - 1) / (count - 1)]).collect();
    out.dedup();
    out
}

#[derive(Clone, Debug)]
pub struct FractionalSolution {
    /// Optimal assignment, pruned below [`tol::PRUNE`] and renormalised per object.
    pub x: FractionalAssignment,
    /// LP optimum: `Σ w_i f̄_i` (NSW), `Σ f̄_i` (load), or `½(Σ f̄_i + Σ x p²)` (completion).
    pub value: f64,
    /// Water level of each player recomputed from `x`.
    pub levels: Vec<f64>,
    pub eps: f64,
    pub grid_sizes: Vec<usize>,
    pub iterations: usize,
}

pub fn build_nsw_lp(instance: &NswInstance, eps: f64) -> Result<RelaxationLp> {
    instance.ensure_valid()?;
    let n = instance.n_agents();
    let mut model = LpModel::new("cp_nsw", Sense::Maximize);
    let mut x_vars = Vec::with_capacity(instance.edges().len());
    for e in instance.edges() {
        let v = model.add_var(format!("x_{}_{}", e.agent, e.item), 0.0, 1.0)?;
        x_vars.push((e.agent, e.item, v));
    }
    let f_vars: Vec<VarId> = (0..n)
        .map(|i| model.add_var(format!("fbar_{i}"), f64::NEG_INFINITY, f64::INFINITY))
        .collect::<Result<_>>()?;
    for j in 0..instance.n_items() {
        let row = instance.item_edges(j).iter().map(|&e| (x_vars[e].2, 1.0)).collect();
        model.add_constraint(format!("item_{j}"), row, Relation::Eq, 1.0)?;
    }
    for i in 0..n {
        let row = instance.agent_edges(i).iter().map(|&e| (x_vars[e].2, 1.0)).collect();
        model.add_constraint(format!("mass_{i}"), row, Relation::Ge, 1.0)?;
    }
    let mut grids = Vec::with_capacity(n);
    let mut cut_rows = Vec::with_capacity(n);
    for (i, &fbar) in f_vars.iter().enumerate() {
        let edges = instance.agent_edges(i);
        let values: Vec<f64> = edges.iter().map(|&e| instance.edges()[e].value).collect();
        let grid = Grid::nsw(&values, eps)?;
        let mut rows = Vec::with_capacity(grid.len());
        for (t, &h) in grid.levels().iter().enumerate() {
            let mut row = vec![(fbar, 1.0)];
            row.extend(edges.iter().zip(&values).map(|(&e, &v)| (x_vars[e].2, -waterfill::nsw_cut_coefficient(v, h))));
            rows.push(model.add_constraint(format!("cut_{i}_{t}"), row, Relation::Le, waterfill::nsw_cut_constant(h))?);
        }
        grids.push(grid);
        cut_rows.push(rows);
    }
    model.set_objective(f_vars.iter().enumerate().map(|(i, &f)| (f, instance.weight(i))).collect())?;
    Ok(RelaxationLp { model, x_vars, f_vars, grids, cut_rows })
}

pub fn solve_cp_nsw(instance: &NswInstance, eps: f64) -> Result<FractionalSolution> {
    solve_cp_nsw_with(instance, eps, &DenseSimplex::default())
}

pub fn solve_cp_nsw_with(instance: &NswInstance, eps: f64, backend: &impl LpBackend) -> Result<FractionalSolution> {
    let lp = build_nsw_lp(instance, eps)?;
    let (x, value, iterations) = solve_relaxation(&lp, instance.n_agents(), instance.n_items(), backend)
        .map_err(|e| match e {
            Error::Infeasible(_) => Error::Infeasible("no fractional assignment gives every agent mass 1".into()),
            e => e,
        })?;
    let levels = (0..instance.n_agents())
        .map(|i| water_level_of(&x, i, |j| instance.value(i, j).unwrap_or(0.0), LevelConvention::MinSupportValue))
        .collect::<Result<_>>()?;
    Ok(FractionalSolution {
        x,
        value,
        levels,
        eps,
        grid_sizes: lp.grids.iter().map(Grid::len).collect(),
        iterations,
    })
}

/// Load relaxation `min Σ_i f̄_i` with `f̄_i ≥ g_θ(x_i, h)` for every grid level.
pub fn build_theta_lp(instance: &SchedInstance, eps: f64, theta: &impl Theta) -> Result<RelaxationLp> {
    instance.ensure_valid()?;
    let (m, n) = (instance.n_machines(), instance.n_jobs());
    let mut model = LpModel::new("cp_theta", Sense::Minimize);
    let mut x_vars = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            x_vars.push((i, j, model.add_var(format!("x_{i}_{j}"), 0.0, 1.0)?));
        }
    }
    let f_vars: Vec<VarId> = (0..m)
        .map(|i| model.add_var(format!("fbar_{i}"), f64::NEG_INFINITY, f64::INFINITY))
        .collect::<Result<_>>()?;
    for j in 0..n {
        let row = (0..m).map(|i| (x_vars[i * n + j].2, 1.0)).collect();
        model.add_constraint(format!("job_{j}"), row, Relation::Eq, 1.0)?;
    }
    let mut grids = Vec::with_capacity(m);
    let mut cut_rows = Vec::with_capacity(m);
    for i in 0..m {
        let sizes = &instance.sizes()[i];
        let grid = Grid::sched(sizes, eps)?;
        let mut rows = Vec::with_capacity(grid.len());
        for (t, &h) in grid.levels().iter().enumerate() {
            let mut row = vec![(f_vars[i], 1.0)];
            row.extend(
                sizes.iter().enumerate().map(|(j, &p)| (x_vars[i * n + j].2, -waterfill::theta_cut_coefficient(p, h, theta))),
            );
            let d = waterfill::theta_cut_constant(h, theta);
            rows.push(model.add_constraint(format!("cut_{i}_{t}"), row, Relation::Ge, d)?);
        }
        grids.push(grid);
        cut_rows.push(rows);
    }
    model.set_objective(f_vars.iter().map(|&f| (f, 1.0)).collect())?;
    Ok(RelaxationLp { model, x_vars, f_vars, grids, cut_rows })
}

/// Completion-time relaxation `min ½(Σ_i f̄_i + Σ_ij x_ij p_ij²)` over the `θ(t) = t²` cuts.
pub fn build_completion_lp(instance: &SchedInstance, eps: f64) -> Result<RelaxationLp> {
    let mut lp = build_theta_lp(instance, eps, &Power::new(2.0)?)?;
    let mut objective: Vec<(VarId, f64)> = lp.f_vars.iter().map(|&f| (f, 0.5)).collect();
    objective.extend(lp.x_vars.iter().map(|&(i, j, v)| (v, 0.5 * instance.size(i, j).powi(2))));
    lp.model.set_objective(objective)?;
    Ok(lp)
}

pub fn solve_cp_theta(instance: &SchedInstance, eps: f64, theta: &impl Theta) -> Result<FractionalSolution> {
    let lp = build_theta_lp(instance, eps, theta)?;
    finish_sched(instance, &lp, eps, &DenseSimplex::default())
}

pub fn solve_cp_completion(instance: &SchedInstance, eps: f64) -> Result<FractionalSolution> {
    let lp = build_completion_lp(instance, eps)?;
    finish_sched(instance, &lp, eps, &DenseSimplex::default())
}

/// Relaxation matching the instance's own objective.
pub fn build_sched_lp(instance: &SchedInstance, eps: f64) -> Result<RelaxationLp> {
    match instance.objective() {
        SchedObjective::PowerLoad { k } => build_theta_lp(instance, eps, &Power::new(k)?),
        SchedObjective::CompletionUniformSmith => build_completion_lp(instance, eps),
    }
}

pub fn solve_cp_sched(instance: &SchedInstance, eps: f64) -> Result<FractionalSolution> {
    let lp = build_sched_lp(instance, eps)?;
    finish_sched(instance, &lp, eps, &DenseSimplex::default())
}

fn finish_sched(
    instance: &SchedInstance,
    lp: &RelaxationLp,
    eps: f64,
    backend: &impl LpBackend,
) -> Result<FractionalSolution> {
    let (x, value, iterations) = solve_relaxation(lp, instance.n_machines(), instance.n_jobs(), backend)?;
    let levels = (0..instance.n_machines())
        .map(|i| water_level_of(&x, i, |j| instance.size(i, j), LevelConvention::Zero))
        .collect::<Result<_>>()?;
    Ok(FractionalSolution {
        x,
        value,
        levels,
        eps,
        grid_sizes: lp.grids.iter().map(Grid::len).collect(),
        iterations,
    })
}

fn solve_relaxation(
    lp: &RelaxationLp,
    n_players: usize,
    n_objects: usize,
    backend: &impl LpBackend,
) -> Result<(FractionalAssignment, f64, usize)> {
    let result = lp::solve_lp_lazy(&lp.model, &lp.lazy_rows(), backend)?;
    let values = match result.status {
        LpStatus::Optimal { values, .. } => values,
        LpStatus::Infeasible => return Err(Error::Infeasible(format!("{} is infeasible", lp.model.name()))),
        LpStatus::Unbounded => return Err(Error::Unbounded(format!("{} is unbounded", lp.model.name()))),
    };
    let entries = lp
        .x_vars
        .iter()
        .map(|&(player, object, v)| FracEntry { player, object, x: values[v.0] })
        .collect();
    let x = FractionalAssignment::new(n_players, n_objects, entries).pruned(tol::PRUNE);
    let value = lp.model.objective_value(&values);
    Ok((x, value, result.iterations))
}

fn water_level_of(
    x: &FractionalAssignment,
    player: usize,
    value: impl Fn(usize) -> f64,
    convention: LevelConvention,
) -> Result<f64> {
    let profile = player_profile(x, player, value)?;
    match waterfill::water_level(&profile, convention) {
        // Pruning may leave an agent a hair below unit mass.
        Err(Error::InsufficientMass { .. }) => waterfill::water_level(&profile, LevelConvention::Zero),
        r => r,
    }
}

/// Profile of one player's row of `x`, with values looked up by object.
pub fn player_profile(x: &FractionalAssignment, player: usize, value: impl Fn(usize) -> f64) -> Result<Profile> {
    Profile::new(x.player_entries(player).iter().map(|e| (value(e.object), e.x.min(1.0))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_lp;
    use crate::model::Allocation;

    fn nsw_objective(inst: &NswInstance, x: &FractionalAssignment) -> f64 {
        (0..inst.n_agents())
            .map(|i| {
                let p = player_profile(x, i, |j| inst.value(i, j).unwrap()).unwrap();
                inst.weight(i) * waterfill::f_nsw(&p).unwrap()
            })
            .sum()
    }

    #[test]
    fn structural_count() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let lp = build_nsw_lp(&inst, 0.1).unwrap();
        assert_eq!(lp.x_vars.len(), 4);
        assert_eq!(lp.f_vars.len(), 2);
        let cuts: usize = lp.grids.iter().map(Grid::len).sum();
        assert_eq!(lp.model.n_vars(), 6);
        assert_eq!(lp.model.n_rows(), 4 + cuts);
    }

    #[test]
    fn cut_row_for_value_two_at_level_one() {
        assert!((waterfill::nsw_cut_coefficient(2.0, 1.0) - (2f64.ln() + 1.0)).abs() < 1e-15);
        assert_eq!(waterfill::nsw_cut_constant(1.0), -1.0);
    }

    #[test]
    fn single_item_value() {
        let inst = NswInstance::complete(&[1.0], &[vec![5.0]]).unwrap();
        let s = solve_cp_nsw(&inst, 0.1).unwrap();
        assert!(s.value >= 5f64.ln() - 1e-9 && s.value <= 5f64.ln() + 1.1f64.ln() + 1e-9);
    }

    #[test]
    fn single_agent_two_items() {
        let inst = NswInstance::complete(&[1.0], &[vec![3.0, 4.0]]).unwrap();
        for eps in [0.5, 0.1, 1e-3] {
            let s = solve_cp_nsw(&inst, eps).unwrap();
            assert!(s.value >= 7f64.ln() - 1e-9, "{}", s.value);
            assert!(s.value <= 7f64.ln() + (1.0 + eps).ln() + 1e-9);
            assert_eq!(s.levels, vec![7.0]);
        }
    }

    #[test]
    fn two_agents_dominate_optimum() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let eps = 1e-3;
        let s = solve_cp_nsw(&inst, eps).unwrap();
        assert!(s.value.exp() >= 3.0 - 1e-9);
        let f = nsw_objective(&inst, &s.x);
        assert!((s.value - (1.0 + eps).ln()).exp() <= f.exp() + 1e-9);
        inst.check_fractional(&s.x).unwrap();
    }

    #[test]
    fn more_agents_than_items_is_infeasible() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![1.0], vec![2.0]]).unwrap();
        match solve_cp_nsw(&inst, 0.1) {
            Err(Error::Infeasible(msg)) => assert_eq!(msg, "no fractional assignment gives every agent mass 1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lazy_solve_matches_full_model() {
        let inst = NswInstance::complete(
            &[0.2, 0.3, 0.5],
            &[vec![4.0, 1.0, 7.0, 2.0], vec![3.0, 3.0, 1.0, 9.0], vec![1.0, 5.0, 5.0, 5.0]],
        )
        .unwrap();
        let lp = build_nsw_lp(&inst, 0.2).unwrap();
        let full = solve_lp(&lp.model).unwrap();
        let lazy = lp::solve_lp_lazy(&lp.model, &lp.lazy_rows(), &DenseSimplex::default()).unwrap();
        let (a, b) = (full.optimal().unwrap().1, lazy.optimal().unwrap().1);
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn nsw_sandwich_on_solution() {
        let inst = NswInstance::complete(
            &[0.25, 0.25, 0.5],
            &[vec![2.0, 8.0, 3.0, 1.0, 6.0], vec![5.0, 5.0, 2.0, 2.0, 1.0], vec![9.0, 1.0, 1.0, 4.0, 3.0]],
        )
        .unwrap();
        for eps in [0.1, 1e-3] {
            let s = solve_cp_nsw(&inst, eps).unwrap();
            let f = nsw_objective(&inst, &s.x);
            assert!(s.value >= f - 1e-6 && s.value <= f + (1.0 + eps).ln() + 1e-6, "{} vs {f}", s.value);
            let fbar: f64 = (0..3)
                .map(|i| {
                    let p = player_profile(&s.x, i, |j| inst.value(i, j).unwrap()).unwrap();
                    let g = Grid::nsw(&inst.agent_edges(i).iter().map(|&e| inst.edges()[e].value).collect::<Vec<_>>(), eps)
                        .unwrap();
                    inst.weight(i) * waterfill::f_bar_nsw(&p, &g).unwrap()
                })
                .sum();
            assert!((fbar - s.value).abs() < 1e-6);
        }
    }

    #[test]
    fn integral_points_satisfy_relaxation() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0, 2.0], vec![1.0, 3.0, 2.0]]).unwrap();
        let lp = build_nsw_lp(&inst, 0.1).unwrap();
        for a in [vec![0, 1, 0], vec![0, 1, 1], vec![1, 0, 0]] {
            let alloc = Allocation::new(a);
            // x at the allocation, f̄ at the largest value its cuts allow
            let mut point = vec![0.0; lp.model.n_vars()];
            for &(i, j, v) in &lp.x_vars {
                point[v.0] = if alloc.owner(j) == i { 1.0 } else { 0.0 };
            }
            for (i, rows) in lp.cut_rows.iter().enumerate() {
                point[lp.f_vars[i].0] = rows
                    .iter()
                    .map(|r| {
                        let row = &lp.model.constraints()[r.0];
                        row.rhs - row.activity(&point) + point[lp.f_vars[i].0]
                    })
                    .fold(f64::INFINITY, f64::min);
            }
            assert!(lp::is_feasible(&lp.model, &point));
            assert!(lp.model.objective_value(&point) >= inst.log_nsw_value(&alloc).unwrap() - 1e-12);
        }
    }

    #[test]
    fn theta_examples() {
        let sq = Power::new(2.0).unwrap();
        let inst = SchedInstance::from_sizes(vec![vec![1.0, 1.0], vec![1.0, 1.0]], SchedObjective::PowerLoad { k: 2.0 })
            .unwrap();
        let s = solve_cp_theta(&inst, 1e-3, &sq).unwrap();
        assert!((s.value - 2.0).abs() < 1e-6, "{}", s.value);

        let inst = SchedInstance::from_sizes(vec![vec![4.0, 2.0, 1.0]], SchedObjective::PowerLoad { k: 2.0 }).unwrap();
        let eps = 1e-3;
        let s = solve_cp_theta(&inst, eps, &sq).unwrap();
        assert!(s.value <= 49.0 + 1e-9 && s.value >= 49.0 / (1.0 + eps).powi(2) - 1e-9, "{}", s.value);
    }

    #[test]
    fn completion_examples() {
        let one = SchedInstance::from_sizes(vec![vec![2.0]], SchedObjective::CompletionUniformSmith).unwrap();
        assert!((solve_cp_completion(&one, 1e-3).unwrap().value - 4.0).abs() < 1e-9);
        let two = SchedInstance::from_sizes(vec![vec![1.0, 1.0], vec![1.0, 1.0]], SchedObjective::CompletionUniformSmith)
            .unwrap();
        let s = solve_cp_sched(&two, 1e-3).unwrap();
        assert!((s.value - 2.0).abs() < 1e-6, "{}", s.value);
    }

    #[test]
    fn sched_relaxation_below_every_allocation() {
        let p = vec![vec![3.0, 1.0, 4.0], vec![2.0, 5.0, 1.0]];
        for obj in [SchedObjective::PowerLoad { k: 2.0 }, SchedObjective::PowerLoad { k: 3.0 }, SchedObjective::CompletionUniformSmith] {
            let inst = SchedInstance::from_sizes(p.clone(), obj).unwrap();
            let s = solve_cp_sched(&inst, 1e-3).unwrap();
            inst.check_fractional(&s.x).unwrap();
            for code in 0..8usize {
                let alloc = Allocation::new((0..3).map(|j| (code >> j) & 1).collect());
                assert!(s.value <= inst.cost(&alloc) + 1e-9);
            }
        }
    }

    #[test]
    fn solves_are_deterministic() {
        let inst = NswInstance::complete(&[0.6, 0.4], &[vec![2.0, 7.0, 1.0], vec![3.0, 3.0, 3.0]]).unwrap();
        let a = solve_cp_nsw(&inst, 1e-3).unwrap();
        let b = solve_cp_nsw(&inst, 1e-3).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.x, b.x);
    }
}
