//! Group-partition rounding of fractional assignments.
//!
//! Each player's fractional row is cut into unit-mass groups along the order
//! of non-increasing value (or size), which turns `x` into a fractional
//! matching between groups and objects. That matching is peeled into a convex
//! combination of integral matchings covering every object and every full
//! group; each matching induces an allocation and the allocation marginals
//! equal `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Allocation, FracEntry, FractionalAssignment, NswInstance, SchedInstance};
use crate::tol;
use crate::{Error, Result};

/// Player mass treated as a full group.
const FULL: f64 = 1e-9;
/// Residual mass at which peeling stops.
const DONE: f64 = 1e-10;

/// Ranking of objects used to build groups: larger keys come first.
pub trait GroupKey {
    fn key(&self, player: usize, object: usize) -> f64;
    /// Whether every player must hold mass at least one.
    fn requires_unit_mass(&self) -> bool;
}

impl GroupKey for NswInstance {
    fn key(&self, player: usize, object: usize) -> f64 {
        self.value(player, object).unwrap_or(0.0)
    }

    fn requires_unit_mass(&self) -> bool {
        true
    }
}

impl GroupKey for SchedInstance {
    fn key(&self, player: usize, object: usize) -> f64 {
        self.size(player, object)
    }

    fn requires_unit_mass(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub player: usize,
    /// Position `t` among the player's groups, from zero.
    pub index: usize,
    /// `(object, fraction)` in the player's order.
    pub entries: Vec<(usize, f64)>,
}

impl Group {
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSystem {
    pub n_players: usize,
    pub n_objects: usize,
    /// Groups ordered by player, then index.
    pub groups: Vec<Group>,
    /// Each player's object order (best first) over its support.
    pub orders: Vec<Vec<usize>>,
}

impl GroupSystem {
    pub fn player_groups(&self, player: usize) -> impl Iterator<Item = &Group> {
        self.groups.iter().filter(move |g| g.player == player)
    }
}

/// Cuts each row of `x` into consecutive groups of mass one (the last group
/// takes the remainder), walking objects by non-increasing key with ties
/// broken by ascending object index.
pub fn partition_groups(x: &FractionalAssignment, instance: &impl GroupKey) -> Result<GroupSystem> {
    let mut groups = Vec::new();
    let mut orders = Vec::with_capacity(x.n_players());
    for player in 0..x.n_players() {
        let mut row: Vec<FracEntry> = x.player_entries(player).iter().copied().filter(|e| e.x > 0.0).collect();
        let total: f64 = row.iter().map(|e| e.x).sum();
        if instance.requires_unit_mass() && total < 1.0 - tol::FEASIBILITY {
            return Err(Error::InvalidFractional(format!("player {player} has mass {total} < 1")));
        }
        row.sort_by(|a, b| {
            instance.key(player, b.object).total_cmp(&instance.key(player, a.object)).then(a.object.cmp(&b.object))
        });
        orders.push(row.iter().map(|e| e.object).collect());
        if row.is_empty() {
            continue;
        }
        let q = ((total - FULL).ceil() as usize).max(1);
        let mut current = Group { player, index: 0, entries: Vec::new() };
        let mut room = 1.0;
        for e in &row {
            let mut rest = e.x;
            while rest > 0.0 {
                let last = current.index + 1 == q;
                let piece = if last || rest - room <= tol::MASS_ZERO { rest } else { room };
                current.entries.push((e.object, piece));
                rest -= piece;
                room -= piece;
                if !last && room <= tol::MASS_ZERO {
                    let next = Group { player, index: current.index + 1, entries: Vec::new() };
                    groups.push(std::mem::replace(&mut current, next));
                    room = 1.0;
                }
            }
        }
        if !current.entries.is_empty() {
            groups.push(current);
        }
    }
    Ok(GroupSystem { n_players: x.n_players(), n_objects: x.n_objects(), groups, orders })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub lambda: f64,
    /// Group (index into [`GroupSystem::groups`]) receiving each object.
    pub matching: Vec<usize>,
    pub allocation: Allocation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub n_players: usize,
    pub terms: Vec<Term>,
}

impl Decomposition {
    /// `Σ_k λ_k [allocation_k gives object j to player i]`.
    pub fn marginals(&self) -> FractionalAssignment {
        let n_objects = self.terms.first().map_or(0, |t| t.allocation.len());
        let entries = self
            .terms
            .iter()
            .flat_map(|t| {
                t.allocation.owners().iter().enumerate().map(|(object, &player)| FracEntry { player, object, x: t.lambda })
            })
            .collect();
        FractionalAssignment::new(self.n_players, n_objects, entries)
    }
}

/// Writes the group/object fractional matching as a convex combination of
/// integral matchings that cover every object and every full group.
pub fn decompose(system: &GroupSystem) -> Result<Decomposition> {
    let n_groups = system.groups.len();
    let n_objects = system.n_objects;
    // w[g][j]: residual mass on edge (group g, object j).
    let mut w = vec![vec![0.0; n_objects]; n_groups];
    for (g, group) in system.groups.iter().enumerate() {
        for &(j, z) in &group.entries {
            w[g][j] += z;
        }
    }
    let mut residual = 1.0;
    let mut terms = Vec::new();
    let max_terms = n_groups * n_objects + n_groups + 1;
    while residual > DONE {
        if terms.len() > max_terms {
            return Err(Error::Internal("matching decomposition does not terminate".into()));
        }
        let degree: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
        let tight: Vec<bool> = degree.iter().map(|&d| d >= residual - FULL * residual.max(DONE)).collect();
        let matching = covering_matching(&w, &tight)
            .ok_or_else(|| Error::Internal("no matching covers all objects and full groups".into()))?;
        let mut covered = vec![false; n_groups];
        let mut lambda = residual;
        for (j, &g) in matching.iter().enumerate() {
            covered[g] = true;
            lambda = lambda.min(w[g][j]);
        }
        for g in 0..n_groups {
            if !covered[g] && degree[g] > 0.0 {
                lambda = lambda.min(residual - degree[g]);
            }
        }
        if !(lambda > 0.0) {
            return Err(Error::Internal(format!("non-positive peeling step {lambda}")));
        }
        for (j, &g) in matching.iter().enumerate() {
            w[g][j] -= lambda;
        }
        for row in &mut w {
            for v in row.iter_mut() {
                if *v <= tol::MASS_ZERO {
                    *v = 0.0;
                }
            }
        }
        residual -= lambda;
        let allocation = Allocation::new(matching.iter().map(|&g| system.groups[g].player).collect());
        terms.push(Term { lambda, matching, allocation });
    }
    let total: f64 = terms.iter().map(|t| t.lambda).sum();
    for t in &mut terms {
        t.lambda /= total;
    }
    Ok(Decomposition { n_players: system.n_players, terms })
}

/// Matching in the support of `w` covering every object and every `tight` group.
fn covering_matching(w: &[Vec<f64>], tight: &[bool]) -> Option<Vec<usize>> {
    let n_groups = w.len();
    let n_objects = w.first().map_or(0, Vec::len);
    let adj_obj: Vec<Vec<usize>> = (0..n_objects).map(|j| (0..n_groups).filter(|&g| w[g][j] > 0.0).collect()).collect();
    let mut group_of = vec![usize::MAX; n_objects];
    let mut object_of = vec![usize::MAX; n_groups];

    // Cover all objects with Kuhn's augmenting paths.
    for j in 0..n_objects {
        let mut seen = vec![false; n_groups];
        if !augment(j, &adj_obj, &mut seen, &mut group_of, &mut object_of) {
            return None;
        }
    }

    // Pull every uncovered tight group in along an alternating path ending at a
    // covered group that is not tight.
    for start in 0..n_groups {
        if !tight[start] || object_of[start] != usize::MAX {
            continue;
        }
        // BFS over groups; parent[g] = (previous group, object moved to it)
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_groups];
        let mut visited = vec![false; n_groups];
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut end = None;
        'bfs: while let Some(g) = queue.pop_front() {
            for j in 0..n_objects {
                if w[g][j] <= 0.0 || group_of[j] == g {
                    continue;
                }
                let next = group_of[j];
                if visited[next] {
                    continue;
                }
                visited[next] = true;
                parent[next] = Some((g, j));
                if !tight[next] {
                    end = Some(next);
                    break 'bfs;
                }
                queue.push_back(next);
            }
        }
        let mut g = end?;
        object_of[g] = usize::MAX;
        while let Some((prev, j)) = parent[g] {
            group_of[j] = prev;
            object_of[prev] = j;
            g = prev;
        }
    }
    Some(group_of)
}

fn augment(
    j: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    group_of: &mut [usize],
    object_of: &mut [usize],
) -> bool {
    for &g in &adj[j] {
        if seen[g] {
            continue;
        }
        seen[g] = true;
        if object_of[g] == usize::MAX || augment(object_of[g], adj, seen, group_of, object_of) {
            group_of[j] = g;
            object_of[g] = j;
            return true;
        }
    }
    false
}

/// Draws a term with probability `λ_k`.
pub fn sample(decomposition: &Decomposition, seed: u64) -> Result<Allocation> {
    let last = decomposition.terms.last().ok_or_else(|| Error::InvalidArgument("empty decomposition".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for t in &decomposition.terms {
        acc += t.lambda;
        if u < acc {
            return Ok(t.allocation.clone());
        }
    }
    Ok(last.allocation.clone())
}

/// Objective used to pick the best term.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// Maximise weighted NSW; the expectation is of `Σ_i w_i ln v_i`.
    Nsw(&'a NswInstance),
    /// Minimise the instance cost; the expectation is of the cost.
    Sched(&'a SchedInstance),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestAllocation {
    pub allocation: Allocation,
    /// NSW product or scheduling cost of `allocation`.
    pub value: f64,
    /// Exact `λ`-weighted expectation over the decomposition.
    pub expected: f64,
}

/// Best term of the decomposition (first on ties) and the exact expectation.
pub fn best_allocation(decomposition: &Decomposition, objective: Objective<'_>) -> Result<BestAllocation> {
    if decomposition.terms.is_empty() {
        return Err(Error::InvalidArgument("empty decomposition".into()));
    }
    let mut expected = 0.0;
    let mut best: Option<(f64, &Term)> = None;
    for t in &decomposition.terms {
        // Score to maximise.
        let (score, analysis) = match objective {
            Objective::Nsw(inst) => {
                let log = inst.log_nsw_value(&t.allocation)?;
                if !log.is_finite() {
                    return Err(Error::Internal("decomposition term leaves an agent empty-handed".into()));
                }
                (log, log)
            }
            Objective::Sched(inst) => {
                let cost = inst.cost(&t.allocation);
                (-cost, cost)
            }
        };
        expected += t.lambda * analysis;
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, t));
        }
    }
    let (_, term) = best.expect("non-empty");
    let value = match objective {
        Objective::Nsw(inst) => inst.nsw_value(&term.allocation)?,
        Objective::Sched(inst) => inst.cost(&term.allocation),
    };
    Ok(BestAllocation { allocation: term.allocation.clone(), value, expected })
}

/// Partition and decomposition in one step.
pub fn round(x: &FractionalAssignment, instance: &impl GroupKey) -> Result<Decomposition> {
    decompose(&partition_groups(x, instance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SchedObjective;
    use proptest::prelude::*;

    fn frac(n: usize, m: usize, x: &[(usize, usize, f64)]) -> FractionalAssignment {
        FractionalAssignment::new(n, m, x.iter().map(|&(player, object, x)| FracEntry { player, object, x }).collect())
    }

    fn entries(g: &Group) -> Vec<(usize, f64)> {
        g.entries.clone()
    }

    /// Overlap of each object's prefix interval with `[t, t+1]` (last group unbounded).
    fn prefix_groups(masses: &[(usize, f64)], q: usize) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); q];
        let mut start = 0.0;
        for &(j, x) in masses {
            let end = start + x;
            for (t, group) in out.iter_mut().enumerate() {
                let hi = if t + 1 == q { f64::INFINITY } else { (t + 1) as f64 };
                let overlap = end.min(hi) - start.max(t as f64);
                if overlap > 1e-12 {
                    group.push((j, overlap));
                }
            }
            start = end;
        }
        out
    }

    #[test]
    fn partition_example() {
        let inst = NswInstance::complete(&[1.0], &[vec![4.0, 2.0, 1.0]]).unwrap();
        let x = frac(1, 3, &[(0, 0, 0.5), (0, 1, 1.0), (0, 2, 1.0)]);
        let s = partition_groups(&x, &inst).unwrap();
        assert_eq!(s.groups.len(), 3);
        assert_eq!(entries(&s.groups[0]), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(entries(&s.groups[1]), vec![(1, 0.5), (2, 0.5)]);
        assert_eq!(entries(&s.groups[2]), vec![(2, 0.5)]);
        assert_eq!(s.orders[0], vec![0, 1, 2]);
    }

    #[test]
    fn partition_of_integral_rows() {
        let inst = NswInstance::complete(&[1.0], &[vec![4.0, 1.0]]).unwrap();
        let s = partition_groups(&frac(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]), &inst).unwrap();
        assert_eq!(entries(&s.groups[0]), vec![(0, 1.0)]);
        assert_eq!(entries(&s.groups[1]), vec![(1, 1.0)]);

        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let s = partition_groups(&frac(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]), &inst).unwrap();
        assert_eq!(s.groups.len(), 2);
        assert_eq!(entries(&s.groups[0]), vec![(0, 1.0)]);
        assert_eq!(entries(&s.groups[1]), vec![(1, 1.0)]);
    }

    #[test]
    fn partition_rejects_short_agents() {
        let inst = NswInstance::complete(&[1.0], &[vec![4.0, 1.0]]).unwrap();
        assert!(partition_groups(&frac(1, 2, &[(0, 0, 0.5)]), &inst).is_err());
    }

    #[test]
    fn ties_follow_object_order() {
        let inst = NswInstance::complete(&[1.0], &[vec![2.0, 5.0, 2.0]]).unwrap();
        let s = partition_groups(&frac(1, 3, &[(0, 0, 0.5), (0, 1, 0.5), (0, 2, 0.5)]), &inst).unwrap();
        assert_eq!(s.orders[0], vec![1, 0, 2]);
        assert_eq!(entries(&s.groups[0]), vec![(1, 0.5), (0, 0.5)]);
    }

    #[test]
    fn integral_matching_is_its_own_decomposition() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let d = round(&frac(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]), &inst).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].lambda, 1.0);
        assert_eq!(d.terms[0].allocation.owners(), &[0, 1]);
        let b = best_allocation(&d, Objective::Nsw(&inst)).unwrap();
        assert!((b.value - 3.0).abs() < 1e-12);
        assert!((b.expected - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_two_by_two() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let d = round(&frac(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]), &inst).unwrap();
        assert_eq!(d.terms.len(), 2);
        for t in &d.terms {
            assert!((t.lambda - 0.5).abs() < 1e-12);
        }
        assert_ne!(d.terms[0].allocation, d.terms[1].allocation);
    }

    #[test]
    fn sampling_frequencies_and_determinism() {
        let inst = NswInstance::complete(&[0.5, 0.5], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let d = round(&frac(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]), &inst).unwrap();
        let first = &d.terms[0].allocation;
        let hits = (0..10_000u64).filter(|&s| &sample(&d, s).unwrap() == first).count();
        assert!((hits as f64 / 1e4 - 0.5).abs() < 0.02, "{hits}");
        assert_eq!(sample(&d, 42).unwrap(), sample(&d, 42).unwrap());

        let single = round(&frac(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]), &inst).unwrap();
        for s in 0..20 {
            assert_eq!(sample(&single, s).unwrap().owners(), &[0, 1]);
        }
    }

    #[test]
    fn scheduling_rows_may_be_light() {
        let inst = SchedInstance::from_sizes(vec![vec![3.0, 2.0, 1.0], vec![1.0, 1.0, 5.0]], SchedObjective::PowerLoad { k: 2.0 })
            .unwrap();
        let x = frac(2, 3, &[(0, 0, 0.3), (0, 1, 0.6), (1, 0, 0.7), (1, 1, 0.4), (1, 2, 1.0)]);
        let d = round(&x, &inst).unwrap();
        let marg = d.marginals();
        for e in x.entries() {
            assert!((marg.get(e.player, e.object) - e.x).abs() < 1e-9);
        }
        let b = best_allocation(&d, Objective::Sched(&inst)).unwrap();
        assert!(b.value <= b.expected + 1e-12);
    }

    /// Values and a mixture of up to three allocations, each giving every agent an item.
    fn random_mixture() -> impl Strategy<Value = (Vec<Vec<f64>>, FractionalAssignment)> {
        (2usize..=4, 0usize..=4).prop_flat_map(|(n, extra)| {
            let m = n + extra;
            (
                prop::collection::vec(prop::collection::vec(1u32..=10, m), n),
                prop::collection::vec((prop::collection::vec(0..n, m), 0..m, 1u32..=5), 1..=3),
            )
                .prop_map(move |(values, parts)| {
                    let values = values.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                    let total: u32 = parts.iter().map(|p| p.2).sum();
                    let mut e = Vec::new();
                    for (mut owner, shift, weight) in parts {
                        for i in 0..n {
                            owner[(i + shift) % m] = i;
                        }
                        let mu = f64::from(weight) / f64::from(total);
                        e.extend(owner.iter().enumerate().map(|(object, &player)| FracEntry { player, object, x: mu }));
                    }
                    (values, FractionalAssignment::new(n, m, e))
                })
        })
    }

    proptest! {
        #[test]
        fn groups_match_prefix_construction((values, x) in random_mixture()) {
            let n = values.len();
            let inst = NswInstance::unweighted(&values).unwrap();
            let s = partition_groups(&x, &inst).unwrap();
            for i in 0..n {
                let row: Vec<(usize, f64)> = s.orders[i].iter().map(|&j| (j, x.get(i, j))).collect();
                let total: f64 = row.iter().map(|r| r.1).sum();
                let q = (total - 1e-9).ceil() as usize;
                let oracle = prefix_groups(&row, q);
                let mine: Vec<&Group> = s.player_groups(i).collect();
                prop_assert_eq!(mine.len(), q);
                for (g, o) in mine.iter().zip(&oracle) {
                    prop_assert_eq!(g.entries.len(), o.len());
                    for (a, b) in g.entries.iter().zip(o) {
                        prop_assert_eq!(a.0, b.0);
                        prop_assert!((a.1 - b.1).abs() < 1e-12);
                    }
                }
                for g in mine.iter().take(q - 1) {
                    prop_assert!((g.mass() - 1.0).abs() < 1e-12);
                }
                // order consistency: positions in the order never decrease across groups
                let pos = |j: usize| s.orders[i].iter().position(|&o| o == j).unwrap();
                let flat: Vec<usize> = mine.iter().flat_map(|g| g.entries.iter().map(|e| pos(e.0))).collect();
                prop_assert!(flat.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn decomposition_preserves_marginals((values, x) in random_mixture()) {
            let (n, m) = (values.len(), values[0].len());
            let inst = NswInstance::unweighted(&values).unwrap();
            let s = partition_groups(&x, &inst).unwrap();
            let d = decompose(&s).unwrap();
            let sum: f64 = d.terms.iter().map(|t| t.lambda).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let support: usize = s.groups.iter().map(|g| g.entries.len()).sum();
            prop_assert!(d.terms.len() <= support + s.groups.len());
            let marg = d.marginals();
            for i in 0..n {
                for j in 0..m {
                    prop_assert!((marg.get(i, j) - x.get(i, j)).abs() < tol::MARGINAL);
                }
            }
            for t in &d.terms {
                prop_assert!(t.lambda > 0.0);
                let bundles = t.allocation.bundles(n);
                prop_assert!(bundles.iter().all(|b| !b.is_empty()));
                for (g, group) in s.groups.iter().enumerate() {
                    if group.mass() >= 1.0 - 1e-9 {
                        prop_assert!(t.matching.contains(&g));
                    }
                }
            }
            let best = best_allocation(&d, Objective::Nsw(&inst)).unwrap();
            prop_assert!(best.value.ln() >= best.expected - 1e-12);
        }
    }
}
