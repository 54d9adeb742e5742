//! Instances, allocations and objective evaluation.
//!
//! Both problem families allocate *objects* to *players*: items to agents for
//! NSW, jobs to machines for scheduling. [`Allocation`] and
//! [`FractionalAssignment`] are shared between the two and index players and
//! objects by position.

use std::collections::HashMap;
use std::fmt;

use crate::tol;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub id: String,
    pub weight: f64,
}

/// An agent/item pair that may be allocated, with its value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub agent: usize,
    pub item: usize,
    pub value: f64,
}

/// Invariant violations reported by `validate`.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoPlayers,
    NoObjects,
    WeightNotPositive { agent: String, weight: f64 },
    WeightSum { sum: f64 },
    AgentWithoutEdges { agent: String },
    ItemWithoutEdges { item: String },
    ValueNotPositive { agent: String, item: String, value: f64 },
    DuplicateEdge { agent: String, item: String },
    SizeNotPositive { machine: String, job: String, size: f64 },
    ShapeMismatch { machine: String, expected: usize, found: usize },
    ExponentBelowOne { k: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoPlayers => write!(f, "instance has no agents or machines"),
            Violation::NoObjects => write!(f, "instance has no items or jobs"),
            Violation::WeightNotPositive { agent, weight } => {
                write!(f, "agent `{agent}` has non-positive weight {weight}")
            }
            Violation::WeightSum { sum } => write!(f, "weights sum to {sum}"),
            Violation::AgentWithoutEdges { agent } => {
                write!(f, "agent `{agent}` is not incident to any edge")
            }
            Violation::ItemWithoutEdges { item } => {
                write!(f, "item `{item}` is not incident to any edge")
            }
            Violation::ValueNotPositive { agent, item, value } => {
                write!(f, "value of item `{item}` for agent `{agent}` is {value}, must be positive")
            }
            Violation::DuplicateEdge { agent, item } => {
                write!(f, "duplicate edge between agent `{agent}` and item `{item}`")
            }
            Violation::SizeNotPositive { machine, job, size } => {
                write!(f, "size of job `{job}` on machine `{machine}` is {size}, must be positive")
            }
            Violation::ShapeMismatch { machine, expected, found } => {
                write!(f, "machine `{machine}` lists {found} sizes, expected {expected}")
            }
            Violation::ExponentBelowOne { k } => write!(f, "load exponent {k} is below 1"),
        }
    }
}

/// A weighted NSW instance on a bipartite agent/item graph.
///
/// Construction only checks that ids resolve; the remaining invariants are
/// reported by [`NswInstance::validate`] so that malformed input can be
/// diagnosed in full.
#[derive(Clone, Debug)]
pub struct NswInstance {
    agents: Vec<Agent>,
    items: Vec<String>,
    edges: Vec<Edge>,
    by_agent: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
}

impl NswInstance {
    /// Builds an instance from id-keyed edges `(agent, item, value)`.
    pub fn new(
        agents: Vec<Agent>,
        items: Vec<String>,
        edges: impl IntoIterator<Item = (String, String, f64)>,
    ) -> Result<Self> {
        let agent_ix = index_ids("agent", agents.iter().map(|a| a.id.as_str()))?;
        let item_ix = index_ids("item", items.iter().map(String::as_str))?;
        let mut indexed = Vec::new();
        for (a, j, value) in edges {
            let agent = *agent_ix.get(a.as_str()).ok_or(Error::UnknownId {
                kind: "agent",
                id: a.clone(),
            })?;
            let item = *item_ix.get(j.as_str()).ok_or(Error::UnknownId {
                kind: "item",
                id: j.clone(),
            })?;
            indexed.push(Edge { agent, item, value });
        }
        Self::from_edges(agents, items, indexed)
    }

    /// Builds an instance from position-indexed edges.
    pub fn from_edges(agents: Vec<Agent>, items: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let mut by_agent = vec![Vec::new(); agents.len()];
        let mut by_item = vec![Vec::new(); items.len()];
        for (e, edge) in edges.iter().enumerate() {
            if edge.agent >= agents.len() {
                return Err(Error::UnknownId { kind: "agent", id: edge.agent.to_string() });
            }
            if edge.item >= items.len() {
                return Err(Error::UnknownId { kind: "item", id: edge.item.to_string() });
            }
            by_agent[edge.agent].push(e);
            by_item[edge.item].push(e);
        }
        for list in &mut by_agent {
            list.sort_by_key(|&e| edges[e].item);
        }
        for list in &mut by_item {
            list.sort_by_key(|&e| edges[e].agent);
        }
        Ok(Self { agents, items, edges, by_agent, by_item })
    }

    /// Complete bipartite instance from a dense `values[agent][item]` matrix,
    /// with generated ids `a1.., j1..`.
    pub fn complete(weights: &[f64], values: &[Vec<f64>]) -> Result<Self> {
        let m = values.first().map_or(0, Vec::len);
        let agents = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Agent { id: format!("a{}", i + 1), weight: w })
            .collect();
        let items = (0..m).map(|j| format!("j{}", j + 1)).collect();
        let mut edges = Vec::new();
        for (agent, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidArgument("ragged value matrix".into()));
            }
            for (item, &value) in row.iter().enumerate() {
                edges.push(Edge { agent, item, value });
            }
        }
        Self::from_edges(agents, items, edges)
    }

    /// Complete instance with uniform weights `1/n`.
    pub fn unweighted(values: &[Vec<f64>]) -> Result<Self> {
        let n = values.len();
        Self::complete(&vec![1.0 / n as f64; n], values)
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn weight(&self, agent: usize) -> f64 {
        self.agents[agent].weight
    }

    /// Edge indices incident to `agent`, ordered by item.
    pub fn agent_edges(&self, agent: usize) -> &[usize] {
        &self.by_agent[agent]
    }

    /// Edge indices incident to `item`, ordered by agent.
    pub fn item_edges(&self, item: usize) -> &[usize] {
        &self.by_item[item]
    }

    pub fn edge_between(&self, agent: usize, item: usize) -> Option<usize> {
        self.by_agent[agent].iter().copied().find(|&e| self.edges[e].item == item)
    }

    pub fn value(&self, agent: usize, item: usize) -> Option<f64> {
        self.edge_between(agent, item).map(|e| self.edges[e].value)
    }

    /// True when every agent carries weight `1/n` (within the weight tolerance).
    pub fn is_unweighted(&self) -> bool {
        let w = 1.0 / self.n_agents() as f64;
        self.agents.iter().all(|a| (a.weight - w).abs() <= tol::WEIGHT_SUM)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.agents.is_empty() {
            out.push(Violation::NoPlayers);
        }
        if self.items.is_empty() {
            out.push(Violation::NoObjects);
        }
        let mut sum = 0.0;
        for a in &self.agents {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                out.push(Violation::WeightNotPositive { agent: a.id.clone(), weight: a.weight });
            }
            sum += a.weight;
        }
        if !self.agents.is_empty() && (sum - 1.0).abs() > tol::WEIGHT_SUM {
            out.push(Violation::WeightSum { sum });
        }
        for (i, list) in self.by_agent.iter().enumerate() {
            if list.is_empty() {
                out.push(Violation::AgentWithoutEdges { agent: self.agents[i].id.clone() });
            }
        }
        for (j, list) in self.by_item.iter().enumerate() {
            if list.is_empty() {
                out.push(Violation::ItemWithoutEdges { item: self.items[j].clone() });
            }
        }
        let mut seen = HashMap::new();
        for e in &self.edges {
            let agent = &self.agents[e.agent].id;
            let item = &self.items[e.item];
            if !(e.value > 0.0 && e.value.is_finite()) {
                out.push(Violation::ValueNotPositive {
                    agent: agent.clone(),
                    item: item.clone(),
                    value: e.value,
                });
            }
            if seen.insert((e.agent, e.item), ()).is_some() {
                out.push(Violation::DuplicateEdge { agent: agent.clone(), item: item.clone() });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v))
        }
    }

    /// Bundle values `v_i(ρ⁻¹(i))` of an allocation.
    pub fn bundle_values(&self, allocation: &Allocation) -> Result<Vec<f64>> {
        if allocation.len() != self.n_items() {
            return Err(Error::InvalidAllocation(format!(
                "allocation covers {} items, instance has {}",
                allocation.len(),
                self.n_items()
            )));
        }
        let mut values = vec![0.0; self.n_agents()];
        for (item, &agent) in allocation.owners().iter().enumerate() {
            if agent >= self.n_agents() {
                return Err(Error::InvalidAllocation(format!("agent index {agent} out of range")));
            }
            let v = self.value(agent, item).ok_or_else(|| {
                Error::InvalidAllocation(format!(
                    "item `{}` allocated to non-adjacent agent `{}`",
                    self.items[item], self.agents[agent].id
                ))
            })?;
            values[agent] += v;
        }
        Ok(values)
    }

    /// Weighted NSW `Π_i v_i(ρ⁻¹(i))^{w_i}`.
    pub fn nsw_value(&self, allocation: &Allocation) -> Result<f64> {
        let values = self.bundle_values(allocation)?;
        Ok(values
            .iter()
            .zip(&self.agents)
            .map(|(&v, a)| if v > 0.0 { v.powf(a.weight) } else { 0.0 })
            .product())
    }

    /// `Σ_i w_i ln v_i(ρ⁻¹(i))`; `-inf` when some agent is empty-handed.
    pub fn log_nsw_value(&self, allocation: &Allocation) -> Result<f64> {
        let values = self.bundle_values(allocation)?;
        Ok(values
            .iter()
            .zip(&self.agents)
            .map(|(&v, a)| a.weight * v.ln())
            .sum())
    }

    /// Checks that `x` is a fractional assignment over this instance's edges
    /// giving every item mass one and every agent mass at least one.
    pub fn check_fractional(&self, x: &FractionalAssignment) -> Result<()> {
        if x.n_players() != self.n_agents() || x.n_objects() != self.n_items() {
            return Err(Error::InvalidFractional("dimension mismatch".into()));
        }
        for e in x.entries() {
            if e.x > 0.0 && self.edge_between(e.player, e.object).is_none() {
                return Err(Error::InvalidFractional(format!(
                    "mass on non-edge ({}, {})",
                    self.agents[e.player].id, self.items[e.object]
                )));
            }
        }
        x.check(true)
    }
}

fn index_ids<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<HashMap<&'a str, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id, i).is_some() {
            return Err(Error::DuplicateId { kind, id: id.to_string() });
        }
    }
    Ok(map)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchedObjective {
    /// `Σ_i load_i^k`.
    PowerLoad { k: f64 },
    /// `½ Σ_i (load_i² + Σ_{j→i} p_ij²)`: weighted completion time when every
    /// job's weight equals its processing time.
    CompletionUniformSmith,
}

/// Unrelated-machine scheduling instance with a dense size matrix `p[machine][job]`.
#[derive(Clone, Debug)]
pub struct SchedInstance {
    machines: Vec<String>,
    jobs: Vec<String>,
    p: Vec<Vec<f64>>,
    objective: SchedObjective,
}

impl SchedInstance {
    pub fn new(
        machines: Vec<String>,
        jobs: Vec<String>,
        p: Vec<Vec<f64>>,
        objective: SchedObjective,
    ) -> Result<Self> {
        index_ids("machine", machines.iter().map(String::as_str))?;
        index_ids("job", jobs.iter().map(String::as_str))?;
        if p.len() != machines.len() {
            return Err(Error::InvalidArgument(format!(
                "size matrix has {} rows for {} machines",
                p.len(),
                machines.len()
            )));
        }
        Ok(Self { machines, jobs, p, objective })
    }

    /// Instance with generated ids `m1.., j1..`.
    pub fn from_sizes(p: Vec<Vec<f64>>, objective: SchedObjective) -> Result<Self> {
        let n = p.first().map_or(0, Vec::len);
        let machines = (0..p.len()).map(|i| format!("m{}", i + 1)).collect();
        let jobs = (0..n).map(|j| format!("j{}", j + 1)).collect();
        Self::new(machines, jobs, p, objective)
    }

    pub fn machines(&self) -> &[String] {
        &self.machines
    }

    pub fn jobs(&self) -> &[String] {
        &self.jobs
    }

    pub fn n_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn size(&self, machine: usize, job: usize) -> f64 {
        self.p[machine][job]
    }

    pub fn sizes(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn objective(&self) -> SchedObjective {
        self.objective
    }

    pub fn with_objective(&self, objective: SchedObjective) -> Self {
        Self { objective, ..self.clone() }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.machines.is_empty() {
            out.push(Violation::NoPlayers);
        }
        if self.jobs.is_empty() {
            out.push(Violation::NoObjects);
        }
        for (i, row) in self.p.iter().enumerate() {
            if row.len() != self.jobs.len() {
                out.push(Violation::ShapeMismatch {
                    machine: self.machines[i].clone(),
                    expected: self.jobs.len(),
                    found: row.len(),
                });
                continue;
            }
            for (j, &size) in row.iter().enumerate() {
                if !(size > 0.0 && size.is_finite()) {
                    out.push(Violation::SizeNotPositive {
                        machine: self.machines[i].clone(),
                        job: self.jobs[j].clone(),
                        size,
                    });
                }
            }
        }
        if let SchedObjective::PowerLoad { k } = self.objective {
            if !(k >= 1.0 && k.is_finite()) {
                out.push(Violation::ExponentBelowOne { k });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v))
        }
    }

    pub fn loads(&self, allocation: &Allocation) -> Vec<f64> {
        let mut loads = vec![0.0; self.n_machines()];
        for (job, &machine) in allocation.owners().iter().enumerate() {
            loads[machine] += self.p[machine][job];
        }
        loads
    }

    /// Cost of a total allocation under the instance objective.
    pub fn cost(&self, allocation: &Allocation) -> f64 {
        let loads = self.loads(allocation);
        match self.objective {
            SchedObjective::PowerLoad { k } => loads.iter().map(|l| l.powf(k)).sum(),
            SchedObjective::CompletionUniformSmith => {
                let squares: f64 = allocation
                    .owners()
                    .iter()
                    .enumerate()
                    .map(|(job, &machine)| self.p[machine][job].powi(2))
                    .sum();
                0.5 * (loads.iter().map(|l| l * l).sum::<f64>() + squares)
            }
        }
    }

    /// Checks that `x` assigns every job total mass one.
    pub fn check_fractional(&self, x: &FractionalAssignment) -> Result<()> {
        if x.n_players() != self.n_machines() || x.n_objects() != self.n_jobs() {
            return Err(Error::InvalidFractional("dimension mismatch".into()));
        }
        x.check(false)
    }
}

/// Total map object → player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    owner: Vec<usize>,
}

impl Allocation {
    pub fn new(owner: Vec<usize>) -> Self {
        Self { owner }
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn owner(&self, object: usize) -> usize {
        self.owner[object]
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    /// Objects held by each of `n_players` players, in ascending order.
    pub fn bundles(&self, n_players: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_players];
        for (object, &player) in self.owner.iter().enumerate() {
            out[player].push(object);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracEntry {
    pub player: usize,
    pub object: usize,
    pub x: f64,
}

/// Sparse fractional assignment `x_ij ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAssignment {
    n_players: usize,
    n_objects: usize,
    entries: Vec<FracEntry>,
}

impl FractionalAssignment {
    /// Entries are sorted by (player, object); duplicate pairs are summed.
    pub fn new(n_players: usize, n_objects: usize, mut entries: Vec<FracEntry>) -> Self {
        entries.sort_by_key(|e| (e.player, e.object));
        let mut merged: Vec<FracEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.player == e.player && last.object == e.object => last.x += e.x,
                _ => merged.push(e),
            }
        }
        Self { n_players, n_objects, entries: merged }
    }

    pub fn from_allocation(n_players: usize, allocation: &Allocation) -> Self {
        let entries = allocation
            .owners()
            .iter()
            .enumerate()
            .map(|(object, &player)| FracEntry { player, object, x: 1.0 })
            .collect();
        Self::new(n_players, allocation.len(), entries)
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn entries(&self) -> &[FracEntry] {
        &self.entries
    }

    pub fn get(&self, player: usize, object: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(player, object), |e| (e.player, e.object))
            .map_or(0.0, |k| self.entries[k].x)
    }

    /// Entries of one player, ordered by object.
    pub fn player_entries(&self, player: usize) -> &[FracEntry] {
        let lo = self.entries.partition_point(|e| e.player < player);
        let hi = self.entries.partition_point(|e| e.player <= player);
        &self.entries[lo..hi]
    }

    pub fn player_totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.n_players];
        for e in &self.entries {
            t[e.player] += e.x;
        }
        t
    }

    pub fn object_totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.n_objects];
        for e in &self.entries {
            t[e.object] += e.x;
        }
        t
    }

    /// Object columns sum to one, entries lie in `[0, 1]`, and optionally every
    /// player has mass at least one; all within the feasibility tolerance.
    pub fn check(&self, require_player_mass: bool) -> Result<()> {
        for e in &self.entries {
            if e.player >= self.n_players || e.object >= self.n_objects {
                return Err(Error::InvalidFractional("entry index out of range".into()));
            }
            if !(e.x >= -tol::FEASIBILITY && e.x <= 1.0 + tol::FEASIBILITY) {
                return Err(Error::InvalidFractional(format!(
                    "x[{}][{}] = {} outside [0, 1]",
                    e.player, e.object, e.x
                )));
            }
        }
        for (j, t) in self.object_totals().into_iter().enumerate() {
            if (t - 1.0).abs() > tol::FEASIBILITY {
                return Err(Error::InvalidFractional(format!("object {j} has total mass {t}")));
            }
        }
        if require_player_mass {
            for (i, t) in self.player_totals().into_iter().enumerate() {
                if t < 1.0 - tol::FEASIBILITY {
                    return Err(Error::InvalidFractional(format!("player {i} has mass {t} < 1")));
                }
            }
        }
        Ok(())
    }

    /// Drops entries below `threshold` and rescales each object column to sum to one.
    pub fn pruned(&self, threshold: f64) -> Self {
        let kept: Vec<FracEntry> = self.entries.iter().copied().filter(|e| e.x >= threshold).collect();
        let mut totals = vec![0.0; self.n_objects];
        for e in &kept {
            totals[e.object] += e.x;
        }
        let entries = kept
            .into_iter()
            .map(|e| FracEntry { x: e.x / totals[e.object], ..e })
            .collect();
        Self::new(self.n_players, self.n_objects, entries)
    }
}
