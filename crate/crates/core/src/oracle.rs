//! Exhaustive solvers for tiny instances.
//!
//! Allocations are enumerated in lexicographic order of the owner vector and
//! only strict improvements replace the incumbent, so the lexicographically
//! smallest optimum is returned.

use crate::ef1::{self, IdenticalInstance};
use crate::model::{Allocation, NswInstance, SchedInstance};
use crate::{Error, Result};

pub const NSW_LIMIT: f64 = 1e7;
pub const SCHED_LIMIT: f64 = 1e7;
pub const EF1_LIMIT: f64 = 1e6;

fn guard(count: f64, limit: f64) -> Result<()> {
    if count > limit {
        Err(Error::TooLarge { count, limit })
    } else {
        Ok(())
    }
}

/// Calls `visit` on every owner vector with `owner[j] ∈ choices[j]`, in lexicographic order.
fn for_each_assignment(choices: &[Vec<usize>], mut visit: impl FnMut(&[usize])) {
    if choices.iter().any(Vec::is_empty) {
        return;
    }
    let m = choices.len();
    let mut pos = vec![0usize; m];
    let mut owner: Vec<usize> = choices.iter().map(|c| c[0]).collect();
    loop {
        visit(&owner);
        let mut j = m;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            pos[j] += 1;
            if pos[j] < choices[j].len() {
                owner[j] = choices[j][pos[j]];
                break;
            }
            pos[j] = 0;
            owner[j] = choices[j][0];
        }
    }
}

/// Maximum weighted NSW over allocations along the instance's edges.
///
/// The search space is `Π_j |N_j|` allocations, which equals `n^m` on complete instances.
pub fn brute_nsw_opt(instance: &NswInstance) -> Result<(f64, Allocation)> {
    instance.ensure_valid()?;
    let choices: Vec<Vec<usize>> = (0..instance.n_items())
        .map(|j| instance.item_edges(j).iter().map(|&e| instance.edges()[e].agent).collect())
        .collect();
    guard(choices.iter().map(|c| c.len() as f64).product(), NSW_LIMIT)?;
    let n = instance.n_agents();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut bundle = vec![0.0; n];
    for_each_assignment(&choices, |owner| {
        bundle.iter_mut().for_each(|b| *b = 0.0);
        for (j, &i) in owner.iter().enumerate() {
            bundle[i] += instance.value(i, j).unwrap_or(0.0);
        }
        let log: f64 = bundle.iter().enumerate().map(|(i, &v)| instance.weight(i) * v.ln()).sum();
        if best.as_ref().is_none_or(|(b, _)| log > *b) {
            best = Some((log, owner.to_vec()));
        }
    });
    let (_, owner) = best.expect("every item has an edge");
    let allocation = Allocation::new(owner);
    Ok((instance.nsw_value(&allocation)?, allocation))
}

/// Minimum cost over all `m^n` schedules.
pub fn brute_sched_opt(instance: &SchedInstance) -> Result<(f64, Allocation)> {
    instance.ensure_valid()?;
    let (m, n) = (instance.n_machines(), instance.n_jobs());
    guard((m as f64).powi(n as i32), SCHED_LIMIT)?;
    let choices = vec![(0..m).collect::<Vec<_>>(); n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_assignment(&choices, |owner| {
        let cost = instance.cost(&Allocation::new(owner.to_vec()));
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, owner.to_vec()));
        }
    });
    let (cost, owner) = best.expect("at least one machine");
    Ok((cost, Allocation::new(owner)))
}

/// Every EF1 allocation, in lexicographic order.
pub fn enumerate_ef1(instance: &IdenticalInstance) -> Result<Vec<Allocation>> {
    let (n, m) = (instance.n_agents(), instance.values().len());
    guard((n as f64).powi(m as i32), EF1_LIMIT)?;
    let choices = vec![(0..n).collect::<Vec<_>>(); m];
    let mut out = Vec::new();
    let mut failure = None;
    for_each_assignment(&choices, |owner| {
        let allocation = Allocation::new(owner.to_vec());
        match ef1::is_ef1(instance, &allocation) {
            Ok(c) if c.holds => out.push(allocation),
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Maximum unweighted NSW `(Π_i V_i)^{1/n}` for identical agents.
pub fn brute_identical_opt(instance: &IdenticalInstance) -> Result<(f64, Allocation)> {
    let (n, m) = (instance.n_agents(), instance.values().len());
    guard((n as f64).powi(m as i32), NSW_LIMIT)?;
    let choices = vec![(0..n).collect::<Vec<_>>(); m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_assignment(&choices, |owner| {
        let v = instance.nsw_value(&Allocation::new(owner.to_vec())).unwrap_or(0.0);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, owner.to_vec()));
        }
    });
    let (v, owner) = best.expect("n ≥ 1");
    Ok((v, Allocation::new(owner)))
}
