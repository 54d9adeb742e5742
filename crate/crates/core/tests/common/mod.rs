#![allow(dead_code)]

use nswcp::model::{Agent, FracEntry, FractionalAssignment, NswInstance, SchedInstance, SchedObjective};
use nswcp::relax;
use nswcp::waterfill;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dirichlet(1, ..., 1) weights as normalised exponentials.
pub fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

pub fn int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, hi: u32) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| f64::from(rng.random_range(1..=hi))).collect()).collect()
}

/// Random instance with values in `{1..10}`; with `density < 1` some edges are dropped.
/// Returns `None` when the instance is invalid.
pub fn random_nsw(rng: &mut ChaCha8Rng, n: usize, m: usize, weighted: bool, density: f64) -> Option<NswInstance> {
    let weights = if weighted { dirichlet(rng, n) } else { vec![1.0 / n as f64; n] };
    let values = int_matrix(rng, n, m, 10);
    let agents = weights.iter().enumerate().map(|(i, &w)| Agent { id: format!("a{}", i + 1), weight: w }).collect();
    let items = (0..m).map(|j| format!("j{}", j + 1)).collect();
    let mut edges = Vec::new();
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if density >= 1.0 || rng.random::<f64>() < density {
                edges.push((format!("a{}", i + 1), format!("j{}", j + 1), v));
            }
        }
    }
    let inst = NswInstance::new(agents, items, edges).ok()?;
    inst.validate().is_empty().then_some(inst)
}

pub fn random_sched(rng: &mut ChaCha8Rng, machines: usize, jobs: usize, objective: SchedObjective) -> SchedInstance {
    SchedInstance::from_sizes(int_matrix(rng, machines, jobs, 10), objective).unwrap()
}

/// Convex combination of one to three total allocations on a complete
/// instance, each giving every agent at least one item.
pub fn random_feasible_x(rng: &mut ChaCha8Rng, n: usize, m: usize) -> FractionalAssignment {
    let parts = rng.random_range(1..=3);
    let weights: Vec<f64> = dirichlet(rng, parts);
    let mut entries = Vec::new();
    for w in weights {
        let mut owner: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let shift = rng.random_range(0..m);
        for i in 0..n {
            owner[(i + shift) % m] = i;
        }
        entries.extend(owner.iter().enumerate().map(|(object, &player)| FracEntry { player, object, x: w }));
    }
    FractionalAssignment::new(n, m, entries)
}

/// `Σ_i w_i f_nsw(x_i)`.
pub fn nsw_objective(inst: &NswInstance, x: &FractionalAssignment) -> f64 {
    (0..inst.n_agents())
        .map(|i| {
            let p = relax::player_profile(x, i, |j| inst.value(i, j).unwrap()).unwrap();
            inst.weight(i) * waterfill::f_nsw(&p).unwrap()
        })
        .sum()
}
