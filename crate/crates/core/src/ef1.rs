//! EF1 allocations for identical agents and the water-fill bound on their NSW gap.

use crate::model::Allocation;
use crate::waterfill;
use crate::{Error, Result};

/// Agents who all value item `j` at `values[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdenticalInstance {
    n_agents: usize,
    values: Vec<f64>,
}

impl IdenticalInstance {
    pub fn new(n_agents: usize, values: Vec<f64>) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidArgument("at least one agent is required".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("item value {v} must be positive")));
        }
        Ok(Self { n_agents, values })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bundle_values(&self, allocation: &Allocation) -> Result<Vec<f64>> {
        self.check(allocation)?;
        let mut out = vec![0.0; self.n_agents];
        for (j, &i) in allocation.owners().iter().enumerate() {
            out[i] += self.values[j];
        }
        Ok(out)
    }

    /// Unweighted NSW `(Π_i V_i)^{1/n}`.
    pub fn nsw_value(&self, allocation: &Allocation) -> Result<f64> {
        let v = self.bundle_values(allocation)?;
        Ok(geometric_mean(&v))
    }

    fn check(&self, allocation: &Allocation) -> Result<()> {
        if allocation.len() != self.values.len() {
            return Err(Error::InvalidAllocation(format!(
                "allocation covers {} items, instance has {}",
                allocation.len(),
                self.values.len()
            )));
        }
        if let Some(&i) = allocation.owners().iter().find(|&&i| i >= self.n_agents) {
            return Err(Error::InvalidAllocation(format!("agent index {i} out of range")));
        }
        Ok(())
    }
}

fn geometric_mean(v: &[f64]) -> f64 {
    if v.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ef1Check {
    pub holds: bool,
    /// `(envious, envied)` agents of the first violated pair.
    pub witness: Option<(usize, usize)>,
}

/// Whether every agent values its bundle at least as much as any other bundle
/// with that bundle's most valuable item removed.
pub fn is_ef1(instance: &IdenticalInstance, allocation: &Allocation) -> Result<Ef1Check> {
    let bundle = instance.bundle_values(allocation)?;
    let mut top = vec![0.0f64; instance.n_agents()];
    for (j, &i) in allocation.owners().iter().enumerate() {
        top[i] = top[i].max(instance.values()[j]);
    }
    for a in 0..instance.n_agents() {
        for b in 0..instance.n_agents() {
            let reduced = bundle[b] - top[b];
            if a != b && bundle[a] < reduced - 1e-12 * reduced.abs().max(1.0) {
                return Ok(Ef1Check { holds: false, witness: Some((a, b)) });
            }
        }
    }
    Ok(Ef1Check { holds: true, witness: None })
}

/// Items by non-increasing value (ties by index), each to the currently
/// poorest agent (ties by index). The result is checked to be EF1.
pub fn greedy_ef1(instance: &IdenticalInstance) -> Result<Allocation> {
    let mut order: Vec<usize> = (0..instance.values().len()).collect();
    order.sort_by(|&a, &b| instance.values()[b].total_cmp(&instance.values()[a]).then(a.cmp(&b)));
    let mut bundle = vec![0.0f64; instance.n_agents()];
    let mut owner = vec![0; order.len()];
    for j in order {
        let i = (0..bundle.len()).min_by(|&a, &b| bundle[a].total_cmp(&bundle[b])).expect("n ≥ 1");
        owner[j] = i;
        bundle[i] += instance.values()[j];
    }
    let allocation = Allocation::new(owner);
    if !is_ef1(instance, &allocation)?.holds {
        return Err(Error::Internal("greedy allocation is not EF1".into()));
    }
    Ok(allocation)
}

/// Upper bound on the NSW optimum derived from an EF1 allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct GapCertificate {
    /// Smallest bundle value.
    pub psi: f64,
    /// `V_i − ψ` for each agent.
    pub phi: Vec<f64>,
    /// Solution of `(1/n) Σ_i min{φ_i, h} + ψ = h`.
    pub h: f64,
    /// `(Π_i max{φ_i, h})^{1/n}`; zero when `ψ = 0`.
    pub bound: f64,
    /// NSW of the allocation the certificate was built from.
    pub allocation_value: f64,
    /// Agents with `φ_i > h`.
    pub n1: usize,
    /// Agents with `φ_i ≤ h`.
    pub n2: usize,
}

impl GapCertificate {
    /// `bound / NSW(allocation)`; one when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.bound == 0.0 {
            1.0
        } else {
            self.bound / self.allocation_value
        }
    }
}

/// Water-fill bound for an EF1 allocation: items above the poorest bundle
/// value are poured as liquid over all agents, which can only raise the
/// optimum. When some bundle is empty an EF1 allocation has fewer items than
/// agents, so the optimum is zero and the certificate says so.
pub fn gap_bound(instance: &IdenticalInstance, allocation: &Allocation) -> Result<GapCertificate> {
    let values = instance.bundle_values(allocation)?;
    let n = values.len();
    let psi = values.iter().copied().fold(f64::INFINITY, f64::min);
    let phi: Vec<f64> = values.iter().map(|v| v - psi).collect();
    let allocation_value = geometric_mean(&values);
    if psi <= 0.0 {
        return Ok(GapCertificate { psi, phi, h: 0.0, bound: 0.0, allocation_value, n1: 0, n2: n });
    }
    let share = 1.0 / n as f64;
    let pairs: Vec<(f64, f64)> = phi.iter().map(|&p| (p, share)).collect();
    let h = waterfill::solve_level(&pairs, psi);
    let bound = geometric_mean(&phi.iter().map(|&p| p.max(h)).collect::<Vec<_>>());
    let n1 = phi.iter().filter(|&&p| p > h).count();
    Ok(GapCertificate { psi, phi, h, bound, allocation_value, n1, n2: n - n1 })
}
