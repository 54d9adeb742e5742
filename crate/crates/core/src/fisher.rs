//! Spending-restricted Fisher market program for unweighted NSW.
//!
//! A fractional NSW solution is turned into market spendings by rescaling
//! each agent's values so its water level is one: agent `i` spends
//! `b_ij = x_ij min{v_ij, h_i} / h_i` on item `j`, and item `j` sells a
//! fraction `q_j = Σ_i b_ij`. The market objective of these spendings is at
//! least the NSW relaxation value of `x`.

use crate::model::{FractionalAssignment, NswInstance};
use crate::relax;
use crate::tol;
use crate::waterfill::{self, LevelConvention};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FsrSolution {
    /// Spending on each edge of the instance, indexed like [`NswInstance::edges`].
    pub b: Vec<f64>,
    /// Sold fraction of each item.
    pub q: Vec<f64>,
}

/// Checks the market constraints and returns the first violated one.
pub fn check_fsr(instance: &NswInstance, fsr: &FsrSolution) -> Result<()> {
    if fsr.b.len() != instance.edges().len() || fsr.q.len() != instance.n_items() {
        return Err(Error::InvalidArgument("spending vector does not match the instance".into()));
    }
    let bad = |msg: String| Err(Error::InvalidArgument(msg));
    for (e, &b) in fsr.b.iter().enumerate() {
        if b < -tol::FEASIBILITY {
            let edge = instance.edges()[e];
            return bad(format!(
                "b[{}][{}] = {b} is negative",
                instance.agents()[edge.agent].id,
                instance.items()[edge.item]
            ));
        }
    }
    for (j, &q) in fsr.q.iter().enumerate() {
        let sold: f64 = instance.item_edges(j).iter().map(|&e| fsr.b[e]).sum();
        if (sold - q).abs() > tol::FEASIBILITY {
            return bad(format!("spending on item `{}` is {sold}, q = {q}", instance.items()[j]));
        }
        if q > 1.0 + tol::FEASIBILITY {
            return bad(format!("q of item `{}` is {q} > 1", instance.items()[j]));
        }
    }
    for i in 0..instance.n_agents() {
        let budget: f64 = instance.agent_edges(i).iter().map(|&e| fsr.b[e]).sum();
        if (budget - 1.0).abs() > tol::FEASIBILITY {
            return bad(format!("agent `{}` spends {budget}, budget is 1", instance.agents()[i].id));
        }
    }
    Ok(())
}

fn ensure_unweighted(instance: &NswInstance) -> Result<()> {
    if instance.is_unweighted() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("f-SR applies only to the unweighted case".into()))
    }
}

/// `(1/n)(Σ b_ij ln v_ij − Σ q_j ln q_j)` with `0 ln 0 = 0`.
pub fn fsr_objective(instance: &NswInstance, fsr: &FsrSolution) -> Result<f64> {
    ensure_unweighted(instance)?;
    check_fsr(instance, fsr)?;
    let spend: f64 = instance.edges().iter().zip(&fsr.b).map(|(e, &b)| b * e.value.ln()).sum();
    let entropy: f64 = fsr.q.iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum();
    Ok((spend - entropy) / instance.n_agents() as f64)
}

/// Spendings `b_ij = x_ij min{v_ij, h_i} / h_i` at each agent's water level `h_i`.
pub fn construct_from_x(instance: &NswInstance, x: &FractionalAssignment) -> Result<FsrSolution> {
    ensure_unweighted(instance)?;
    instance.check_fractional(x)?;
    let mut b = vec![0.0; instance.edges().len()];
    for i in 0..instance.n_agents() {
        let profile = relax::player_profile(x, i, |j| instance.value(i, j).unwrap_or(0.0))?;
        let h = waterfill::water_level(&profile, LevelConvention::MinSupportValue)?;
        for &e in instance.agent_edges(i) {
            let edge = instance.edges()[e];
            b[e] = x.get(i, edge.item) * edge.value.min(h) / h;
        }
    }
    let q = (0..instance.n_items()).map(|j| instance.item_edges(j).iter().map(|&e| b[e]).sum()).collect();
    Ok(FsrSolution { b, q })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    /// Optimum of the discretised NSW relaxation.
    pub cp_value: f64,
    /// Market objective of the spendings built from the relaxation optimum.
    pub fsr_value: f64,
    /// `fsr_value − cp_value`.
    pub gap: f64,
    pub eps: f64,
}

pub fn equivalence_report(instance: &NswInstance, eps: f64) -> Result<EquivalenceReport> {
    ensure_unweighted(instance)?;
    let solution = relax::solve_cp_nsw(instance, eps)?;
    let fsr = construct_from_x(instance, &solution.x)?;
    let fsr_value = fsr_objective(instance, &fsr)?;
    Ok(EquivalenceReport { cp_value: solution.value, fsr_value, gap: fsr_value - solution.value, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FracEntry;

    fn frac(n: usize, m: usize, x: &[(usize, usize, f64)]) -> FractionalAssignment {
        FractionalAssignment::new(n, m, x.iter().map(|&(player, object, x)| FracEntry { player, object, x }).collect())
    }

    fn mean_f(inst: &NswInstance, x: &FractionalAssignment) -> f64 {
        (0..inst.n_agents())
            .map(|i| waterfill::f_nsw(&relax::player_profile(x, i, |j| inst.value(i, j).unwrap()).unwrap()).unwrap())
            .sum::<f64>()
            / inst.n_agents() as f64
    }

    #[test]
    fn objective_examples() {
        let inst = NswInstance::unweighted(&[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let fsr = FsrSolution { b: vec![1.0, 0.0, 0.0, 1.0], q: vec![1.0, 1.0] };
        assert!((fsr_objective(&inst, &fsr).unwrap() - 3f64.ln()).abs() < 1e-12);

        let inst = NswInstance::unweighted(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let fsr = FsrSolution { b: vec![0.5; 4], q: vec![1.0, 1.0] };
        assert!((fsr_objective(&inst, &fsr).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unsold_fraction_adds_entropy() {
        let inst = NswInstance::unweighted(&[vec![1.0, 1.0]]).unwrap();
        let fsr = FsrSolution { b: vec![0.5, 0.5], q: vec![0.5, 0.5] };
        // each item contributes −0.5 ln 0.5 = 0.5 ln 2
        assert!((fsr_objective(&inst, &fsr).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_spending_names_the_row() {
        let inst = NswInstance::unweighted(&[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let fsr = FsrSolution { b: vec![1.0, 0.0, 0.0, 0.5], q: vec![1.0, 0.5] };
        let msg = fsr_objective(&inst, &fsr).unwrap_err().to_string();
        assert!(msg.contains("a2"), "{msg}");
    }

    #[test]
    fn construction_examples() {
        let inst = NswInstance::unweighted(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let x = frac(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]);
        let fsr = construct_from_x(&inst, &x).unwrap();
        assert_eq!(fsr.b, vec![0.5; 4]);
        assert_eq!(fsr.q, vec![1.0, 1.0]);
        assert!((fsr_objective(&inst, &fsr).unwrap() - mean_f(&inst, &x)).abs() < 1e-12);

        let inst = NswInstance::unweighted(&[vec![4.0, 2.0, 1.0]]).unwrap();
        let x = frac(1, 3, &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)]);
        let fsr = construct_from_x(&inst, &x).unwrap();
        for (b, want) in fsr.b.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((b - want).abs() < 1e-15);
        }
        assert!((fsr_objective(&inst, &fsr).unwrap() - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn construction_dominates_relaxation_value() {
        let inst = NswInstance::unweighted(&[vec![5.0, 1.0, 2.0, 8.0], vec![1.0, 6.0, 6.0, 1.0], vec![3.0, 3.0, 1.0, 2.0]])
            .unwrap();
        let x = frac(
            3,
            4,
            &[(0, 0, 0.5), (0, 3, 0.7), (1, 1, 0.8), (1, 2, 0.6), (2, 0, 0.5), (2, 1, 0.2), (2, 2, 0.4), (2, 3, 0.3)],
        );
        let fsr = construct_from_x(&inst, &x).unwrap();
        check_fsr(&inst, &fsr).unwrap();
        assert!(fsr_objective(&inst, &fsr).unwrap() >= mean_f(&inst, &x) - 1e-9);
    }

    #[test]
    fn equivalence_examples() {
        let eps = 1e-3;
        let inst = NswInstance::unweighted(&[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let r = equivalence_report(&inst, eps).unwrap();
        assert!(r.gap.abs() <= (1.0 + eps).ln() + 1e-6, "{r:?}");

        let single = NswInstance::unweighted(&[vec![4.0, 2.0, 1.0]]).unwrap();
        let r = equivalence_report(&single, eps).unwrap();
        assert!((r.fsr_value - 7f64.ln()).abs() < 1e-9);
        assert!(r.gap.abs() <= (1.0 + eps).ln() + 1e-6);

        let weighted = NswInstance::complete(&[0.9, 0.1], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let err = equivalence_report(&weighted, eps).unwrap_err();
        assert!(err.to_string().contains("f-SR applies only to the unweighted case"));
    }
}
