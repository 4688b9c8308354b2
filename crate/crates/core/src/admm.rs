//! ADMM baseline over the same splitting: no surrogate gating, and the
//! multiplier step is fixed at the penalty `ρ`.

use crate::error::{invalid, Result};
use crate::projection::{project_weight_set, SparsityBudget};
use crate::slr::{solve_cardinality_subproblem, solve_loss_subproblem, step_multipliers, LossModel, RunRecord};
use crate::weights::{MultiplierSet, WeightSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub rho: f64,
    /// Iteration about to run; starts at 1.
    pub k: u64,
    pub inner_steps: usize,
}

impl AdmmState {
    pub fn new(rho: f64, inner_steps: usize) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho", "must be positive"));
        }
        Ok(Self {
            rho,
            k: 1,
            inner_steps,
        })
    }
}

/// Same start as SLR: `Z⁰ = Π(W⁰)`, `Λ⁰ = 0`.
pub fn admm_init(
    w0: &WeightSet,
    budget: &SparsityBudget,
    rho: f64,
    inner_steps: usize,
) -> Result<(WeightSet, MultiplierSet, AdmmState)> {
    let state = AdmmState::new(rho, inner_steps)?;
    let z0 = project_weight_set(w0, budget)?;
    Ok((z0, MultiplierSet::zeros_like(w0), state))
}

/// One ADMM iteration: W-solve, `Z = Π(W + Λ/ρ)`, `Λ += ρ(W − Z)`.
pub fn admm_iterate<M: LossModel + ?Sized>(
    model: &mut M,
    z: &mut WeightSet,
    multipliers: &mut MultiplierSet,
    state: &mut AdmmState,
    budget: &SparsityBudget,
) -> Result<RunRecord> {
    let rho = state.rho;
    solve_loss_subproblem(model, z, multipliers, rho, state.inner_steps)?;
    let loss = model.condition_loss()?;
    let w = model.weights();
    *z = solve_cardinality_subproblem(w, multipliers, rho, budget)?;
    let violation = w.distance(z)?;
    *multipliers = step_multipliers(multipliers, rho, w, z)?;
    let record = RunRecord {
        k: state.k,
        loss,
        hardprune_acc: None,
        violation,
        s_prime: rho,
        s: rho,
        alpha: 1.0,
        soc_w: false,
        soc_z: false,
        multipliers_changed_w: false,
        multipliers_changed_z: violation > 0.0,
        resolves: 0,
        inner_steps: state.inner_steps,
        converged: violation == 0.0,
        wall_ms: 0,
    };
    state.k += 1;
    Ok(record)
}
