//! Surrogate Lagrangian relaxation for cardinality-constrained training.
//!
//! The constrained problem `min f(W) s.t. card(W_n) <= l_n` is split with a
//! duplicate `Z = W` and relaxed into the augmented Lagrangian
//!
//! ```text
//! L(W, Z, Λ) = f(W) + Σ_n g_n(Z_n) + Σ_n tr[Λ_nᵀ (W_n − Z_n)] + (ρ/2) Σ_n ‖W_n − Z_n‖²
//! ```
//!
//! where `g_n` is the indicator of `{card(Z_n) <= l_n}`. Each outer
//! iteration minimizes over `W` by mini-batch gradient steps, then over `Z`
//! by projection. After each of the two solves the multipliers move only if
//! the corresponding surrogate optimality condition (a strict decrease of
//! `L` with the multipliers held fixed) holds. Stepsizes follow
//!
//! ```text
//! s'ᵏ = αᵏ sᵏ⁻¹ ‖Wᵏ⁻¹ − Zᵏ⁻¹‖ / ‖Wᵏ − Zᵏ⁻¹‖
//! sᵏ  = αᵏ s'ᵏ  ‖Wᵏ⁻¹ − Zᵏ⁻¹‖ / ‖Wᵏ − Zᵏ‖
//! αᵏ  = 1 − 1 / (M · k^(1 − 1/kʳ)),   M > 1, 0 < r < 1
//! ```
//!
//! with norms taken over the concatenation of all layers.

use alloc::vec::Vec;

use crate::data::Batch;
use crate::error::{invalid, Result};
use crate::model::{Gradients, Network};
use crate::projection::{project_weight_set, SparsityBudget};
use crate::weights::{MultiplierSet, WeightSet};

/// A smooth loss `f(W)` together with an inner solver for the loss subproblem.
///
/// `condition_loss` must be deterministic for fixed weights: it is the `f`
/// used in the surrogate optimality comparisons.
pub trait LossModel {
    fn weights(&self) -> &WeightSet;

    fn condition_loss(&self) -> Result<f64>;

    /// Approximately minimizes `f(W) + tr[Λᵀ(W − Z)] + (ρ/2)‖W − Z‖²` over `W`
    /// starting from the current weights, using `steps` inner iterations.
    fn minimize_penalized(
        &mut self,
        z: &WeightSet,
        multipliers: &MultiplierSet,
        rho: f64,
        steps: usize,
    ) -> Result<()>;
}

/// `L(W, Z, Λ)` given an already computed `f(W)`.
///
/// Returns [`crate::Error::Infeasible`] instead of an infinite value when `Z`
/// breaks its budget.
pub fn augmented_lagrangian(
    f_value: f64,
    w: &WeightSet,
    z: &WeightSet,
    multipliers: &MultiplierSet,
    rho: f64,
    budget: &SparsityBudget,
) -> Result<f64> {
    budget.require_feasible(z)?;
    w.check_parallel(z)?;
    w.check_parallel(multipliers)?;
    let mut linear = 0.0;
    let mut quadratic = 0.0;
    for ((wn, zn), ln) in w.layers().iter().zip(z.layers()).zip(multipliers.layers()) {
        for ((a, b), m) in wn.data().iter().zip(zn.data()).zip(ln.data()) {
            let d = a - b;
            linear += m * d;
            quadratic += d * d;
        }
    }
    Ok(f_value + linear + 0.5 * rho * quadratic)
}

/// `L(W, Z, Λ)` with `f` the network's mean cross-entropy on `batch`.
pub fn evaluate_augmented_lagrangian(
    net: &Network,
    z: &WeightSet,
    multipliers: &MultiplierSet,
    rho: f64,
    batch: &Batch,
    budget: &SparsityBudget,
) -> Result<f64> {
    budget.require_feasible(z)?;
    let f = net.loss(batch)?;
    augmented_lagrangian(f, net.weights(), z, multipliers, rho, budget)
}

/// Adds `Λ + ρ(W − Z)` to a loss gradient, layer by layer.
pub fn add_penalty_gradient(
    grad: &mut WeightSet,
    w: &WeightSet,
    z: &WeightSet,
    multipliers: &MultiplierSet,
    rho: f64,
) -> Result<()> {
    grad.check_parallel(w)?;
    w.check_parallel(z)?;
    w.check_parallel(multipliers)?;
    for (((g, wn), zn), ln) in grad
        .layers_mut()
        .iter_mut()
        .zip(w.layers())
        .zip(z.layers())
        .zip(multipliers.layers())
    {
        for (((gi, a), b), m) in g
            .data_mut()
            .iter_mut()
            .zip(wn.data())
            .zip(zn.data())
            .zip(ln.data())
        {
            *gi += m + rho * (a - b);
        }
    }
    Ok(())
}

/// Gradient of the loss subproblem objective on one batch.
pub fn penalized_gradient(
    net: &Network,
    batch: &Batch,
    z: &WeightSet,
    multipliers: &MultiplierSet,
    rho: f64,
) -> Result<(f64, Gradients)> {
    let (loss, mut grad) = net.backward(batch)?;
    add_penalty_gradient(&mut grad.weights, net.weights(), z, multipliers, rho)?;
    Ok((loss, grad))
}

/// Runs the inner solver of the loss subproblem with `Z` and `Λ` fixed.
pub fn solve_loss_subproblem<M: LossModel + ?Sized>(
    model: &mut M,
    z: &WeightSet,
    multipliers: &MultiplierSet,
    rho: f64,
    steps: usize,
) -> Result<()> {
    if steps == 0 {
        return Ok(());
    }
    model.minimize_penalized(z, multipliers, rho, steps)
}

/// Global minimizer over `Z`: `Z_n = Π(W_n + Λ'_n / ρ)` for every layer.
pub fn solve_cardinality_subproblem(
    w: &WeightSet,
    multipliers: &MultiplierSet,
    rho: f64,
    budget: &SparsityBudget,
) -> Result<WeightSet> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid("rho", "must be positive"));
    }
    let mut shifted = w.clone();
    shifted.add_scaled(1.0 / rho, multipliers)?;
    project_weight_set(&shifted, budget)
}

/// Surrogate optimality condition after the loss subproblem: strict decrease.
pub fn check_soc_w(l_new: f64, l_old: f64) -> bool {
    l_new < l_old
}

/// Surrogate optimality condition after the cardinality subproblem.
pub fn check_soc_z(l_new: f64, l_old: f64) -> bool {
    l_new < l_old
}

/// `αᵏ = 1 − 1/(M · k^(1 − 1/kʳ))`.
pub fn alpha_schedule(k: u64, m: f64, r: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "iterations start at 1"));
    }
    check_schedule_params(m, r)?;
    let k = k as f64;
    let exponent = 1.0 - 1.0 / libm::pow(k, r);
    Ok(1.0 - 1.0 / (m * libm::pow(k, exponent)))
}

fn check_schedule_params(m: f64, r: f64) -> Result<()> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(invalid("M", alloc::format!("must be > 1, got {m}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid("r", alloc::format!("must be in (0, 1), got {r}")));
    }
    Ok(())
}

/// Outcome of a stepsize update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepsize {
    Next(f64),
    /// The new violation is exactly zero: the constraints `W = Z` hold.
    Converged,
}

/// `ratio = ‖Wᵏ⁻¹ − Zᵏ⁻¹‖ / viol_new`. A zero previous violation (a start
/// that was already feasible) is treated as ratio one so that the
/// stepsize does not collapse to zero permanently.
fn violation_ratio(prev: f64, viol_new: f64) -> f64 {
    if prev > 0.0 {
        prev / viol_new
    } else {
        1.0
    }
}

pub fn stepsize_prime(state: &SlrState, viol_new: f64) -> Stepsize {
    if viol_new <= 0.0 {
        return Stepsize::Converged;
    }
    Stepsize::Next(state.alpha * state.s_prev * violation_ratio(state.violation_prev, viol_new))
}

/// Numerator norm follows `state.stepsize_rule`: `‖Wᵏ − Zᵏ⁻¹‖` for
/// [`StepsizeRule::Chained`], `‖Wᵏ⁻¹ − Zᵏ⁻¹‖` for [`StepsizeRule::Printed`].
pub fn stepsize_main(state: &SlrState, viol_new: f64) -> Stepsize {
    if viol_new <= 0.0 {
        return Stepsize::Converged;
    }
    let prev = match state.stepsize_rule {
        StepsizeRule::Chained => state.violation_mid,
        StepsizeRule::Printed => state.violation_prev,
    };
    Stepsize::Next(state.alpha * state.s_prime * violation_ratio(prev, viol_new))
}

/// `Λ' = Λ + s'(Wᵏ − Zᵏ⁻¹)`.
pub fn update_multipliers_stage1(
    multipliers: &MultiplierSet,
    s_prime: f64,
    w: &WeightSet,
    z: &WeightSet,
) -> Result<MultiplierSet> {
    step_multipliers(multipliers, s_prime, w, z)
}

/// `Λᵏ⁺¹ = Λ' + sᵏ(Wᵏ − Zᵏ)`.
pub fn update_multipliers_stage2(
    multipliers: &MultiplierSet,
    s: f64,
    w: &WeightSet,
    z: &WeightSet,
) -> Result<MultiplierSet> {
    step_multipliers(multipliers, s, w, z)
}

pub(crate) fn step_multipliers(
    multipliers: &MultiplierSet,
    step: f64,
    w: &WeightSet,
    z: &WeightSet,
) -> Result<MultiplierSet> {
    let violation = w.sub(z)?;
    let mut next = multipliers.clone();
    next.add_scaled(step, &violation)?;
    Ok(next)
}

/// Which violation norm scales the second stepsize.
///
/// Each SLR stepsize is the previous one times the ratio of the previous
/// update direction's norm to the new one. Within an iteration the update
/// preceding `sᵏ` moved along `Wᵏ − Zᵏ⁻¹`, which gives `Chained`. `Printed`
/// reuses `‖Wᵏ⁻¹ − Zᵏ⁻¹‖` for both stages; it lets `sᵏ` grow whenever the
/// new violation is smaller than the previous iteration's, and can diverge
/// on instances with a duality gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepsizeRule {
    #[default]
    Chained,
    Printed,
}

/// Hyperparameters of an SLR run. Defaults are `ρ = 0.1, M = 300, r = 0.1,
/// s0 = 0.01`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlrParams {
    pub rho: f64,
    pub m: f64,
    pub r: f64,
    pub s0: f64,
    /// Inner solver iterations per loss subproblem.
    pub inner_steps: usize,
    /// Extra subproblem solves allowed when neither condition holds.
    pub max_resolve: usize,
    pub stepsize_rule: StepsizeRule,
}

impl Default for SlrParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            m: 300.0,
            r: 0.1,
            s0: 1e-2,
            inner_steps: 1,
            max_resolve: 3,
            stepsize_rule: StepsizeRule::Chained,
        }
    }
}

impl SlrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", "must be positive"));
        }
        check_schedule_params(self.m, self.r)?;
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(invalid("s0", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlrState {
    /// Iteration about to run; starts at 1.
    pub k: u64,
    /// `sᵏ⁻¹`.
    pub s_prev: f64,
    /// `s'ᵏ` of the latest iteration.
    pub s_prime: f64,
    /// `αᵏ` of the latest iteration.
    pub alpha: f64,
    pub rho: f64,
    pub m: f64,
    pub r: f64,
    pub s0: f64,
    pub inner_steps: usize,
    pub max_resolve: usize,
    pub stepsize_rule: StepsizeRule,
    /// `‖Wᵏ⁻¹ − Zᵏ⁻¹‖`.
    pub violation_prev: f64,
    /// `‖Wᵏ − Zᵏ⁻¹‖` of the latest loss subproblem.
    pub violation_mid: f64,
    pub soc_w_history: Vec<bool>,
    pub soc_z_history: Vec<bool>,
    /// Iterations that exhausted their re-solves with neither condition met.
    pub stalled: Vec<u64>,
    pub converged: bool,
}

impl SlrState {
    pub fn new(params: &SlrParams, initial_violation: f64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            k: 1,
            s_prev: params.s0,
            s_prime: params.s0,
            alpha: 0.0,
            rho: params.rho,
            m: params.m,
            r: params.r,
            s0: params.s0,
            inner_steps: params.inner_steps,
            max_resolve: params.max_resolve,
            stepsize_rule: params.stepsize_rule,
            violation_prev: initial_violation,
            violation_mid: initial_violation,
            soc_w_history: Vec::new(),
            soc_z_history: Vec::new(),
            stalled: Vec::new(),
            converged: false,
        })
    }
}

/// `Z⁰ = Π(W⁰)`, `Λ⁰ = 0`, `s⁰ = s0`, `k = 1`.
pub fn slr_init(
    w0: &WeightSet,
    budget: &SparsityBudget,
    params: &SlrParams,
) -> Result<(WeightSet, MultiplierSet, SlrState)> {
    params.validate()?;
    let z0 = project_weight_set(w0, budget)?;
    let violation = w0.distance(&z0)?;
    let state = SlrState::new(params, violation)?;
    Ok((z0, MultiplierSet::zeros_like(w0), state))
}

/// One row of run telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub k: u64,
    /// `f(Wᵏ)` on the condition data.
    pub loss: f64,
    /// Accuracy after hard-pruning `Wᵏ`; filled in by the caller at eval points.
    pub hardprune_acc: Option<f64>,
    /// `‖Wᵏ − Zᵏ‖`.
    pub violation: f64,
    pub s_prime: f64,
    pub s: f64,
    pub alpha: f64,
    pub soc_w: bool,
    pub soc_z: bool,
    pub multipliers_changed_w: bool,
    pub multipliers_changed_z: bool,
    /// Extra subproblem solves performed inside this iteration.
    pub resolves: usize,
    /// Inner solver iterations consumed.
    pub inner_steps: usize,
    pub converged: bool,
    /// Wall time of the iteration in milliseconds; filled in by the caller.
    pub wall_ms: u64,
}

/// One outer iteration. Updates `model`, `z`, `multipliers`, and `state`
/// in place.
pub fn slr_iterate<M: LossModel + ?Sized>(
    model: &mut M,
    z: &mut WeightSet,
    multipliers: &mut MultiplierSet,
    state: &mut SlrState,
    budget: &SparsityBudget,
) -> Result<RunRecord> {
    let alpha = alpha_schedule(state.k, state.m, state.r)?;
    state.alpha = alpha;
    let rho = state.rho;
    let mut resolves = 0;
    let mut inner = 0;

    loop {
        // Step 1: loss subproblem at (Zᵏ⁻¹, Λᵏ).
        let f_old = model.condition_loss()?;
        let l_old = augmented_lagrangian(f_old, model.weights(), z, multipliers, rho, budget)?;
        solve_loss_subproblem(model, z, multipliers, rho, state.inner_steps)?;
        inner += state.inner_steps;
        let f_new = model.condition_loss()?;
        let w = model.weights();
        let l_new = augmented_lagrangian(f_new, w, z, multipliers, rho, budget)?;
        let soc_w = check_soc_w(l_new, l_old);

        let mut s_prime = state.s_prev;
        let mut changed_w = false;
        state.violation_mid = w.distance(z)?;
        if soc_w {
            if let Stepsize::Next(step) = stepsize_prime(state, state.violation_mid) {
                s_prime = step;
                *multipliers = update_multipliers_stage1(multipliers, step, w, z)?;
                changed_w = true;
            }
        }
        state.s_prime = s_prime;

        // Step 2: cardinality subproblem at (Wᵏ, Λ'ᵏ⁺¹).
        let z_new = solve_cardinality_subproblem(w, multipliers, rho, budget)?;
        let l_old = augmented_lagrangian(f_new, w, z, multipliers, rho, budget)?;
        let l_new = augmented_lagrangian(f_new, w, &z_new, multipliers, rho, budget)?;
        let soc_z = check_soc_z(l_new, l_old);
        let violation = w.distance(&z_new)?;

        let mut s = s_prime;
        let mut changed_z = false;
        let mut converged = false;
        match stepsize_main(state, violation) {
            Stepsize::Converged => converged = true,
            Stepsize::Next(step) if soc_z => {
                s = step;
                *multipliers = update_multipliers_stage2(multipliers, step, w, &z_new)?;
                changed_z = true;
            }
            Stepsize::Next(_) => {}
        }
        *z = z_new;

        let done = soc_w || soc_z || converged;
        if !done && resolves < state.max_resolve {
            resolves += 1;
            continue;
        }
        if !done {
            log::warn!(
                "iteration {}: no surrogate condition held after {} re-solves; multipliers unchanged",
                state.k,
                resolves
            );
            state.stalled.push(state.k);
        }

        let record = RunRecord {
            k: state.k,
            loss: f_new,
            hardprune_acc: None,
            violation,
            s_prime,
            s,
            alpha,
            soc_w,
            soc_z,
            multipliers_changed_w: changed_w,
            multipliers_changed_z: changed_z,
            resolves,
            inner_steps: inner,
            converged,
            wall_ms: 0,
        };
        state.soc_w_history.push(soc_w);
        state.soc_z_history.push(soc_z);
        state.violation_prev = violation;
        state.s_prev = s;
        state.converged = converged;
        state.k += 1;
        return Ok(record);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use alloc::vec;

    fn ws(v: &[f64]) -> WeightSet {
        WeightSet::new(vec![Tensor::vector(v.to_vec()).unwrap()])
    }

    fn ms(v: &[f64]) -> MultiplierSet {
        MultiplierSet(ws(v))
    }

    #[test]
    fn lagrangian_hand_value() {
        let budget = SparsityBudget::dense(&ws(&[0.0]));
        let v = augmented_lagrangian(0.0, &ws(&[2.0]), &ws(&[1.0]), &ms(&[0.5]), 0.1, &budget)
            .unwrap();
        assert!((v - 0.55).abs() < 1e-15);
        let same =
            augmented_lagrangian(1.25, &ws(&[2.0]), &ws(&[2.0]), &ms(&[-7.0]), 3.0, &budget)
                .unwrap();
        assert_eq!(same, 1.25);
        let off = augmented_lagrangian(1.25, &ws(&[2.0]), &ws(&[1.0]), &ms(&[0.0]), 0.0, &budget)
            .unwrap();
        assert_eq!(off, 1.25);
    }

    #[test]
    fn lagrangian_rejects_infeasible_z() {
        let w = ws(&[1.0, 2.0]);
        let budget = SparsityBudget::new(vec![1], &w).unwrap();
        let err = augmented_lagrangian(0.0, &w, &w, &ms(&[0.0, 0.0]), 0.1, &budget);
        assert!(matches!(err, Err(crate::Error::Infeasible { .. })));
    }

    #[test]
    fn cardinality_subproblem_examples() {
        let w = ws(&[3.0, 1.0]);
        let b1 = SparsityBudget::new(vec![1], &w).unwrap();
        let z = solve_cardinality_subproblem(&w, &ms(&[0.0, 0.0]), 1.0, &b1).unwrap();
        assert_eq!(z, ws(&[3.0, 0.0]));
        let z = solve_cardinality_subproblem(&ws(&[1.0, 1.0]), &ms(&[2.0, 0.0]), 1.0, &b1).unwrap();
        assert_eq!(z, ws(&[3.0, 0.0]));
        let feasible = ws(&[0.0, 5.0]);
        let z = solve_cardinality_subproblem(&feasible, &ms(&[0.0, 0.0]), 0.1, &b1).unwrap();
        assert_eq!(z, feasible);
        assert!(solve_cardinality_subproblem(&w, &ms(&[0.0, 0.0]), 0.0, &b1).is_err());
    }

    #[test]
    fn soc_checks_are_strict() {
        for check in [check_soc_w, check_soc_z] {
            assert!(check(1.0, 2.0));
            assert!(!check(2.0, 2.0));
            assert!(!check(2.0 + 1e-12, 2.0));
        }
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_schedule(1, 300.0, 0.1).unwrap(), 1.0 - 1.0 / 300.0);
        assert!((alpha_schedule(4, 5.0, 0.5).unwrap() - 0.9).abs() < 1e-15);
        assert!(alpha_schedule(1, 0.5, 0.1).is_err());
        assert!(alpha_schedule(1, 300.0, 1.0).is_err());
        assert!(alpha_schedule(0, 300.0, 0.1).is_err());
    }

    fn state(alpha: f64, s_prev: f64, s_prime: f64, prev: f64) -> SlrState {
        let mut s = SlrState::new(&SlrParams::default(), prev).unwrap();
        s.alpha = alpha;
        s.s_prev = s_prev;
        s.s_prime = s_prime;
        s
    }

    #[test]
    fn stepsize_examples() {
        assert_eq!(stepsize_prime(&state(1.0, 0.3, 0.0, 2.0), 2.0), Stepsize::Next(0.3));
        match stepsize_prime(&state(0.9, 0.01, 0.0, 2.0), 1.0) {
            Stepsize::Next(s) => assert!((s - 0.018).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(stepsize_prime(&state(0.9, 0.01, 0.0, 2.0), 0.0), Stepsize::Converged);

        assert_eq!(stepsize_main(&state(1.0, 0.0, 0.7, 1.5), 1.5), Stepsize::Next(0.7));
        match stepsize_main(&state(0.9, 0.0, 0.018, 2.0), 0.5) {
            Stepsize::Next(s) => assert!((s - 0.0648).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(stepsize_main(&state(0.9, 0.0, 0.018, 2.0), 0.0), Stepsize::Converged);
    }

    #[test]
    fn multiplier_update_examples() {
        for update in [update_multipliers_stage1, update_multipliers_stage2] {
            let lam = ms(&[0.3, -1.0]);
            let w = ws(&[1.0, 2.0]);
            assert_eq!(update(&lam, 0.7, &w, &w).unwrap(), lam);
            assert_eq!(update(&lam, 0.0, &w, &ws(&[0.0, 0.0])).unwrap(), lam);
            let out = update(&ms(&[0.0]), 0.5, &ws(&[2.0]), &ws(&[0.0])).unwrap();
            assert_eq!(out, ms(&[1.0]));
            assert!(update(&lam, 0.5, &ws(&[1.0]), &w).is_err());
        }
    }

    #[test]
    fn init_paper_settings() {
        let w0 = ws(&[0.5, -2.0, 1.5, 0.1]);
        let budget = SparsityBudget::new(vec![2], &w0).unwrap();
        let (z, lam, st) = slr_init(&w0, &budget, &SlrParams::default()).unwrap();
        assert!(lam.layers()[0].data().iter().all(|v| *v == 0.0));
        assert!(budget.is_feasible(&z));
        assert_eq!(st.k, 1);
        assert_eq!(st.s_prev, 0.01);
        let bad = SlrParams {
            m: 1.0,
            ..SlrParams::default()
        };
        assert!(slr_init(&w0, &budget, &bad).is_err());
    }
}
