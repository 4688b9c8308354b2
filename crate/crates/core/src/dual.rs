//! Brute-force dual function on tiny separable instances.
//!
//! For `f(W) = ½‖W − a‖²` the augmented Lagrangian separates by coordinate.
//! With support `S` fixed (`Z_i = 0` off `S`, free on `S`) the inner
//! minimum has a closed form per coordinate:
//!
//! ```text
//! i ∈ S:  W_i = a_i,  Z_i = a_i + λ_i/ρ        value  −λ_i² / (2ρ)
//! i ∉ S:  W_i = (a_i − λ_i)/(1 + ρ), Z_i = 0   value  a_i²/2 − (a_i − λ_i)² / (2(1 + ρ))
//! ```
//!
//! and `q(Λ)` is the minimum of the summed values over every support with
//! `|S| <= l`, found by enumeration.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::projection::SparsityBudget;
use crate::rng::Rng;
use crate::slr::{slr_init, slr_iterate, LossModel, SlrParams};
use crate::tensor::Tensor;
use crate::weights::{MultiplierSet, WeightSet};

/// Largest instance the enumeration accepts.
pub const MAX_ENTRIES: usize = 8;
/// Largest number of candidate supports the enumeration accepts.
pub const MAX_SUPPORTS: usize = 1 << MAX_ENTRIES;

#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    target: Tensor,
    budget: usize,
    rho: f64,
}

impl TinyInstance {
    /// Entries must be distinct in magnitude whenever the budget binds
    /// (`0 < l < len`); a non-binding budget tolerates ties.
    pub fn new(target: Tensor, budget: usize, rho: f64) -> Result<Self> {
        let n = target.len();
        if n > MAX_ENTRIES {
            return Err(Error::TooLarge {
                entries: n,
                supports: support_count(n, budget.min(n)),
            });
        }
        if budget > n {
            return Err(Error::BudgetOutOfRange {
                layer: 0,
                budget,
                len: n,
            });
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho", "must be positive"));
        }
        if budget > 0 && budget < n {
            let mut mags: Vec<f64> = target.data().iter().map(|v| v.abs()).collect();
            mags.sort_by(f64::total_cmp);
            if mags.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid("target", "entry magnitudes must be distinct"));
            }
        }
        Ok(Self {
            target,
            budget,
            rho,
        })
    }

    pub fn target(&self) -> &Tensor {
        &self.target
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn sparsity_budget(&self) -> SparsityBudget {
        let w = WeightSet::new(vec![self.target.clone()]);
        SparsityBudget::new(vec![self.budget], &w).expect("budget checked at construction")
    }

    fn in_support(&self, lambda: f64) -> f64 {
        -lambda * lambda / (2.0 * self.rho)
    }

    fn off_support(&self, a: f64, lambda: f64) -> f64 {
        let d = a - lambda;
        0.5 * a * a - d * d / (2.0 * (1.0 + self.rho))
    }

    /// Every support with at most `l` entries, as bitmasks.
    fn supports(&self) -> Result<Vec<u32>> {
        let n = self.len();
        let count = support_count(n, self.budget);
        if count > MAX_SUPPORTS {
            return Err(Error::TooLarge {
                entries: n,
                supports: count,
            });
        }
        Ok((0u32..1 << n)
            .filter(|m| m.count_ones() as usize <= self.budget)
            .collect())
    }
}

fn support_count(n: usize, l: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for j in 0..=l {
        total = total.saturating_add(c);
        c = c.saturating_mul(n - j) / (j + 1);
    }
    total
}

fn support_value(inst: &TinyInstance, lambda: &[f64], mask: u32) -> f64 {
    inst.target
        .data()
        .iter()
        .zip(lambda)
        .enumerate()
        .map(|(i, (&a, &l))| {
            if mask & (1 << i) != 0 {
                inst.in_support(l)
            } else {
                inst.off_support(a, l)
            }
        })
        .sum()
}

fn check_lambda(inst: &TinyInstance, lambda: &Tensor) -> Result<()> {
    if lambda.len() != inst.len() {
        return Err(Error::ShapeMismatch {
            expected: inst.target.shape().to_vec(),
            found: lambda.shape().to_vec(),
        });
    }
    Ok(())
}

/// Minimizing support (lowest bitmask among ties) and its value.
fn best_support(inst: &TinyInstance, lambda: &[f64]) -> Result<(u32, f64)> {
    let mut best = (0u32, f64::INFINITY);
    for mask in inst.supports()? {
        let v = support_value(inst, lambda, mask);
        if v < best.1 {
            best = (mask, v);
        }
    }
    Ok(best)
}

/// `q(Λ) = min_{W, Z} L(W, Z, Λ)` by enumeration of supports.
pub fn dual_value(inst: &TinyInstance, lambda: &Tensor) -> Result<f64> {
    check_lambda(inst, lambda)?;
    best_support(inst, lambda.data()).map(|(_, v)| v)
}

/// `min ½‖W − a‖²` over `card(W) <= l`: the sum of the squares of all but
/// the `l` largest magnitudes, halved. Found by enumeration.
pub fn primal_optimum(inst: &TinyInstance) -> Result<f64> {
    let a = inst.target.data();
    let mut best = f64::INFINITY;
    for mask in inst.supports()? {
        let v: f64 = a
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) == 0)
            .map(|(_, x)| 0.5 * x * x)
            .sum();
        best = best.min(v);
    }
    Ok(best)
}

/// Supergradient of `q` at `Λ`: `W − Z` at the inner minimizer.
pub fn dual_supergradient(inst: &TinyInstance, lambda: &Tensor) -> Result<Tensor> {
    check_lambda(inst, lambda)?;
    let (mask, _) = best_support(inst, lambda.data())?;
    let rho = inst.rho;
    let g = inst
        .target
        .data()
        .iter()
        .zip(lambda.data())
        .enumerate()
        .map(|(i, (&a, &l))| {
            if mask & (1 << i) != 0 {
                -l / rho
            } else {
                (a - l) / (1.0 + rho)
            }
        })
        .collect();
    Tensor::from_vec(inst.target.shape(), g)
}

/// Budget for [`dual_argmax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSearch {
    /// Bisection steps on the water level.
    pub max_iterations: usize,
}

impl Default for DualSearch {
    fn default() -> Self {
        Self {
            max_iterations: 200,
        }
    }
}

/// Inclusion weight `p_i` of a coordinate at water level `nu`.
fn inclusion(a: f64, rho: f64, nu: f64) -> f64 {
    (a.abs() * libm::sqrt(rho * (1.0 + rho) / (2.0 * nu)) - rho).clamp(0.0, 1.0)
}

/// Maximizer of `q`.
///
/// `q` is the minimum over supports of separable concave quadratics, so by
/// the minimax theorem its maximum equals the minimum over inclusion
/// weights `p ∈ [0, 1]ⁿ, Σ p_i <= l` (the convex hull of the supports) of
///
/// ```text
/// Σ_i max_λ [p_i·in_i(λ) + (1 − p_i)·out_i(λ)] = Σ_i a_i² ρ (1 − p_i) / (2 (p_i + ρ))
/// ```
///
/// attained at `λ_i = (1 − p_i) a_i ρ / (p_i + ρ)`. The outer problem is a
/// strictly convex allocation solved by bisection on the water level of
/// `Σ p_i = l`; strict concavity of the inner problem makes the resulting
/// `Λ*` the unique maximizer of `q`.
pub fn dual_argmax(inst: &TinyInstance, search: DualSearch) -> Result<Tensor> {
    // enumeration cap applies to every oracle entry point
    inst.supports()?;
    let a = inst.target.data();
    let rho = inst.rho;
    let n = a.len();
    let weights: Vec<f64> = if inst.budget >= n {
        vec![1.0; n]
    } else if inst.budget == 0 {
        vec![0.0; n]
    } else {
        let total = |nu: f64| a.iter().map(|&x| inclusion(x, rho, nu)).sum::<f64>();
        // Σ p is decreasing in nu; bracket the level where it equals l.
        let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut hi = amax * amax * (1.0 + rho) / (2.0 * rho) + 1.0;
        let mut lo = hi;
        while total(lo) < inst.budget as f64 && lo > f64::MIN_POSITIVE {
            lo *= 0.5;
        }
        for _ in 0..search.max_iterations {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) > inst.budget as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        a.iter().map(|&x| inclusion(x, rho, hi)).collect()
    };
    let lambda = a
        .iter()
        .zip(&weights)
        .map(|(&x, &p)| (1.0 - p) * x * rho / (p + rho))
        .collect();
    Tensor::from_vec(inst.target.shape(), lambda)
}

/// `f(W) = ½‖W − a‖²` with the loss subproblem solved exactly:
/// `W = (a − Λ + ρZ) / (1 + ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    target: Tensor,
    weights: WeightSet,
}

impl QuadraticModel {
    /// Starts at the unconstrained minimizer `W = a`.
    pub fn new(inst: &TinyInstance) -> Self {
        Self {
            target: inst.target.clone(),
            weights: WeightSet::new(vec![inst.target.clone()]),
        }
    }
}

impl LossModel for QuadraticModel {
    fn weights(&self) -> &WeightSet {
        &self.weights
    }

    fn condition_loss(&self) -> Result<f64> {
        Ok(0.5 * self.weights.layers()[0].sub(&self.target)?.frobenius_norm_sq())
    }

    fn minimize_penalized(
        &mut self,
        z: &WeightSet,
        multipliers: &MultiplierSet,
        rho: f64,
        _steps: usize,
    ) -> Result<()> {
        self.weights.check_parallel(z)?;
        self.weights.check_parallel(multipliers)?;
        let a = self.target.data();
        let zl = z.layers()[0].data();
        let ml = multipliers.layers()[0].data();
        let w: Vec<f64> = (0..a.len())
            .map(|i| (a[i] - ml[i] + rho * zl[i]) / (1.0 + rho))
            .collect();
        self.weights = WeightSet::new(vec![Tensor::from_vec(self.target.shape(), w)?]);
        Ok(())
    }
}

/// Random instance with entries `±U(0.1, 2)`, resampled until the
/// magnitudes are distinct.
pub fn random_instance(rng: &mut Rng, entries: usize, budget: usize, rho: f64) -> Result<TinyInstance> {
    loop {
        let a: Vec<f64> = (0..entries)
            .map(|_| {
                let v = rng.uniform(0.1, 2.0);
                if rng.next_f64() < 0.5 {
                    -v
                } else {
                    v
                }
            })
            .collect();
        match TinyInstance::new(Tensor::vector(a)?, budget, rho) {
            Err(Error::InvalidParameter { name: "target", .. }) => continue,
            other => return other,
        }
    }
}

/// Multiplier trajectory of SLR on a tiny instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRun {
    pub lambda_star: Tensor,
    pub q_star: f64,
    pub primal: f64,
    /// `‖Λ⁰ − Λ*‖`.
    pub initial_distance: f64,
    /// `‖Λᴷ − Λ*‖` after the last iteration.
    pub final_distance: f64,
    /// `q(Λᵏ)` after each iteration.
    pub dual_values: Vec<f64>,
    pub lambda: Tensor,
}

impl DualRun {
    pub fn contraction(&self) -> f64 {
        if self.initial_distance == 0.0 {
            if self.final_distance == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.final_distance / self.initial_distance
        }
    }

    /// Largest `q(Λᵏ) − primal`; weak duality makes this `<= 0`.
    pub fn max_duality_excess(&self) -> f64 {
        self.dual_values
            .iter()
            .map(|q| q - self.primal)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs `iterations` SLR iterations with the exact W-solve, from `W⁰ = a`.
pub fn slr_dual_run(inst: &TinyInstance, params: &SlrParams, iterations: usize) -> Result<DualRun> {
    let lambda_star = dual_argmax(inst, DualSearch::default())?;
    let q_star = dual_value(inst, &lambda_star)?;
    let primal = primal_optimum(inst)?;
    let mut model = QuadraticModel::new(inst);
    let budget = inst.sparsity_budget();
    let params = SlrParams { rho: inst.rho, ..*params };
    let (mut z, mut lambda, mut state) = slr_init(model.weights(), &budget, &params)?;
    let initial_distance = lambda.layers()[0].sub(&lambda_star)?.frobenius_norm();
    let mut dual_values = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        slr_iterate(&mut model, &mut z, &mut lambda, &mut state, &budget)?;
        dual_values.push(dual_value(inst, &lambda.layers()[0])?);
    }
    let lambda = lambda.layers()[0].clone();
    Ok(DualRun {
        final_distance: lambda.sub(&lambda_star)?.frobenius_norm(),
        lambda_star,
        q_star,
        primal,
        initial_distance,
        dual_values,
        lambda,
    })
}
