//! Euclidean projection onto cardinality sets and per-layer budgets.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;
use crate::weights::WeightSet;

/// Per-layer nonzero allowance `l_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityBudget {
    limits: Vec<usize>,
}

impl SparsityBudget {
    /// Explicit limits, checked against the layer sizes of `weights`.
    pub fn new(limits: Vec<usize>, weights: &WeightSet) -> Result<Self> {
        let budget = Self { limits };
        budget.check(weights)?;
        Ok(budget)
    }

    /// `l_n = floor((1 - p_n) * card_n)` for sparsity fractions `p_n`.
    ///
    /// A `1e-9` guard absorbs representation error, so `0.9` on a
    /// 100-weight layer keeps exactly 10.
    pub fn from_fractions(fractions: &[f64], weights: &WeightSet) -> Result<Self> {
        if fractions.len() != weights.len() {
            return Err(Error::LayerCountMismatch {
                expected: weights.len(),
                found: fractions.len(),
            });
        }
        let mut limits = Vec::with_capacity(fractions.len());
        for (&p, layer) in fractions.iter().zip(weights.layers()) {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("sparsity", alloc::format!("{p} is outside [0, 1]")));
            }
            let keep = libm::floor((1.0 - p) * layer.len() as f64 + 1e-9) as usize;
            limits.push(keep.min(layer.len()));
        }
        Ok(Self { limits })
    }

    /// Same fraction for every layer.
    pub fn uniform(fraction: f64, weights: &WeightSet) -> Result<Self> {
        Self::from_fractions(&alloc::vec![fraction; weights.len()], weights)
    }

    /// No pruning at all.
    pub fn dense(weights: &WeightSet) -> Self {
        Self {
            limits: weights.layers().iter().map(Tensor::len).collect(),
        }
    }

    pub fn limits(&self) -> &[usize] {
        &self.limits
    }

    pub fn total(&self) -> usize {
        self.limits.iter().sum()
    }

    pub fn check(&self, weights: &WeightSet) -> Result<()> {
        if self.limits.len() != weights.len() {
            return Err(Error::LayerCountMismatch {
                expected: weights.len(),
                found: self.limits.len(),
            });
        }
        for (layer, (&l, t)) in self.limits.iter().zip(weights.layers()).enumerate() {
            if l > t.len() {
                return Err(Error::BudgetOutOfRange {
                    layer,
                    budget: l,
                    len: t.len(),
                });
            }
        }
        Ok(())
    }

    /// Whether every layer satisfies `card(W_n) <= l_n`.
    pub fn is_feasible(&self, weights: &WeightSet) -> bool {
        self.limits.len() == weights.len()
            && weights
                .layers()
                .iter()
                .zip(&self.limits)
                .all(|(t, &l)| t.count_nonzero() <= l)
    }

    /// First layer violating its limit, as an error.
    pub fn require_feasible(&self, weights: &WeightSet) -> Result<()> {
        self.check(weights)?;
        for (layer, (t, &budget)) in weights.layers().iter().zip(&self.limits).enumerate() {
            let nonzeros = t.count_nonzero();
            if nonzeros > budget {
                return Err(Error::Infeasible {
                    layer,
                    nonzeros,
                    budget,
                });
            }
        }
        Ok(())
    }
}

/// Indices of the `l` largest-magnitude entries. Equal magnitudes are
/// ranked by ascending flat index.
pub fn top_magnitude_support(values: &[f64], l: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let order = |a: &usize, b: &usize| -> Ordering {
        values[*b]
            .abs()
            .total_cmp(&values[*a].abs())
            .then(a.cmp(b))
    };
    if l == 0 {
        return Vec::new();
    }
    if l < idx.len() {
        idx.select_nth_unstable_by(l - 1, order);
        idx.truncate(l);
    }
    idx.sort_unstable();
    idx
}

/// Keeps the `l` largest-magnitude entries of `v` and zeroes the rest: the
/// Euclidean projection onto `{Z : card(Z) <= l}`.
pub fn project_cardinality(v: &Tensor, l: usize) -> Result<Tensor> {
    if l > v.len() {
        return Err(Error::BudgetOutOfRange {
            layer: 0,
            budget: l,
            len: v.len(),
        });
    }
    let mut data = alloc::vec![0.0; v.len()];
    for i in top_magnitude_support(v.data(), l) {
        data[i] = v.data()[i];
    }
    Tensor::from_vec(v.shape(), data)
}

/// Layerwise projection of a whole weight set onto its budget.
pub fn project_weight_set(v: &WeightSet, budget: &SparsityBudget) -> Result<WeightSet> {
    budget.check(v)?;
    let layers = v
        .layers()
        .iter()
        .zip(budget.limits())
        .enumerate()
        .map(|(n, (t, &l))| {
            project_cardinality(t, l).map_err(|e| match e {
                Error::BudgetOutOfRange { budget, len, .. } => Error::BudgetOutOfRange {
                    layer: n,
                    budget,
                    len,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    Ok(WeightSet::new(layers))
}
