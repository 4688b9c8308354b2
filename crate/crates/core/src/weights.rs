//! Per-layer tensor collections: weights `W`, their duplicates `Z`, and the
//! multipliers `Λ` coupling them.

use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One tensor per prunable layer. Layer count and shapes are fixed for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    layers: Vec<Tensor>,
}

impl WeightSet {
    pub fn new(layers: Vec<Tensor>) -> Self {
        Self { layers }
    }

    pub fn zeros_like(other: &WeightSet) -> Self {
        let layers = other
            .layers
            .iter()
            .map(|t| Tensor::zeros(t.shape()).expect("existing shape is valid"))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Tensor] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Tensor] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Tensor> {
        self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn total_len(&self) -> usize {
        self.layers.iter().map(Tensor::len).sum()
    }

    pub fn nonzeros(&self) -> Vec<usize> {
        self.layers.iter().map(Tensor::count_nonzero).collect()
    }

    pub fn check_parallel(&self, other: &WeightSet) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::LayerCountMismatch {
                expected: self.layers.len(),
                found: other.layers.len(),
            });
        }
        self.layers
            .iter()
            .zip(&other.layers)
            .try_for_each(|(a, b)| a.same_shape(b))
    }

    /// Layerwise `self - other`.
    pub fn sub(&self, other: &WeightSet) -> Result<WeightSet> {
        self.check_parallel(other)?;
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    /// Layerwise `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &WeightSet) -> Result<()> {
        self.check_parallel(other)?;
        self.layers
            .iter_mut()
            .zip(&other.layers)
            .try_for_each(|(s, o)| s.add_scaled(a, o))
    }

    /// `Σ_n tr(selfₙᵀ otherₙ)`.
    pub fn dot(&self, other: &WeightSet) -> Result<f64> {
        self.check_parallel(other)?;
        self.layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    /// Frobenius norm over the concatenation of all layers.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.layers.iter().map(Tensor::frobenius_norm_sq).sum())
    }

    /// `‖self − other‖` over all layers without allocating.
    pub fn distance(&self, other: &WeightSet) -> Result<f64> {
        self.check_parallel(other)?;
        let sq: f64 = self
            .layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| a.data().iter().zip(b.data()))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(libm::sqrt(sq))
    }
}

/// Lagrangian multipliers, shape-parallel to a [`WeightSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet(pub WeightSet);

impl MultiplierSet {
    pub fn zeros_like(weights: &WeightSet) -> Self {
        Self(WeightSet::zeros_like(weights))
    }

    pub fn into_inner(self) -> WeightSet {
        self.0
    }
}

impl Deref for MultiplierSet {
    type Target = WeightSet;

    fn deref(&self) -> &WeightSet {
        &self.0
    }
}

impl DerefMut for MultiplierSet {
    fn deref_mut(&mut self) -> &mut WeightSet {
        &mut self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ws(values: &[&[f64]]) -> WeightSet {
        WeightSet::new(
            values
                .iter()
                .map(|v| Tensor::vector(v.to_vec()).unwrap())
                .collect(),
        )
    }

    #[test]
    fn norm_concatenates_layers() {
        let w = ws(&[&[3.0], &[4.0, 0.0]]);
        assert_eq!(w.norm(), 5.0);
        assert_eq!(w.distance(&WeightSet::zeros_like(&w)).unwrap(), 5.0);
        assert_eq!(w.nonzeros(), vec![1, 1]);
    }

    #[test]
    fn parallel_checks() {
        let a = ws(&[&[1.0, 2.0]]);
        let b = ws(&[&[1.0, 2.0], &[3.0]]);
        assert!(matches!(
            a.sub(&b),
            Err(Error::LayerCountMismatch { .. })
        ));
        let c = ws(&[&[1.0]]);
        assert!(matches!(a.dot(&c), Err(Error::ShapeMismatch { .. })));
    }
}
