//! Hard-pruning, masked retraining, and compression accounting.

use alloc::vec::Vec;

use crate::data::{Batch, MiniBatchStream};
use crate::error::{Error, Result};
use crate::model::{accuracy, Network, Optimizer, OptimizerConfig};
use crate::projection::{top_magnitude_support, SparsityBudget};
use crate::tensor::Tensor;
use crate::weights::WeightSet;

/// Per-layer 0/1 tensors, 1 = keep.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    layers: Vec<Tensor>,
}

impl PruneMask {
    pub fn layers(&self) -> &[Tensor] {
        &self.layers
    }

    pub fn kept(&self) -> Vec<usize> {
        self.layers.iter().map(Tensor::count_nonzero).collect()
    }

    /// Multiplies every layer of `w` by the mask in place.
    pub fn apply(&self, w: &mut WeightSet) -> Result<()> {
        if w.len() != self.layers.len() {
            return Err(Error::LayerCountMismatch {
                expected: self.layers.len(),
                found: w.len(),
            });
        }
        for (t, m) in w.layers_mut().iter_mut().zip(&self.layers) {
            t.same_shape(m)?;
            for (v, keep) in t.data_mut().iter_mut().zip(m.data()) {
                if *keep == 0.0 {
                    *v = 0.0;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCompression {
    pub total: usize,
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub total_weights: usize,
    pub nonzero_weights: usize,
    /// `total / nonzero`; infinite when every weight is zero.
    pub compression_rate: f64,
    pub per_layer: Vec<LayerCompression>,
}

impl CompressionReport {
    /// Counts exact-zero entries of `w`; biases are not included.
    pub fn from_weights(w: &WeightSet) -> Self {
        let per_layer: Vec<_> = w
            .layers()
            .iter()
            .map(|t| LayerCompression {
                total: t.len(),
                nonzero: t.count_nonzero(),
            })
            .collect();
        let total_weights = per_layer.iter().map(|l| l.total).sum();
        let nonzero_weights = per_layer.iter().map(|l| l.nonzero).sum();
        Self {
            total_weights,
            nonzero_weights,
            compression_rate: total_weights as f64 / nonzero_weights as f64,
            per_layer,
        }
    }
}

/// Keeps the top-`l_n` magnitudes of each layer of `W` and sets the rest to
/// exactly zero.
pub fn hard_prune(net: &Network, budget: &SparsityBudget) -> Result<(Network, PruneMask)> {
    budget.check(net.weights())?;
    let mut layers = Vec::with_capacity(budget.limits().len());
    for (t, &l) in net.weights().layers().iter().zip(budget.limits()) {
        let mut mask = alloc::vec![0.0; t.len()];
        for i in top_magnitude_support(t.data(), l.min(t.len())) {
            mask[i] = 1.0;
        }
        layers.push(Tensor::from_vec(t.shape(), mask)?);
    }
    let mask = PruneMask { layers };
    let mut pruned = net.clone();
    mask.apply(pruned.weights_mut())?;
    Ok((pruned, mask))
}

/// Fine-tunes a hard-pruned network with the weight gradients multiplied by
/// the mask before each step, using a fresh optimizer so masked entries
/// stay exactly zero.
pub fn masked_retrain(
    net: &mut Network,
    mask: &PruneMask,
    epochs: usize,
    cfg: OptimizerConfig,
    stream: &mut MiniBatchStream,
) -> Result<()> {
    if epochs == 0 {
        return Ok(());
    }
    mask.apply(net.weights_mut())?;
    let mut optimizer = Optimizer::new(cfg);
    for _ in 0..epochs * stream.steps_per_epoch() {
        let batch = stream.next_batch();
        let (_, mut grad) = net.backward(&batch)?;
        mask.apply(&mut grad.weights)?;
        optimizer.step(net, &grad)?;
    }
    Ok(())
}

pub fn evaluate_accuracy(net: &Network, data: &Batch) -> Result<f64> {
    accuracy(net, data)
}

/// Accuracy of `hard_prune(net)` without keeping the pruned copy.
pub fn hardprune_accuracy(net: &Network, budget: &SparsityBudget, data: &Batch) -> Result<f64> {
    let (pruned, _) = hard_prune(net, budget)?;
    accuracy(&pruned, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, LayerSpec};
    use crate::rng::Rng;

    fn net() -> Network {
        let layers = alloc::vec![
            LayerSpec::dense(4, 5, Activation::Relu),
            LayerSpec::dense(5, 4, Activation::Softmax),
        ];
        Network::new(layers, &mut Rng::new(3)).unwrap()
    }

    #[test]
    fn full_budget_is_identity() {
        let n = net();
        let budget = SparsityBudget::dense(n.weights());
        let (pruned, mask) = hard_prune(&n, &budget).unwrap();
        assert_eq!(pruned, n);
        assert_eq!(mask.kept(), alloc::vec![20, 20]);
        assert_eq!(CompressionReport::from_weights(pruned.weights()).compression_rate, 1.0);
    }

    #[test]
    fn counts_and_rate() {
        let n = net();
        let budget = SparsityBudget::new(alloc::vec![3, 1], n.weights()).unwrap();
        let (pruned, mask) = hard_prune(&n, &budget).unwrap();
        assert_eq!(pruned.weights().nonzeros(), alloc::vec![3, 1]);
        assert_eq!(mask.kept(), alloc::vec![3, 1]);
        let report = CompressionReport::from_weights(pruned.weights());
        assert_eq!(report.total_weights, 40);
        assert_eq!(report.nonzero_weights, 4);
        assert_eq!(report.compression_rate, 10.0);
    }

    #[test]
    fn budget_mismatch_is_error() {
        let n = net();
        let w = WeightSet::new(alloc::vec![Tensor::zeros(&[1]).unwrap()]);
        let other = SparsityBudget::dense(&w);
        assert!(hard_prune(&n, &other).is_err());
    }
}
