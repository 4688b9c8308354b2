//! Network training state that plugs into the SLR and ADMM drivers.

use crate::data::{Batch, MiniBatchStream};
use crate::error::Result;
use crate::model::{Network, Optimizer, OptimizerConfig};
use crate::slr::{penalized_gradient, LossModel};
use crate::weights::{MultiplierSet, WeightSet};

/// A network, its optimizer state, its training stream, and the fixed
/// batch on which `f` is evaluated for the surrogate conditions.
#[derive(Debug, Clone)]
pub struct NetworkTrainer {
    pub net: Network,
    pub optimizer: Optimizer,
    pub stream: MiniBatchStream,
    pub condition: Batch,
}

impl NetworkTrainer {
    pub fn new(net: Network, cfg: OptimizerConfig, stream: MiniBatchStream, condition: Batch) -> Self {
        Self {
            net,
            optimizer: Optimizer::new(cfg),
            stream,
            condition,
        }
    }

    /// Plain unconstrained training.
    pub fn train_epochs(&mut self, epochs: usize) -> Result<()> {
        for _ in 0..epochs * self.stream.steps_per_epoch() {
            let batch = self.stream.next_batch();
            let (_, grad) = self.net.backward(&batch)?;
            self.optimizer.step(&mut self.net, &grad)?;
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.stream.steps_per_epoch()
    }
}

impl LossModel for NetworkTrainer {
    fn weights(&self) -> &WeightSet {
        self.net.weights()
    }

    fn condition_loss(&self) -> Result<f64> {
        self.net.loss(&self.condition)
    }

    fn minimize_penalized(
        &mut self,
        z: &WeightSet,
        multipliers: &MultiplierSet,
        rho: f64,
        steps: usize,
    ) -> Result<()> {
        for _ in 0..steps {
            let batch = self.stream.next_batch();
            let (_, grad) = penalized_gradient(&self.net, &batch, z, multipliers, rho)?;
            self.optimizer.step(&mut self.net, &grad)?;
        }
        Ok(())
    }
}
