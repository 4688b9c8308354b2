//! Method-agnostic handle over an SLR or ADMM run.

use crate::admm::{admm_init, admm_iterate, AdmmState};
use crate::error::Result;
use crate::projection::SparsityBudget;
use crate::slr::{slr_init, slr_iterate, LossModel, RunRecord, SlrParams, SlrState};
use crate::weights::{MultiplierSet, WeightSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Slr(SlrParams),
    Admm { rho: f64, inner_steps: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Slr(_) => "slr",
            Method::Admm { .. } => "admm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrunerState {
    Slr(SlrState),
    Admm(AdmmState),
}

/// Duplicate weights, multipliers, and method state for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruner {
    pub z: WeightSet,
    pub multipliers: MultiplierSet,
    pub state: PrunerState,
}

impl Pruner {
    pub fn init(method: &Method, w0: &WeightSet, budget: &SparsityBudget) -> Result<Self> {
        let (z, multipliers, state) = match *method {
            Method::Slr(params) => {
                let (z, m, s) = slr_init(w0, budget, &params)?;
                (z, m, PrunerState::Slr(s))
            }
            Method::Admm { rho, inner_steps } => {
                let (z, m, s) = admm_init(w0, budget, rho, inner_steps)?;
                (z, m, PrunerState::Admm(s))
            }
        };
        Ok(Self {
            z,
            multipliers,
            state,
        })
    }

    pub fn iterate<M: LossModel + ?Sized>(
        &mut self,
        model: &mut M,
        budget: &SparsityBudget,
    ) -> Result<RunRecord> {
        match &mut self.state {
            PrunerState::Slr(s) => slr_iterate(model, &mut self.z, &mut self.multipliers, s, budget),
            PrunerState::Admm(s) => {
                admm_iterate(model, &mut self.z, &mut self.multipliers, s, budget)
            }
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self.state {
            PrunerState::Slr(_) => "slr",
            PrunerState::Admm(_) => "admm",
        }
    }
}
