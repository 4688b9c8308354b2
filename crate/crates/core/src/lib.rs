//! Cardinality-constrained weight pruning by surrogate Lagrangian
//! relaxation, with an ADMM baseline and a brute-force dual oracle.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, datasets, and
//! the command-line harness live in the `slrprune` crate.

#![no_std]

extern crate alloc;

pub mod admm;
pub mod data;
pub mod dual;
mod error;
pub mod model;
pub mod projection;
pub mod prune;
pub mod pruner;
pub mod rng;
pub mod slr;
pub mod tensor;
pub mod trainer;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub use weights::{MultiplierSet, WeightSet};

