//! File formats, datasets, and the experiment harness around
//! [`slrprune_core`].

pub mod checkpoint;
pub mod config;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod report;

pub use error::{HarnessError, Result};
pub use slrprune_core as core;
