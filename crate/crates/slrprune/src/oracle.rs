//! Dual-oracle check: SLR multipliers against the exact dual maximizer on
//! seeded tiny instances.

use serde::Serialize;
use slrprune_core::dual::{random_instance, slr_dual_run};
use slrprune_core::rng::Rng;
use slrprune_core::slr::SlrParams;

use crate::error::Result;

pub const ORACLE_ENTRIES: usize = 6;
pub const ORACLE_BUDGET: usize = 2;
/// Required contraction `‖Λᴷ − Λ*‖ / ‖Λ⁰ − Λ*‖`.
pub const ORACLE_CONTRACTION: f64 = 0.1;
/// Slack allowed on `q(Λᵏ) <= primal optimum` for rounding.
pub const WEAK_DUALITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub instance: usize,
    pub target: String,
    pub primal: f64,
    pub q_star: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub contraction: f64,
    pub max_duality_excess: f64,
    pub passed: bool,
}

/// Instance `i` draws from stream `i` of the seed.
pub fn oracle_check(seed: u64, instances: usize, iterations: usize, params: &SlrParams) -> Result<Vec<OracleRow>> {
    let root = Rng::new(seed);
    (0..instances)
        .map(|i| {
            let inst = random_instance(&mut root.fork(i as u64), ORACLE_ENTRIES, ORACLE_BUDGET, params.rho)?;
            let run = slr_dual_run(&inst, params, iterations)?;
            let contraction = run.contraction();
            let excess = run.max_duality_excess();
            Ok(OracleRow {
                instance: i,
                target: inst
                    .target()
                    .data()
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                primal: run.primal,
                q_star: run.q_star,
                initial_distance: run.initial_distance,
                final_distance: run.final_distance,
                contraction,
                max_duality_excess: excess,
                passed: contraction <= ORACLE_CONTRACTION && excess <= WEAK_DUALITY_SLACK,
            })
        })
        .collect()
}
