use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slrprune::checkpoint::{load_network, write_json};
use slrprune::config::{load_config, MethodKind, RunConfig};
use slrprune::error::{HarnessError, EXIT_CONFIG};
use slrprune::experiment::{
    ablation_grid, ensure_dir, load_data, run_ablation, run_comparison, run_single, write_ablation,
    write_comparison, write_outcome, RunOutcome,
};
use slrprune::oracle::oracle_check;
use slrprune::report::{write_bytes, CompressionRow};
use slrprune_core::model::accuracy;
use slrprune_core::prune::CompressionReport;

#[derive(Debug, Parser)]
#[command(name = "slrprune", version, about = "Weight pruning by surrogate Lagrangian relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key=value config file; all keys default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pretrain, prune with the configured method, hard-prune, and retrain.
    Train,
    /// Run SLR and ADMM on the same data, pretraining, and budget.
    Compare,
    /// Sweep the SLR schedule over the ablate_s0 / ablate_M / ablate_r grid.
    Ablate,
    /// Check SLR multiplier convergence against the exact dual maximizer.
    OracleCheck,
    /// Evaluate a network checkpoint on the configured test data.
    Eval,
}

fn config(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn report(outcome: &RunOutcome) {
    let s = &outcome.summary;
    println!(
        "{}: hardprune_acc={:.4} retrain_acc={:.4} compression={:.2}x iters_to_{}={} soc_both={}/{}",
        s.method,
        s.hardprune_acc,
        s.retrain_acc,
        s.compression_rate,
        s.accuracy_threshold,
        s.iters_to_threshold.map_or("never".to_string(), |k| k.to_string()),
        s.soc_both,
        s.iterations
    );
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = config(cli)?;
    let out = &cfg.output_dir;
    match cli.command {
        Command::Train => {
            let outcome = run_single(&cfg)?;
            write_outcome(out, cfg.method.name(), &outcome)?;
            report(&outcome);
        }
        Command::Compare => {
            let slr = RunConfig {
                method: MethodKind::Slr,
                ..cfg.clone()
            };
            let admm = RunConfig {
                method: MethodKind::Admm,
                ..cfg.clone()
            };
            let cmp = run_comparison(&slr, &admm)?;
            write_comparison(out, &cmp)?;
            report(&cmp.slr);
            report(&cmp.admm);
        }
        Command::Ablate => {
            let runs = run_ablation(&cfg, &ablation_grid(&cfg))?;
            write_ablation(out, &runs)?;
            for (p, outcome) in &runs {
                print!("{} ", p.label());
                report(outcome);
            }
        }
        Command::OracleCheck => {
            let rows = oracle_check(cfg.seed, cfg.oracle_instances, cfg.oracle_iterations, &cfg.slr_params())?;
            ensure_dir(out)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row)?;
                println!(
                    "instance {}: contraction={:.4} max q-primal={:.3e} {}",
                    row.instance,
                    row.contraction,
                    row.max_duality_excess,
                    if row.passed { "pass" } else { "FAIL" }
                );
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
            write_bytes(&out.join("oracle.csv"), &bytes)?;
            let failed: Vec<usize> = rows.iter().filter(|r| !r.passed).map(|r| r.instance).collect();
            if !failed.is_empty() {
                return Err(HarnessError::Invariant(format!("dual oracle check failed on instances {failed:?}")));
            }
        }
        Command::Eval => {
            let path = cfg.checkpoint.clone().ok_or_else(|| {
                HarnessError::Config(slrprune::config::ConfigError::Invalid {
                    key: "checkpoint".to_string(),
                    message: "required by eval".to_string(),
                })
            })?;
            let (net, method) = load_network(&path)?;
            let data = load_data(&cfg)?;
            let acc = accuracy(&net, data.test.as_batch())?;
            let row = CompressionRow::from(&CompressionReport::from_weights(net.weights()));
            ensure_dir(out)?;
            write_json(
                &out.join("eval.json"),
                &serde_json::json!({ "method": method, "accuracy": acc, "compression": row }),
            )?;
            println!(
                "{method}: accuracy={acc:.4} compression={:.2}x ({}/{} nonzero)",
                row.compression_rate, row.nonzero_weights, row.total_weights
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
