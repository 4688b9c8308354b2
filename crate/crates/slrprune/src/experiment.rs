//! Seeded runs: data, pretraining, pruning, hard-pruning, retraining.
//!
//! All randomness derives from the config seed through fixed streams, so
//! every method in a comparison or ablation sees the same data, the same
//! pretrained network, and the same mini-batch order.

use std::fs;
use std::path::Path;
use std::time::Instant;

use slrprune_core::data::{Batch, Dataset, MiniBatchStream};
use slrprune_core::model::{accuracy, Activation, LayerSpec, Network};
use slrprune_core::projection::SparsityBudget;
use slrprune_core::prune::{hard_prune, hardprune_accuracy, masked_retrain, CompressionReport, PruneMask};
use slrprune_core::pruner::Pruner;
use slrprune_core::rng::Rng;
use slrprune_core::slr::RunRecord;
use slrprune_core::trainer::NetworkTrainer;
use slrprune_core::WeightSet;

use crate::checkpoint::{save_network, save_run, write_json};
use crate::config::{DatasetKind, MethodKind, ModelSpec, RunConfig, Sparsity};
use crate::datasets::{generate_synthetic, load_idx, SyntheticKind};
use crate::error::{HarnessError, Result};
use crate::report::{
    summaries_csv, threshold_iteration, write_bytes, write_records, CompressionRow, Summary,
};

const STREAM_TRAIN_DATA: u64 = 1;
const STREAM_TEST_DATA: u64 = 2;
const STREAM_INIT: u64 = 3;
const STREAM_PRETRAIN: u64 = 4;
const STREAM_PRUNE: u64 = 5;
const STREAM_CONDITION: u64 = 6;
const STREAM_RETRAIN: u64 = 7;

/// Train and test data plus the image shape for IDX data.
#[derive(Debug, Clone)]
pub struct Data {
    pub train: Dataset,
    pub test: Dataset,
    pub image_shape: Option<(usize, usize)>,
}

pub fn load_data(cfg: &RunConfig) -> Result<Data> {
    let root = Rng::new(cfg.seed);
    let synthetic = |kind| -> Result<Data> {
        let train_seed = root.fork(STREAM_TRAIN_DATA).next_u64();
        let test_seed = root.fork(STREAM_TEST_DATA).next_u64();
        Ok(Data {
            train: generate_synthetic(kind, cfg.n_samples, cfg.noise, train_seed)?,
            test: generate_synthetic(kind, cfg.n_test, cfg.noise, test_seed)?,
            image_shape: None,
        })
    };
    match cfg.dataset {
        DatasetKind::TwoMoons => synthetic(SyntheticKind::TwoMoons),
        DatasetKind::Spirals => synthetic(SyntheticKind::Spirals),
        DatasetKind::IdxImages => {
            let path = |p: &Option<std::path::PathBuf>| p.clone().expect("validated: idx paths present");
            let classes = match &cfg.model {
                ModelSpec::Mlp(w) => w[w.len() - 1],
                ModelSpec::ConvMlp { widths, .. } => widths[widths.len() - 1],
            };
            let train = load_idx(&path(&cfg.idx_train_images), &path(&cfg.idx_train_labels), Some(classes))?;
            let test = load_idx(&path(&cfg.idx_test_images), &path(&cfg.idx_test_labels), Some(classes))?;
            if (train.rows, train.cols) != (test.rows, test.cols) {
                return Err(HarnessError::Invariant(format!(
                    "train images are {}x{}, test images {}x{}",
                    train.rows, train.cols, test.rows, test.cols
                )));
            }
            Ok(Data {
                image_shape: Some((train.rows, train.cols)),
                train: train.dataset,
                test: test.dataset,
            })
        }
    }
}

/// Layer list for the configured architecture.
pub fn architecture(model: &ModelSpec, data: &Data) -> Result<Vec<LayerSpec>> {
    let dense = |widths: &[usize], input: usize| {
        let mut layers = Vec::new();
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            let act = if i + 1 == widths.len() {
                Activation::Softmax
            } else {
                Activation::Relu
            };
            layers.push(LayerSpec::dense(prev, w, act));
            prev = w;
        }
        layers
    };
    let layers = match model {
        ModelSpec::Mlp(widths) => dense(&widths[1..], widths[0]),
        ModelSpec::ConvMlp {
            channels,
            kernel,
            widths,
        } => {
            let (rows, cols) = data.image_shape.ok_or_else(|| {
                HarnessError::Invariant("conv models need image data".to_string())
            })?;
            let conv = LayerSpec::conv2d(1, *channels, rows, cols, *kernel, Activation::Relu);
            let mut layers = vec![conv];
            layers.extend(dense(widths, conv.output_dim));
            layers
        }
    };
    if layers[0].input_dim != data.train.input_dim() {
        return Err(HarnessError::Invariant(format!(
            "model expects {} inputs, data has {}",
            layers[0].input_dim,
            data.train.input_dim()
        )));
    }
    Ok(layers)
}

pub fn sparsity_budget(sparsity: &Sparsity, weights: &WeightSet) -> Result<SparsityBudget> {
    Ok(match sparsity {
        Sparsity::Fractions(f) if f.len() == 1 => SparsityBudget::uniform(f[0], weights)?,
        Sparsity::Fractions(f) => SparsityBudget::from_fractions(f, weights)?,
        Sparsity::Limits(l) => SparsityBudget::new(l.clone(), weights)?,
    })
}

/// Data, the dense pretrained network, and the budget; shared by every
/// method run on the same config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Data,
    pub pretrained: Network,
    pub budget: SparsityBudget,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let data = load_data(cfg)?;
    let layers = architecture(&cfg.model, &data)?;
    let root = Rng::new(cfg.seed);
    let net = Network::new(layers, &mut root.fork(STREAM_INIT))?;
    let budget = sparsity_budget(&cfg.sparsity, net.weights())?;
    let stream = MiniBatchStream::new(data.train.clone(), cfg.optimizer.batch_size, root.fork(STREAM_PRETRAIN))?;
    let condition = data.train.as_batch().clone();
    let mut trainer = NetworkTrainer::new(net, cfg.optimizer, stream, condition);
    trainer.train_epochs(cfg.pretrain_epochs)?;
    Ok(Prepared {
        data,
        pretrained: trainer.net,
        budget,
    })
}

fn condition_batch(cfg: &RunConfig, train: &Dataset) -> Batch {
    if cfg.condition_size == 0 {
        train.as_batch().clone()
    } else {
        train.sample(cfg.condition_size, &mut Rng::new(cfg.seed).fork(STREAM_CONDITION))
    }
}

/// Everything one method run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub method: MethodKind,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    /// `W` after the last iteration, before hard-pruning.
    pub trained: Network,
    pub pruned: Network,
    pub mask: PruneMask,
    pub retrained: Network,
    pub pruner: Pruner,
    pub compression: CompressionReport,
}

fn require_masked(mask: &PruneMask, w: &WeightSet, budget: &SparsityBudget, what: &str) -> Result<()> {
    if !budget.is_feasible(w) {
        return Err(HarnessError::Invariant(format!(
            "{what}: nonzeros {:?} exceed budget {:?}",
            w.nonzeros(),
            budget.limits()
        )));
    }
    for (n, (t, m)) in w.layers().iter().zip(mask.layers()).enumerate() {
        if t.data().iter().zip(m.data()).any(|(v, keep)| *keep == 0.0 && *v != 0.0) {
            return Err(HarnessError::Invariant(format!("{what}: masked weight in layer {n} is nonzero")));
        }
    }
    Ok(())
}

/// Prunes the prepared network with `cfg.method`, then hard-prunes and
/// retrains. Feasibility of `Z` is checked after every iteration and the
/// mask after hard-pruning and after retraining.
pub fn run_method(cfg: &RunConfig, prepared: &Prepared) -> Result<RunOutcome> {
    let root = Rng::new(cfg.seed);
    let budget = &prepared.budget;
    let train = &prepared.data.train;
    let test = prepared.data.test.as_batch();
    let stream = MiniBatchStream::new(train.clone(), cfg.optimizer.batch_size, root.fork(STREAM_PRUNE))?;
    let mut trainer = NetworkTrainer::new(prepared.pretrained.clone(), cfg.optimizer, stream, condition_batch(cfg, train));
    let mut pruner = Pruner::init(&cfg.pruning_method(), trainer.net.weights(), budget)?;

    let mut records = Vec::with_capacity(cfg.outer_iterations);
    for it in 1..=cfg.outer_iterations {
        let start = Instant::now();
        let mut rec = pruner.iterate(&mut trainer, budget)?;
        if !budget.is_feasible(&pruner.z) {
            return Err(HarnessError::Invariant(format!(
                "iteration {}: Z nonzeros {:?} exceed budget {:?}",
                rec.k,
                pruner.z.nonzeros(),
                budget.limits()
            )));
        }
        if it % cfg.eval_every == 0 || it == cfg.outer_iterations {
            rec.hardprune_acc = Some(hardprune_accuracy(&trainer.net, budget, test)?);
        }
        if cfg.wall_clock {
            rec.wall_ms = start.elapsed().as_millis() as u64;
        }
        log::debug!("{} k={} loss={} violation={}", cfg.method.name(), rec.k, rec.loss, rec.violation);
        records.push(rec);
    }

    let (pruned, mask) = hard_prune(&trainer.net, budget)?;
    require_masked(&mask, pruned.weights(), budget, "hard-pruned network")?;
    let hardprune_acc = accuracy(&pruned, test)?;
    let mut retrained = pruned.clone();
    let mut retrain_stream = MiniBatchStream::new(train.clone(), cfg.optimizer.batch_size, root.fork(STREAM_RETRAIN))?;
    masked_retrain(&mut retrained, &mask, cfg.retrain_epochs, cfg.optimizer, &mut retrain_stream)?;
    require_masked(&mask, retrained.weights(), budget, "retrained network")?;
    let retrain_acc = accuracy(&retrained, test)?;
    let compression = CompressionReport::from_weights(retrained.weights());

    let summary = Summary {
        method: cfg.method.name().to_string(),
        seed: cfg.seed,
        iterations: records.len(),
        final_violation: records.last().map_or(0.0, |r| r.violation),
        hardprune_acc,
        retrain_acc,
        total_weights: compression.total_weights,
        nonzero_weights: compression.nonzero_weights,
        compression_rate: compression.compression_rate,
        accuracy_threshold: cfg.accuracy_threshold,
        iters_to_threshold: threshold_iteration(
            records.iter().map(|r| (r.k, r.hardprune_acc)),
            cfg.accuracy_threshold,
        ),
        soc_both: records.iter().filter(|r| r.soc_w && r.soc_z).count(),
    };
    Ok(RunOutcome {
        method: cfg.method,
        records,
        summary,
        trained: trainer.net,
        pruned,
        mask,
        retrained,
        pruner,
        compression,
    })
}

pub fn run_single(cfg: &RunConfig) -> Result<RunOutcome> {
    let prepared = prepare(cfg)?;
    run_method(cfg, &prepared)
}

/// Refuses configs that differ in anything but method-specific fields.
pub fn check_comparable(a: &RunConfig, b: &RunConfig) -> Result<()> {
    let diffs: Vec<String> = a
        .shared_fields()
        .into_iter()
        .zip(b.shared_fields())
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, y)| format!("{} ({} vs {})", x.0, x.1, y.1))
        .collect();
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Mismatch(format!("shared fields differ: {}", diffs.join(", "))))
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub slr: RunOutcome,
    pub admm: RunOutcome,
}

pub fn run_comparison(cfg_slr: &RunConfig, cfg_admm: &RunConfig) -> Result<Comparison> {
    if cfg_slr.method != MethodKind::Slr || cfg_admm.method != MethodKind::Admm {
        return Err(HarnessError::Mismatch(format!(
            "expected an slr and an admm config, got {} and {}",
            cfg_slr.method.name(),
            cfg_admm.method.name()
        )));
    }
    check_comparable(cfg_slr, cfg_admm)?;
    let prepared = prepare(cfg_slr)?;
    Ok(Comparison {
        slr: run_method(cfg_slr, &prepared)?,
        admm: run_method(cfg_admm, &prepared)?,
    })
}

/// One ablation grid point: `(s0, M, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub s0: f64,
    pub m: f64,
    pub r: f64,
}

impl GridPoint {
    pub fn label(&self) -> String {
        format!("s0={}_M={}_r={}", self.s0, self.m, self.r)
    }
}

/// Cartesian product of the `ablate_*` axes; an empty axis contributes the
/// base value.
pub fn ablation_grid(base: &RunConfig) -> Vec<GridPoint> {
    let axis = |values: &[f64], base: f64| if values.is_empty() { vec![base] } else { values.to_vec() };
    let mut grid = Vec::new();
    for &s0 in &axis(&base.ablate_s0, base.s0) {
        for &m in &axis(&base.ablate_m, base.m) {
            for &r in &axis(&base.ablate_r, base.r) {
                grid.push(GridPoint { s0, m, r });
            }
        }
    }
    grid
}

/// SLR runs over `grid`, sharing data and pretraining.
pub fn run_ablation(base: &RunConfig, grid: &[GridPoint]) -> Result<Vec<(GridPoint, RunOutcome)>> {
    if base.method != MethodKind::Slr {
        return Err(HarnessError::Mismatch("ablation sweeps SLR parameters; set method = slr".to_string()));
    }
    if grid.is_empty() {
        return Err(HarnessError::Mismatch("ablation grid is empty".to_string()));
    }
    let prepared = prepare(base)?;
    grid.iter()
        .map(|&p| {
            let cfg = RunConfig {
                s0: p.s0,
                m: p.m,
                r: p.r,
                ..base.clone()
            };
            cfg.validate()?;
            Ok((p, run_method(&cfg, &prepared)?))
        })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// `<name>_records.csv`, `<name>_summary.json`, `<name>_network.json`
/// (the retrained network), and `<name>_run.json`.
pub fn write_outcome(dir: &Path, name: &str, outcome: &RunOutcome) -> Result<()> {
    ensure_dir(dir)?;
    write_records(&dir.join(format!("{name}_records.csv")), &outcome.records)?;
    write_json(&dir.join(format!("{name}_summary.json")), &outcome.summary)?;
    write_json(
        &dir.join(format!("{name}_compression.json")),
        &CompressionRow::from(&outcome.compression),
    )?;
    save_network(&dir.join(format!("{name}_network.json")), &outcome.retrained, outcome.method.name())?;
    save_run(&dir.join(format!("{name}_run.json")), outcome.trained.weights(), &outcome.pruner)
}

pub fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<()> {
    write_outcome(dir, "slr", &cmp.slr)?;
    write_outcome(dir, "admm", &cmp.admm)?;
    let rows = [cmp.slr.summary.clone(), cmp.admm.summary.clone()];
    write_bytes(&dir.join("comparison.csv"), &summaries_csv(&rows)?)?;
    write_json(&dir.join("comparison.json"), &rows)
}

#[derive(Debug, Clone, serde::Serialize)]
struct AblationRow {
    run: String,
    s0: f64,
    #[serde(rename = "M")]
    m: f64,
    r: f64,
    hardprune_acc: f64,
    retrain_acc: f64,
    compression_rate: f64,
    final_violation: f64,
    iters_to_threshold: Option<u64>,
    soc_both: usize,
    iterations: usize,
}

/// Per-run outputs plus `ablation.csv` (one summary row per grid point)
/// and `soc_series.csv` (`run, k, soc_w, soc_z` for every iteration).
pub fn write_ablation(dir: &Path, runs: &[(GridPoint, RunOutcome)]) -> Result<()> {
    ensure_dir(dir)?;
    let mut summary = csv::Writer::from_writer(Vec::new());
    let mut soc = csv::Writer::from_writer(Vec::new());
    soc.write_record(["run", "k", "soc_w", "soc_z"])?;
    for (p, outcome) in runs {
        let label = p.label();
        write_outcome(dir, &label, outcome)?;
        summary.serialize(AblationRow {
            run: label.clone(),
            s0: p.s0,
            m: p.m,
            r: p.r,
            hardprune_acc: outcome.summary.hardprune_acc,
            retrain_acc: outcome.summary.retrain_acc,
            compression_rate: outcome.summary.compression_rate,
            final_violation: outcome.summary.final_violation,
            iters_to_threshold: outcome.summary.iters_to_threshold,
            soc_both: outcome.summary.soc_both,
            iterations: outcome.summary.iterations,
        })?;
        for r in &outcome.records {
            soc.write_record([
                label.as_str(),
                &r.k.to_string(),
                if r.soc_w { "1" } else { "0" },
                if r.soc_z { "1" } else { "0" },
            ])?;
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()));
    write_bytes(&dir.join("ablation.csv"), &finish(summary)?)?;
    write_bytes(&dir.join("soc_series.csv"), &finish(soc)?)
}
