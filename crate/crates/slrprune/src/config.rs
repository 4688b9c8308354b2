//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Every key is optional and unknown or repeated keys are errors. Lists are
//! comma separated.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `method` | `slr` | `slr` or `admm` |
//! | `model` | `mlp-2-16-16-2` | `mlp-<d0>-...-<dn>` or `conv-<channels>x<kernel>-<hidden>-...-<classes>` |
//! | `dataset` | `two_moons` | `two_moons`, `spirals`, or `idx_images` |
//! | `n_samples`, `n_test` | `512`, `512` | synthetic train and test sizes |
//! | `noise` | `0.1` | synthetic coordinate noise |
//! | `idx_train_images`, `idx_train_labels`, `idx_test_images`, `idx_test_labels` | none | IDX paths, required for `idx_images` |
//! | `seed` | `0` | master seed |
//! | `rho`, `M`, `r`, `s0` | `0.1`, `300`, `0.1`, `0.01` | penalty and stepsize schedule |
//! | `stepsize_rule` | `chained` | `chained` or `printed` |
//! | `max_resolve` | `3` | extra subproblem solves when no condition holds |
//! | `sparsity` | `0.9` | pruned fraction, one value for all layers or one per layer |
//! | `budget` | none | explicit kept counts per layer; replaces `sparsity` |
//! | `outer_iterations` | `50` | pruning iterations |
//! | `inner_steps` | `8` | mini-batch steps per loss subproblem (one epoch at the default sizes) |
//! | `eval_every` | `10` | hard-prune accuracy cadence; the last iteration is always evaluated |
//! | `pretrain_epochs` | `20` | dense training before pruning, shared by every method |
//! | `retrain_epochs` | `5` | masked retraining after hard-pruning |
//! | `optimizer`, `learning_rate`, `batch_size` | `adam`, `0.01`, `64` | inner solver |
//! | `condition_size` | `0` | rows of the train set used to evaluate `f` for the surrogate conditions; `0` means all |
//! | `accuracy_threshold` | `0.95` | level for iterations-to-threshold |
//! | `wall_clock` | `false` | record wall time; `false` writes `0` so outputs are reproducible |
//! | `output_dir` | `out` | where CSV, JSON, and checkpoints go |
//! | `checkpoint` | none | network checkpoint read by `eval` |
//! | `ablate_s0`, `ablate_M`, `ablate_r` | empty | ablation grid; an empty axis uses the base value |
//! | `oracle_instances`, `oracle_iterations` | `5`, `200` | dual-oracle check size |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use slrprune_core::model::{OptimizerConfig, OptimizerKind};
use slrprune_core::pruner::Method;
use slrprune_core::slr::{SlrParams, StepsizeRule};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Slr,
    Admm,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Slr => "slr",
            MethodKind::Admm => "admm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    TwoMoons,
    Spirals,
    IdxImages,
}

/// Parsed architecture id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    /// Layer widths from input to classes; ReLU between dense layers.
    Mlp(Vec<usize>),
    /// One ReLU conv layer over the `[1, rows, cols]` image, then dense
    /// layers of the given widths (the last is the class count).
    ConvMlp {
        channels: usize,
        kernel: usize,
        widths: Vec<usize>,
    },
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let numbers = |parts: &[&str]| -> std::result::Result<Vec<usize>, String> {
            parts
                .iter()
                .map(|p| match p.parse::<usize>() {
                    Ok(0) | Err(_) => Err(format!("bad layer width {p:?} in {s:?}")),
                    Ok(v) => Ok(v),
                })
                .collect()
        };
        let parts: Vec<&str> = s.split('-').collect();
        match parts[0] {
            "mlp" if parts.len() >= 3 => Ok(ModelSpec::Mlp(numbers(&parts[1..])?)),
            "conv" if parts.len() >= 3 => {
                let (c, k) = parts[1]
                    .split_once('x')
                    .ok_or_else(|| format!("expected <channels>x<kernel> in {s:?}"))?;
                let ck = numbers(&[c, k])?;
                Ok(ModelSpec::ConvMlp {
                    channels: ck[0],
                    kernel: ck[1],
                    widths: numbers(&parts[2..])?,
                })
            }
            _ => Err(format!(
                "unknown architecture {s:?} (expected mlp-<d0>-...-<dn> or conv-<c>x<k>-<d1>-...-<dn>)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sparsity {
    /// Pruned fraction per layer; a single value applies to every layer.
    Fractions(Vec<f64>),
    /// Kept entries per layer.
    Limits(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodKind,
    pub model: ModelSpec,
    pub model_id: String,
    pub dataset: DatasetKind,
    pub n_samples: usize,
    pub n_test: usize,
    pub noise: f64,
    pub idx_train_images: Option<PathBuf>,
    pub idx_train_labels: Option<PathBuf>,
    pub idx_test_images: Option<PathBuf>,
    pub idx_test_labels: Option<PathBuf>,
    pub seed: u64,
    pub rho: f64,
    pub m: f64,
    pub r: f64,
    pub s0: f64,
    pub stepsize_rule: StepsizeRule,
    pub max_resolve: usize,
    pub sparsity: Sparsity,
    pub outer_iterations: usize,
    pub inner_steps: usize,
    pub eval_every: usize,
    pub pretrain_epochs: usize,
    pub retrain_epochs: usize,
    pub optimizer: OptimizerConfig,
    pub condition_size: usize,
    pub accuracy_threshold: f64,
    pub wall_clock: bool,
    pub output_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub ablate_s0: Vec<f64>,
    pub ablate_m: Vec<f64>,
    pub ablate_r: Vec<f64>,
    pub oracle_instances: usize,
    pub oracle_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let slr = SlrParams::default();
        Self {
            method: MethodKind::Slr,
            model: ModelSpec::Mlp(vec![2, 16, 16, 2]),
            model_id: "mlp-2-16-16-2".to_string(),
            dataset: DatasetKind::TwoMoons,
            n_samples: 512,
            n_test: 512,
            noise: 0.1,
            idx_train_images: None,
            idx_train_labels: None,
            idx_test_images: None,
            idx_test_labels: None,
            seed: 0,
            rho: slr.rho,
            m: slr.m,
            r: slr.r,
            s0: slr.s0,
            stepsize_rule: slr.stepsize_rule,
            max_resolve: slr.max_resolve,
            sparsity: Sparsity::Fractions(vec![0.9]),
            outer_iterations: 50,
            inner_steps: 8,
            eval_every: 10,
            pretrain_epochs: 20,
            retrain_epochs: 5,
            optimizer: OptimizerConfig {
                kind: OptimizerKind::Adam,
                learning_rate: 0.01,
                batch_size: 64,
            },
            condition_size: 0,
            accuracy_threshold: 0.95,
            wall_clock: false,
            output_dir: PathBuf::from("out"),
            checkpoint: None,
            ablate_s0: Vec::new(),
            ablate_m: Vec::new(),
            ablate_r: Vec::new(),
            oracle_instances: 5,
            oracle_iterations: 200,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| invalid(key, format!("cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn check_schedule(key: &str, v: f64) -> Result<()> {
    let (ok, domain) = match key {
        "M" | "ablate_M" => (v > 1.0 && v.is_finite(), "> 1"),
        "r" | "ablate_r" => (v > 0.0 && v < 1.0, "in (0, 1)"),
        _ => (v > 0.0 && v.is_finite(), "> 0"),
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(key, format!("must be {domain} (got {v})")))
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut budget_line = None;
        let mut sparsity_line = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            }
            if let Some(&first) = seen.get(key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                    first,
                });
            }
            seen.insert(key.to_string(), line);
            match key {
                "budget" => budget_line = Some(line),
                "sparsity" => sparsity_line = Some(line),
                _ => {}
            }
            cfg.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line, key },
                other => other,
            })?;
        }
        if let (Some(_), Some(line)) = (sparsity_line, budget_line) {
            return Err(invalid("budget", format!("line {line}: set either sparsity or budget, not both")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text value without cross-field validation.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "method" => {
                self.method = match value {
                    "slr" => MethodKind::Slr,
                    "admm" => MethodKind::Admm,
                    _ => return Err(invalid(key, format!("expected slr or admm, got {value:?}"))),
                }
            }
            "model" => {
                self.model = value.parse().map_err(|e: String| invalid(key, e))?;
                self.model_id = value.to_string();
            }
            "dataset" => {
                self.dataset = match value {
                    "two_moons" => DatasetKind::TwoMoons,
                    "spirals" => DatasetKind::Spirals,
                    "idx_images" => DatasetKind::IdxImages,
                    _ => {
                        return Err(invalid(
                            key,
                            format!("expected two_moons, spirals, or idx_images, got {value:?}"),
                        ))
                    }
                }
            }
            "n_samples" => self.n_samples = parse_value(key, value)?,
            "n_test" => self.n_test = parse_value(key, value)?,
            "noise" => self.noise = parse_value(key, value)?,
            "idx_train_images" => self.idx_train_images = Some(PathBuf::from(value)),
            "idx_train_labels" => self.idx_train_labels = Some(PathBuf::from(value)),
            "idx_test_images" => self.idx_test_images = Some(PathBuf::from(value)),
            "idx_test_labels" => self.idx_test_labels = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_value(key, value)?,
            "rho" => self.rho = parse_value(key, value)?,
            "M" => self.m = parse_value(key, value)?,
            "r" => self.r = parse_value(key, value)?,
            "s0" => self.s0 = parse_value(key, value)?,
            "stepsize_rule" => {
                self.stepsize_rule = match value {
                    "chained" => StepsizeRule::Chained,
                    "printed" => StepsizeRule::Printed,
                    _ => return Err(invalid(key, format!("expected chained or printed, got {value:?}"))),
                }
            }
            "max_resolve" => self.max_resolve = parse_value(key, value)?,
            "sparsity" => self.sparsity = Sparsity::Fractions(parse_list(key, value)?),
            "budget" => self.sparsity = Sparsity::Limits(parse_list(key, value)?),
            "outer_iterations" => self.outer_iterations = parse_value(key, value)?,
            "inner_steps" => self.inner_steps = parse_value(key, value)?,
            "eval_every" => self.eval_every = parse_value(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse_value(key, value)?,
            "retrain_epochs" => self.retrain_epochs = parse_value(key, value)?,
            "optimizer" => {
                self.optimizer.kind = match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(invalid(key, format!("expected adam or sgd, got {value:?}"))),
                }
            }
            "learning_rate" => self.optimizer.learning_rate = parse_value(key, value)?,
            "batch_size" => self.optimizer.batch_size = parse_value(key, value)?,
            "condition_size" => self.condition_size = parse_value(key, value)?,
            "accuracy_threshold" => self.accuracy_threshold = parse_value(key, value)?,
            "wall_clock" => self.wall_clock = parse_bool(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "ablate_s0" => self.ablate_s0 = parse_list(key, value)?,
            "ablate_M" => self.ablate_m = parse_list(key, value)?,
            "ablate_r" => self.ablate_r = parse_list(key, value)?,
            "oracle_instances" => self.oracle_instances = parse_value(key, value)?,
            "oracle_iterations" => self.oracle_iterations = parse_value(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("must be > 0 (got {})", self.rho)));
        }
        let schedule = [
            ("M", std::slice::from_ref(&self.m)),
            ("ablate_M", &self.ablate_m[..]),
            ("r", std::slice::from_ref(&self.r)),
            ("ablate_r", &self.ablate_r[..]),
            ("s0", std::slice::from_ref(&self.s0)),
            ("ablate_s0", &self.ablate_s0[..]),
        ];
        for (key, values) in schedule {
            for &v in values {
                check_schedule(key, v)?;
            }
        }
        match &self.sparsity {
            Sparsity::Fractions(f) => {
                if f.is_empty() {
                    return Err(invalid("sparsity", "needs at least one fraction"));
                }
                if let Some(bad) = f.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(invalid("sparsity", format!("fractions must be in [0, 1] (got {bad})")));
                }
            }
            Sparsity::Limits(l) => {
                if l.is_empty() {
                    return Err(invalid("budget", "needs at least one layer count"));
                }
            }
        }
        if self.synthetic() && self.n_samples < 2 {
            return Err(invalid("n_samples", format!("must be >= 2 (got {})", self.n_samples)));
        }
        if self.synthetic() && self.n_test < 2 {
            return Err(invalid("n_test", format!("must be >= 2 (got {})", self.n_test)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid("noise", format!("must be >= 0 (got {})", self.noise)));
        }
        if self.dataset == DatasetKind::IdxImages {
            for (key, path) in [
                ("idx_train_images", &self.idx_train_images),
                ("idx_train_labels", &self.idx_train_labels),
                ("idx_test_images", &self.idx_test_images),
                ("idx_test_labels", &self.idx_test_labels),
            ] {
                if path.is_none() {
                    return Err(invalid(key, "required when dataset = idx_images"));
                }
            }
        }
        if self.synthetic() {
            let input = match &self.model {
                ModelSpec::Mlp(w) => w[0],
                ModelSpec::ConvMlp { .. } => {
                    return Err(invalid("model", "conv models need dataset = idx_images"))
                }
            };
            if input != 2 {
                return Err(invalid("model", format!("synthetic data has 2 features, model expects {input}")));
            }
        }
        if self.outer_iterations == 0 {
            return Err(invalid("outer_iterations", "must be >= 1"));
        }
        if self.inner_steps == 0 {
            return Err(invalid("inner_steps", "must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every", "must be >= 1"));
        }
        if !(self.optimizer.learning_rate > 0.0 && self.optimizer.learning_rate.is_finite()) {
            return Err(invalid(
                "learning_rate",
                format!("must be > 0 (got {})", self.optimizer.learning_rate),
            ));
        }
        if self.optimizer.batch_size == 0 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.accuracy_threshold) {
            return Err(invalid(
                "accuracy_threshold",
                format!("must be in [0, 1] (got {})", self.accuracy_threshold),
            ));
        }
        if self.oracle_instances == 0 {
            return Err(invalid("oracle_instances", "must be >= 1"));
        }
        Ok(())
    }

    fn synthetic(&self) -> bool {
        self.dataset != DatasetKind::IdxImages
    }

    pub fn slr_params(&self) -> SlrParams {
        SlrParams {
            rho: self.rho,
            m: self.m,
            r: self.r,
            s0: self.s0,
            inner_steps: self.inner_steps,
            max_resolve: self.max_resolve,
            stepsize_rule: self.stepsize_rule,
        }
    }

    pub fn pruning_method(&self) -> Method {
        match self.method {
            MethodKind::Slr => Method::Slr(self.slr_params()),
            MethodKind::Admm => Method::Admm {
                rho: self.rho,
                inner_steps: self.inner_steps,
            },
        }
    }

    /// Fields every method of a fair comparison must share, as text.
    /// Method-specific fields (the SLR schedule) and ablation or output
    /// settings are left out.
    pub fn shared_fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model", self.model_id.clone()),
            ("dataset", format!("{:?}", self.dataset)),
            ("n_samples", self.n_samples.to_string()),
            ("n_test", self.n_test.to_string()),
            ("noise", self.noise.to_string()),
            ("idx_train_images", format!("{:?}", self.idx_train_images)),
            ("idx_train_labels", format!("{:?}", self.idx_train_labels)),
            ("idx_test_images", format!("{:?}", self.idx_test_images)),
            ("idx_test_labels", format!("{:?}", self.idx_test_labels)),
            ("seed", self.seed.to_string()),
            ("rho", self.rho.to_string()),
            ("sparsity", format!("{:?}", self.sparsity)),
            ("outer_iterations", self.outer_iterations.to_string()),
            ("inner_steps", self.inner_steps.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("retrain_epochs", self.retrain_epochs.to_string()),
            ("optimizer", format!("{:?}", self.optimizer)),
            ("condition_size", self.condition_size.to_string()),
            ("accuracy_threshold", self.accuracy_threshold.to_string()),
        ]
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    RunConfig::parse(&text)
}
