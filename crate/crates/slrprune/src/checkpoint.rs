//! JSON checkpoints.
//!
//! Both containers carry `format`, `version`, and `method`. Tensors are
//! stored as `{ "shape": [...], "data": [...] }` with row-major data;
//! floats round-trip exactly.
//!
//! A network checkpoint (`format = "slrprune-network"`) holds one entry per
//! layer: its kind (`dense` or `conv2d` with channel, image, and kernel
//! sizes), activation, weight tensor, and bias tensor.
//!
//! A run checkpoint (`format = "slrprune-run"`) holds `w`, `z`, and
//! `lambda` as tensor lists plus the method state (the full `SlrState` for
//! SLR, penalty and counter for ADMM). Optimizer moments and the position
//! of the mini-batch stream are not saved.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slrprune_core::admm::AdmmState;
use slrprune_core::model::{Activation, LayerKind, LayerSpec, Network};
use slrprune_core::pruner::{Pruner, PrunerState};
use slrprune_core::slr::{SlrState, StepsizeRule};
use slrprune_core::{MultiplierSet, Tensor, WeightSet};

use crate::error::{HarnessError, Result};

pub const NETWORK_FORMAT: &str = "slrprune-network";
pub const RUN_FORMAT: &str = "slrprune-run";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorData {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorData {
    fn from_tensor(t: &Tensor) -> Self {
        Self {
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }

    fn to_tensor(&self) -> slrprune_core::Result<Tensor> {
        Tensor::from_vec(&self.shape, self.data.clone())
    }
}

fn to_list(w: &WeightSet) -> Vec<TensorData> {
    w.layers().iter().map(TensorData::from_tensor).collect()
}

fn from_list(list: &[TensorData]) -> slrprune_core::Result<WeightSet> {
    let layers = list.iter().map(TensorData::to_tensor).collect::<slrprune_core::Result<_>>()?;
    Ok(WeightSet::new(layers))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKindData {
    Dense,
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerData {
    #[serde(flatten)]
    pub kind: LayerKindData,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: String,
    pub weights: TensorData,
    pub bias: TensorData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format: String,
    pub version: u32,
    pub method: String,
    pub layers: Vec<LayerData>,
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Identity => "identity",
        Activation::Softmax => "softmax",
    }
}

fn parse_activation(s: &str) -> Option<Activation> {
    match s {
        "relu" => Some(Activation::Relu),
        "identity" => Some(Activation::Identity),
        "softmax" => Some(Activation::Softmax),
        _ => None,
    }
}

impl NetworkCheckpoint {
    pub fn from_network(net: &Network, method: &str) -> Self {
        let layers = net
            .layers()
            .iter()
            .zip(net.weights().layers())
            .zip(net.biases())
            .map(|((spec, w), b)| LayerData {
                kind: match spec.kind {
                    LayerKind::Dense => LayerKindData::Dense,
                    LayerKind::Conv2d {
                        in_channels,
                        out_channels,
                        height,
                        width,
                        kernel,
                    } => LayerKindData::Conv2d {
                        in_channels,
                        out_channels,
                        height,
                        width,
                        kernel,
                    },
                },
                input_dim: spec.input_dim,
                output_dim: spec.output_dim,
                activation: activation_name(spec.activation).to_string(),
                weights: TensorData::from_tensor(w),
                bias: TensorData::from_tensor(b),
            })
            .collect();
        Self {
            format: NETWORK_FORMAT.to_string(),
            version: VERSION,
            method: method.to_string(),
            layers,
        }
    }

    pub fn to_network(&self) -> std::result::Result<Network, String> {
        check_header(&self.format, self.version, NETWORK_FORMAT)?;
        let mut specs = Vec::new();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let activation = parse_activation(&layer.activation)
                .ok_or_else(|| format!("layer {i}: unknown activation {:?}", layer.activation))?;
            let spec = match layer.kind {
                LayerKindData::Dense => LayerSpec::dense(layer.input_dim, layer.output_dim, activation),
                LayerKindData::Conv2d {
                    in_channels,
                    out_channels,
                    height,
                    width,
                    kernel,
                } => LayerSpec::conv2d(in_channels, out_channels, height, width, kernel, activation),
            };
            if spec.input_dim != layer.input_dim || spec.output_dim != layer.output_dim {
                return Err(format!("layer {i}: stored dimensions do not match its kind"));
            }
            specs.push(spec);
            weights.push(layer.weights.to_tensor().map_err(|e| format!("layer {i}: {e}"))?);
            biases.push(layer.bias.to_tensor().map_err(|e| format!("layer {i}: {e}"))?);
        }
        Network::from_parts(specs, WeightSet::new(weights), biases).map_err(|e| e.to_string())
    }
}

fn check_header(format: &str, version: u32, expected: &str) -> std::result::Result<(), String> {
    if format != expected {
        return Err(format!("format {format:?}, expected {expected:?}"));
    }
    if version != VERSION {
        return Err(format!("unsupported version {version}, expected {VERSION}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlrStateData {
    pub k: u64,
    pub s_prev: f64,
    pub s_prime: f64,
    pub alpha: f64,
    pub rho: f64,
    pub m: f64,
    pub r: f64,
    pub s0: f64,
    pub inner_steps: usize,
    pub max_resolve: usize,
    pub stepsize_rule: String,
    pub violation_prev: f64,
    pub violation_mid: f64,
    pub soc_w_history: Vec<bool>,
    pub soc_z_history: Vec<bool>,
    pub stalled: Vec<u64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodStateData {
    Slr(SlrStateData),
    Admm { k: u64, rho: f64, inner_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub format: String,
    pub version: u32,
    pub method: String,
    pub w: Vec<TensorData>,
    pub z: Vec<TensorData>,
    pub lambda: Vec<TensorData>,
    pub state: MethodStateData,
}

impl RunCheckpoint {
    pub fn from_run(w: &WeightSet, pruner: &Pruner) -> Self {
        let state = match &pruner.state {
            PrunerState::Slr(s) => MethodStateData::Slr(SlrStateData {
                k: s.k,
                s_prev: s.s_prev,
                s_prime: s.s_prime,
                alpha: s.alpha,
                rho: s.rho,
                m: s.m,
                r: s.r,
                s0: s.s0,
                inner_steps: s.inner_steps,
                max_resolve: s.max_resolve,
                stepsize_rule: match s.stepsize_rule {
                    StepsizeRule::Chained => "chained",
                    StepsizeRule::Printed => "printed",
                }
                .to_string(),
                violation_prev: s.violation_prev,
                violation_mid: s.violation_mid,
                soc_w_history: s.soc_w_history.clone(),
                soc_z_history: s.soc_z_history.clone(),
                stalled: s.stalled.clone(),
                converged: s.converged,
            }),
            PrunerState::Admm(s) => MethodStateData::Admm {
                k: s.k,
                rho: s.rho,
                inner_steps: s.inner_steps,
            },
        };
        Self {
            format: RUN_FORMAT.to_string(),
            version: VERSION,
            method: pruner.method_name().to_string(),
            w: to_list(w),
            z: to_list(&pruner.z),
            lambda: to_list(&pruner.multipliers),
            state,
        }
    }

    /// Returns `W` and the restored pruner.
    pub fn to_run(&self) -> std::result::Result<(WeightSet, Pruner), String> {
        check_header(&self.format, self.version, RUN_FORMAT)?;
        let w = from_list(&self.w).map_err(|e| format!("w: {e}"))?;
        let z = from_list(&self.z).map_err(|e| format!("z: {e}"))?;
        let lambda = from_list(&self.lambda).map_err(|e| format!("lambda: {e}"))?;
        w.check_parallel(&z).map_err(|e| format!("z: {e}"))?;
        w.check_parallel(&lambda).map_err(|e| format!("lambda: {e}"))?;
        let state = match &self.state {
            MethodStateData::Slr(s) => PrunerState::Slr(SlrState {
                k: s.k,
                s_prev: s.s_prev,
                s_prime: s.s_prime,
                alpha: s.alpha,
                rho: s.rho,
                m: s.m,
                r: s.r,
                s0: s.s0,
                inner_steps: s.inner_steps,
                max_resolve: s.max_resolve,
                stepsize_rule: match s.stepsize_rule.as_str() {
                    "chained" => StepsizeRule::Chained,
                    "printed" => StepsizeRule::Printed,
                    other => return Err(format!("unknown stepsize rule {other:?}")),
                },
                violation_prev: s.violation_prev,
                violation_mid: s.violation_mid,
                soc_w_history: s.soc_w_history.clone(),
                soc_z_history: s.soc_z_history.clone(),
                stalled: s.stalled.clone(),
                converged: s.converged,
            }),
            MethodStateData::Admm { k, rho, inner_steps } => {
                let mut s = AdmmState::new(*rho, *inner_steps).map_err(|e| e.to_string())?;
                s.k = *k;
                PrunerState::Admm(s)
            }
        };
        let expected = match state {
            PrunerState::Slr(_) => "slr",
            PrunerState::Admm(_) => "admm",
        };
        if self.method != expected {
            return Err(format!("method tag {:?} does not match {expected} state", self.method));
        }
        Ok((
            w,
            Pruner {
                z,
                multipliers: MultiplierSet(lambda),
                state,
            },
        ))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn save_network(path: &Path, net: &Network, method: &str) -> Result<()> {
    write_json(path, &NetworkCheckpoint::from_network(net, method))
}

/// Returns the network and its method tag.
pub fn load_network(path: &Path) -> Result<(Network, String)> {
    let ckpt: NetworkCheckpoint = read_json(path)?;
    let net = ckpt.to_network().map_err(|message| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        message,
    })?;
    Ok((net, ckpt.method))
}

pub fn save_run(path: &Path, w: &WeightSet, pruner: &Pruner) -> Result<()> {
    write_json(path, &RunCheckpoint::from_run(w, pruner))
}

pub fn load_run(path: &Path) -> Result<(WeightSet, Pruner)> {
    let ckpt: RunCheckpoint = read_json(path)?;
    ckpt.to_run().map_err(|message| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}
