//! Greedy layer-wise training of the stacked auto-encoder.
//!
//! Layer 1 reconstructs adjacency rows under the penalty matrix with
//! `L = L⁺ − γ₁L⁻`; every deeper layer reconstructs the previous hidden
//! representation with no penalty and `γ = 1`. The Laplacians always come
//! from the input graph. The deepest hidden representation is the node
//! embedding.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{train_layer, LayerConfig, LayerInput, LayerParams, LossTerms};
use crate::error::{Error, Result};
use crate::graph::{build_matrices, default_gamma, SignedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskPreset {
    LinkPrediction,
    CommunityDetection,
}

impl FromStr for TaskPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "link" | "link_prediction" => Ok(TaskPreset::LinkPrediction),
            "community" | "community_detection" => Ok(TaskPreset::CommunityDetection),
            other => Err(Error::InvalidConfig(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for TaskPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskPreset::LinkPrediction => "link",
            TaskPreset::CommunityDetection => "community",
        })
    }
}

/// Named hyperparameter profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetProfile {
    Wiki,
    Slashdot,
    Epinions,
}

impl FromStr for DatasetProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wiki" => Ok(DatasetProfile::Wiki),
            "slashdot" => Ok(DatasetProfile::Slashdot),
            "epinions" => Ok(DatasetProfile::Epinions),
            _ => Err(Error::UnknownProfile(s.to_owned())),
        }
    }
}

/// Per-layer optimization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerHyper {
    pub alpha: f64,
    pub lambda: f64,
    pub eta: f64,
    pub batch_size: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    /// `[n, d(1), …, d(l)]`
    pub layer_dims: Vec<usize>,
    /// One entry per layer.
    pub layers: Vec<LayerHyper>,
    pub beta: f64,
    /// `γ₁`; `None` means [`default_gamma`] of the training graph.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub task: TaskPreset,
}

/// Embedding dimensionality used throughout the presets.
pub const DEFAULT_DIM: usize = 64;

impl StackConfig {
    /// The hyperparameters reported for the three benchmark datasets.
    pub fn preset_defaults(profile: DatasetProfile, task: TaskPreset, n: usize) -> Self {
        use DatasetProfile::*;
        let (alpha1, alpha_k_link, beta, lambda_k) = match profile {
            Wiki => (16.0, 0.4, 25.0, 0.25),
            Slashdot => (14.0, 0.2, 25.0, 0.1),
            Epinions => (10.0, 0.2, 10.0, 0.1),
        };
        let (hidden, batch1, batch_k, alpha_k): (&[usize], usize, usize, f64) = match task {
            TaskPreset::LinkPrediction => (&[256, 64], 500, 100, alpha_k_link),
            TaskPreset::CommunityDetection => (&[512, 256, 128, 64], 1000, 1000, 1.5),
        };
        let mut layer_dims = vec![n];
        layer_dims.extend_from_slice(hidden);
        let layers = (0..hidden.len())
            .map(|k| {
                if k == 0 {
                    LayerHyper {
                        alpha: alpha1,
                        lambda: 0.05,
                        eta: 0.025,
                        batch_size: batch1,
                        max_iters: 80,
                    }
                } else {
                    LayerHyper {
                        alpha: alpha_k,
                        lambda: lambda_k,
                        eta: 0.015,
                        batch_size: batch_k,
                        max_iters: 20,
                    }
                }
            })
            .collect();
        Self {
            layer_dims,
            layers,
            beta,
            gamma: None,
            tol: 1e-6,
            seed: 0,
            task,
        }
    }

    /// Number of auto-encoder layers `l`.
    pub fn depth(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_dims.last().unwrap_or(&0)
    }

    /// Replaces the hidden dimensions, reusing the deepest layer's settings
    /// for any layers added.
    pub fn with_hidden_dims(mut self, hidden: &[usize]) -> Self {
        let n = self.layer_dims[0];
        self.layer_dims = std::iter::once(n).chain(hidden.iter().copied()).collect();
        let template = *self.layers.last().expect("at least one layer");
        self.layers.resize(hidden.len(), template);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth() == 0 {
            return Err(Error::InvalidConfig("a stack needs at least one layer".into()));
        }
        if self.layers.len() != self.depth() {
            return Err(Error::InvalidConfig(format!(
                "{} layer settings for {} layers",
                self.layers.len(),
                self.depth()
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("zero dimension in {:?}", self.layer_dims)));
        }
        if let Some(g) = self.gamma {
            if !(g >= 1.0) {
                return Err(Error::InvalidConfig(format!("gamma must be >= 1, got {g}")));
            }
        }
        for k in 0..self.depth() {
            self.layer_config(k, 1.0).validate()?;
        }
        Ok(())
    }

    /// Resolved settings of layer `k` (0-based) given `γ₁`.
    pub fn layer_config(&self, k: usize, gamma1: f64) -> LayerConfig {
        let h = self.layers[k];
        let first = k == 0;
        LayerConfig {
            dim_in: self.layer_dims[k],
            dim_hidden: self.layer_dims[k + 1],
            alpha: h.alpha,
            gamma: if first { gamma1 } else { 1.0 },
            lambda: h.lambda,
            eta: h.eta,
            beta: if first { self.beta } else { 1.0 },
            batch_size: h.batch_size,
            max_iters: h.max_iters,
            tol: self.tol,
            seed: layer_seed(self.seed, k),
            is_first_layer: first,
        }
    }
}

/// Seed of layer `k`, derived from the master seed by a counter so that
/// adding layers leaves earlier layers untouched.
pub fn layer_seed(master: u64, k: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hidden sizes for an `l`-layer stack ending at `d`: `[d]`, `[4d, d]`,
/// `[8d, 4d, d]`, … capped at `n`.
pub fn layer_ladder(n: usize, d: usize, l: usize) -> Vec<usize> {
    let mut dims: Vec<usize> = (0..l)
        .map(|k| {
            let from_end = l - 1 - k;
            if from_end == 0 {
                d
            } else {
                (4 * d) << (from_end - 1)
            }
        })
        .collect();
    for v in &mut dims {
        *v = (*v).min(n).max(1);
    }
    dims
}

#[derive(Debug, Clone)]
pub struct TrainedStack {
    /// Configuration with `γ₁` resolved.
    pub config: StackConfig,
    pub gamma1: f64,
    pub layers: Vec<LayerParams>,
    pub traces: Vec<Vec<LossTerms>>,
    /// `H^(k)` for every layer; the last one is the embedding.
    pub hidden: Vec<Array2<f64>>,
}

impl TrainedStack {
    pub fn embeddings(&self) -> &Array2<f64> {
        self.hidden.last().expect("trained stacks have at least one layer")
    }
}

pub fn train_stack(g: &SignedGraph, cfg: &StackConfig) -> Result<TrainedStack> {
    cfg.validate()?;
    if g.n() == 0 {
        return Err(Error::InvalidConfig("graph has no nodes".into()));
    }
    if cfg.layer_dims[0] != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "stack input dimension {} but graph has {} nodes",
            cfg.layer_dims[0],
            g.n()
        )));
    }
    let gamma1 = match cfg.gamma {
        Some(v) => v,
        None => default_gamma(g)? as f64,
    };
    let m = build_matrices(g, cfg.beta, gamma1)?;

    let mut layers = Vec::with_capacity(cfg.depth());
    let mut traces = Vec::with_capacity(cfg.depth());
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(cfg.depth());
    for k in 0..cfg.depth() {
        let layer_cfg = cfg.layer_config(k, gamma1);
        let input = match hidden.last() {
            None => LayerInput::Adjacency(g),
            Some(h) => LayerInput::Dense(h.view()),
        };
        let out = train_layer(input, &m.lplus, &m.lminus, &layer_cfg).map_err(|e| match e {
            Error::Divergence { epoch, .. } => Error::Divergence { layer: k + 1, epoch },
            other => other,
        })?;
        log::debug!(
            "layer {}: {} epochs, final loss {:?}",
            k + 1,
            out.trace.len(),
            out.trace.last().map(|t| t.total)
        );
        layers.push(out.params);
        traces.push(out.trace);
        hidden.push(out.hidden);
    }

    let mut config = cfg.clone();
    config.gamma = Some(gamma1);
    Ok(TrainedStack {
        config,
        gamma1,
        layers,
        traces,
        hidden,
    })
}

/// Decodes the embedding back through every layer, deepest first. For
/// inspection only: the decoders were never trained as a chain.
pub fn reconstruct_through_stack(stack: &TrainedStack) -> Result<Array2<f64>> {
    let mut x = stack.embeddings().clone();
    for layer in stack.layers.iter().rev() {
        x = layer.decode(x.view())?;
    }
    Ok(x)
}
