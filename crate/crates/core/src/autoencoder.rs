//! One layer of the semisupervised auto-encoder.
//!
//! For a batch of `n_b` rows the layer computes
//!
//! ```text
//! Z2 = X·W1ᵀ + 1·b1ᵀ    H = tanh(Z2)
//! Z3 = H·W2ᵀ + 1·b2ᵀ    X̂ = tanh(Z3)
//! ```
//!
//! and minimizes `J1 + α·Tr(HᵀLH)/n_b + λ·J4` where
//! `J1 = ‖(X̂ − T) ⊙ P‖²_F / 2n_b`, `L = L⁺ − γ·L⁻` restricted to the batch and
//! `J4 = (‖W1‖²_F + ‖W2‖²_F) / 2`. Gradients are derived by hand; the error
//! terms are
//!
//! ```text
//! δ3 = (X̂ − T) ⊙ P ⊙ P ⊙ f′(Z3)
//! δ2 = (δ3·W2 + α·(L + Lᵀ)·H) ⊙ f′(Z2)
//! ```
//!
//! with `∂/∂W1 = δ2ᵀX/n_b + λW1`, `∂/∂W2 = δ3ᵀH/n_b + λW2` and bias
//! gradients equal to the column means of `δ2` and `δ3`.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::sparse::CsrMatrix;

/// `tanh`, which saturates cleanly for large `|x|`.
pub fn activation(x: f64) -> f64 {
    x.tanh()
}

pub fn activation_deriv(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// Encoder and decoder parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `d(k) × d(k−1)`
    pub w1: Array2<f64>,
    /// `d(k−1) × d(k)`
    pub w2: Array2<f64>,
    pub b1: Array1<f64>,
    pub b2: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(dim_in: usize, dim_hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((dim_hidden, dim_in)),
            w2: Array2::zeros((dim_in, dim_hidden)),
            b1: Array1::zeros(dim_hidden),
            b2: Array1::zeros(dim_in),
        }
    }

    /// Uniform weights in `±√(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(dim_in: usize, dim_hidden: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (dim_in + dim_hidden) as f64).sqrt();
        let mut sample =
            |shape: (usize, usize)| Array2::from_shape_simple_fn(shape, || rng.random_range(-limit..limit));
        let w1 = sample((dim_hidden, dim_in));
        let w2 = sample((dim_in, dim_hidden));
        Self {
            w1,
            w2,
            b1: Array1::zeros(dim_hidden),
            b2: Array1::zeros(dim_in),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.w1.ncols()
    }

    pub fn dim_hidden(&self) -> usize {
        self.w1.nrows()
    }

    fn check_shapes(&self) -> Result<()> {
        let (h, i) = (self.dim_hidden(), self.dim_in());
        if self.w2.dim() != (i, h) || self.b1.len() != h || self.b2.len() != i {
            return Err(Error::ShapeMismatch(format!(
                "inconsistent layer parameters: w1 {:?}, w2 {:?}, b1 {}, b2 {}",
                self.w1.dim(),
                self.w2.dim(),
                self.b1.len(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.w2].iter().all(|m| m.iter().all(|v| v.is_finite()))
            && [&self.b1, &self.b2].iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Encoder only: `tanh(X·W1ᵀ + b1)`.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(forward(self, x)?.h)
    }

    /// Decoder only: `tanh(H·W2ᵀ + b2)`.
    pub fn decode(&self, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        if h.ncols() != self.dim_hidden() {
            return Err(Error::ShapeMismatch(format!(
                "decoder expects {} columns, got {}",
                self.dim_hidden(),
                h.ncols()
            )));
        }
        Ok((h.dot(&self.w2.t()) + &self.b2).mapv(activation))
    }
}

/// Hyperparameters of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub dim_in: usize,
    pub dim_hidden: usize,
    /// Pairwise-constraint weight.
    pub alpha: f64,
    /// Negative-link ratio for the penalty and the cannot-link term.
    pub gamma: f64,
    /// L2 weight.
    pub lambda: f64,
    /// Learning rate.
    pub eta: f64,
    /// Observed-entry penalty, first layer only.
    pub beta: f64,
    pub batch_size: usize,
    pub max_iters: usize,
    /// Relative loss change below which training stops early.
    pub tol: f64,
    pub seed: u64,
    pub is_first_layer: bool,
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dim_in == 0 || self.dim_hidden == 0 {
            return bad(format!(
                "layer dims must be positive: {}→{}",
                self.dim_in, self.dim_hidden
            ));
        }
        if !(self.alpha >= 0.0) || !(self.lambda >= 0.0) {
            return bad(format!(
                "alpha and lambda must be >= 0 (alpha {}, lambda {})",
                self.alpha, self.lambda
            ));
        }
        if !(self.gamma >= 1.0) || !(self.beta >= 1.0) {
            return bad(format!(
                "gamma and beta must be >= 1 (gamma {}, beta {})",
                self.gamma, self.beta
            ));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.eta));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be >= 0, got {}", self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z2: Array2<f64>,
    pub h: Array2<f64>,
    pub z3: Array2<f64>,
    pub xhat: Array2<f64>,
}

pub fn forward(params: &LayerParams, x: ArrayView2<f64>) -> Result<ForwardCache> {
    params.check_shapes()?;
    if x.ncols() != params.dim_in() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, layer expects {}",
            x.ncols(),
            params.dim_in()
        )));
    }
    let z2 = x.dot(&params.w1.t()) + &params.b1;
    let h = z2.mapv(activation);
    let z3 = h.dot(&params.w2.t()) + &params.b2;
    let xhat = z3.mapv(activation);
    Ok(ForwardCache { z2, h, z3, xhat })
}

/// Everything the loss needs about one batch of rows.
///
/// `lplus` and `lminus` are the batch-restricted Laplacians (rows/columns in
/// batch order). `penalty` is `None` for deep layers, meaning `P ≡ 1`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub targets: Array2<f64>,
    pub penalty: Option<Array2<f64>>,
    pub lplus: CsrMatrix,
    pub lminus: CsrMatrix,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    fn check(&self, params: &LayerParams) -> Result<()> {
        let n = self.rows();
        let dims_ok = self.targets.dim() == (n, params.dim_in())
            && self.penalty.as_ref().is_none_or(|p| p.dim() == (n, params.dim_in()))
            && self.lplus.n() == n
            && self.lminus.n() == n;
        if !dims_ok {
            return Err(Error::ShapeMismatch(format!(
                "batch of {n} rows: targets {:?}, penalty {:?}, laplacians {} / {}",
                self.targets.dim(),
                self.penalty.as_ref().map(|p| p.dim()),
                self.lplus.n(),
                self.lminus.n()
            )));
        }
        Ok(())
    }

    /// `L = L⁺ − γ·L⁻`.
    pub fn laplacian(&self, gamma: f64) -> CsrMatrix {
        self.lplus.add_scaled(&self.lminus, -gamma)
    }
}

/// The loss split into its terms. `pairwise` is `Tr(HᵀLH)/n_b` before
/// weighting by `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub reconstruction: f64,
    pub pairwise: f64,
    pub regularization: f64,
}

impl LossTerms {
    fn scaled_sum(terms: &[(LossTerms, f64)]) -> LossTerms {
        let weight: f64 = terms.iter().map(|t| t.1).sum();
        let avg = |f: fn(&LossTerms) -> f64| terms.iter().map(|(t, w)| f(t) * w).sum::<f64>() / weight;
        LossTerms {
            total: avg(|t| t.total),
            reconstruction: avg(|t| t.reconstruction),
            pairwise: avg(|t| t.pairwise),
            regularization: avg(|t| t.regularization),
        }
    }
}

pub fn loss(params: &LayerParams, batch: &Batch, cfg: &LayerConfig) -> Result<LossTerms> {
    let cache = forward(params, batch.x.view())?;
    loss_from_cache(&cache, batch, params, cfg)
}

pub fn loss_from_cache(
    cache: &ForwardCache,
    batch: &Batch,
    params: &LayerParams,
    cfg: &LayerConfig,
) -> Result<LossTerms> {
    batch.check(params)?;
    let nb = batch.rows() as f64;
    let mut residual = &cache.xhat - &batch.targets;
    if let Some(p) = &batch.penalty {
        residual *= p;
    }
    let reconstruction = residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * nb);

    let lh = batch.laplacian(cfg.gamma).mul_dense(cache.h.view());
    let pairwise = (&cache.h * &lh).sum() / nb;

    let regularization = 0.5 * (frobenius_sq(&params.w1) + frobenius_sq(&params.w2));
    Ok(LossTerms {
        total: reconstruction + cfg.alpha * pairwise + cfg.lambda * regularization,
        reconstruction,
        pairwise,
        regularization,
    })
}

fn frobenius_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b1: Array1<f64>,
    pub b2: Array1<f64>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.w2)
            .chain(&self.b1)
            .chain(&self.b2)
            .all(|v| v.is_finite())
    }
}

pub fn gradients(cache: &ForwardCache, batch: &Batch, params: &LayerParams, cfg: &LayerConfig) -> Result<Gradients> {
    batch.check(params)?;
    if cache.h.dim() != (batch.rows(), params.dim_hidden()) {
        return Err(Error::ShapeMismatch("forward cache does not match the batch".into()));
    }
    let nb = batch.rows() as f64;

    // δ3 = (X̂ − T) ⊙ P ⊙ P ⊙ f′(Z3), with f′(Z3) = 1 − X̂²
    let mut delta3 = &cache.xhat - &batch.targets;
    if let Some(p) = &batch.penalty {
        Zip::from(&mut delta3).and(p).for_each(|d, &p| *d *= p * p);
    }
    Zip::from(&mut delta3)
        .and(&cache.xhat)
        .for_each(|d, &y| *d *= 1.0 - y * y);

    // δ2 = (δ3·W2 + α(L + Lᵀ)H) ⊙ f′(Z2)
    let lap = batch.laplacian(cfg.gamma);
    let lap_sym = lap.add_scaled(&transpose(&lap), 1.0);
    let mut delta2 = delta3.dot(&params.w2);
    if cfg.alpha != 0.0 {
        delta2.scaled_add(cfg.alpha, &lap_sym.mul_dense(cache.h.view()));
    }
    Zip::from(&mut delta2).and(&cache.h).for_each(|d, &h| *d *= 1.0 - h * h);

    let w1 = delta2.t().dot(&batch.x) / nb + &params.w1 * cfg.lambda;
    let w2 = delta3.t().dot(&cache.h) / nb + &params.w2 * cfg.lambda;
    let b1 = delta2.mean_axis(Axis(0)).expect("nonempty batch");
    let b2 = delta3.mean_axis(Axis(0)).expect("nonempty batch");
    Ok(Gradients { w1, w2, b1, b2 })
}

fn transpose(m: &CsrMatrix) -> CsrMatrix {
    CsrMatrix::from_triplets(m.n(), m.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect())
}

/// Plain gradient descent update `θ ← θ − η·∂J/∂θ`.
pub fn sgd_step(params: &mut LayerParams, grads: &Gradients, eta: f64) -> Result<()> {
    for (name, ok) in [
        ("w1", grads.w1.iter().all(|v| v.is_finite())),
        ("w2", grads.w2.iter().all(|v| v.is_finite())),
        ("b1", grads.b1.iter().all(|v| v.is_finite())),
        ("b2", grads.b2.iter().all(|v| v.is_finite())),
    ] {
        if !ok {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    params.w1.scaled_add(-eta, &grads.w1);
    params.w2.scaled_add(-eta, &grads.w2);
    params.b1.scaled_add(-eta, &grads.b1);
    params.b2.scaled_add(-eta, &grads.b2);
    Ok(())
}

/// Training data of a layer: the first layer reconstructs adjacency rows
/// (with the penalty), deeper layers reconstruct their dense input.
#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    Adjacency(&'a SignedGraph),
    Dense(ArrayView2<'a, f64>),
}

impl LayerInput<'_> {
    pub fn rows(&self) -> usize {
        match self {
            LayerInput::Adjacency(g) => g.n(),
            LayerInput::Dense(x) => x.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LayerInput::Adjacency(g) => g.n(),
            LayerInput::Dense(x) => x.ncols(),
        }
    }

    fn select(&self, rows: &[usize]) -> Array2<f64> {
        match self {
            LayerInput::Adjacency(g) => g.adjacency_rows(rows),
            LayerInput::Dense(x) => x.select(Axis(0), rows),
        }
    }
}

/// Assembles the batch for `rows`. The penalty is attached only for
/// adjacency input.
pub fn make_batch(
    input: LayerInput<'_>,
    lplus: &CsrMatrix,
    lminus: &CsrMatrix,
    rows: &[usize],
    cfg: &LayerConfig,
) -> Batch {
    let x = input.select(rows);
    let penalty = match input {
        LayerInput::Adjacency(g) => Some(g.penalty_rows(rows, cfg.beta, cfg.gamma)),
        LayerInput::Dense(_) => None,
    };
    Batch {
        targets: x.clone(),
        x,
        penalty,
        lplus: lplus.restrict_laplacian(rows),
        lminus: lminus.restrict_laplacian(rows),
    }
}

#[derive(Debug, Clone)]
pub struct LayerTraining {
    pub params: LayerParams,
    /// Hidden representation of every row under the final parameters.
    pub hidden: Array2<f64>,
    /// Row-weighted mean of the batch losses of each epoch, evaluated
    /// before the corresponding updates.
    pub trace: Vec<LossTerms>,
}

/// Mini-batch SGD on one layer, starting from Glorot-initialized weights
/// drawn from `cfg.seed`.
pub fn train_layer(
    input: LayerInput<'_>,
    lplus: &CsrMatrix,
    lminus: &CsrMatrix,
    cfg: &LayerConfig,
) -> Result<LayerTraining> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = LayerParams::glorot(cfg.dim_in, cfg.dim_hidden, &mut rng);
    train_layer_from(input, lplus, lminus, cfg, init, &mut rng)
}

/// As [`train_layer`] but from explicit initial parameters; `rng` drives
/// the batch shuffling.
pub fn train_layer_from(
    input: LayerInput<'_>,
    lplus: &CsrMatrix,
    lminus: &CsrMatrix,
    cfg: &LayerConfig,
    init: LayerParams,
    rng: &mut impl Rng,
) -> Result<LayerTraining> {
    cfg.validate()?;
    let n = input.rows();
    if input.cols() != cfg.dim_in || init.dim_in() != cfg.dim_in || init.dim_hidden() != cfg.dim_hidden {
        return Err(Error::ShapeMismatch(format!(
            "layer configured {}→{}, input has {} columns, parameters are {}→{}",
            cfg.dim_in,
            cfg.dim_hidden,
            input.cols(),
            init.dim_in(),
            init.dim_hidden()
        )));
    }
    if lplus.n() != n || lminus.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "laplacians are {}×{} / {}×{} for {n} rows",
            lplus.n(),
            lplus.n(),
            lminus.n(),
            lminus.n()
        )));
    }

    let mut params = init;
    let mut trace: Vec<LossTerms> = Vec::with_capacity(cfg.max_iters);
    let mut order: Vec<usize> = (0..n).collect();
    let full_batch = cfg.batch_size >= n;
    // The full batch never changes, so it is assembled once.
    let fixed = full_batch.then(|| make_batch(input, lplus, lminus, &order, cfg));

    for epoch in 0..cfg.max_iters {
        if !full_batch {
            order.shuffle(rng);
        }
        let mut parts = Vec::new();
        for rows in order.chunks(cfg.batch_size) {
            let owned;
            let batch = match &fixed {
                Some(b) => b,
                None => {
                    owned = make_batch(input, lplus, lminus, rows, cfg);
                    &owned
                }
            };
            let cache = forward(&params, batch.x.view())?;
            let terms = loss_from_cache(&cache, batch, &params, cfg)?;
            if !terms.total.is_finite() {
                return Err(Error::Divergence { layer: 0, epoch });
            }
            let grads = gradients(&cache, batch, &params, cfg)?;
            sgd_step(&mut params, &grads, cfg.eta).map_err(|_| Error::Divergence { layer: 0, epoch })?;
            parts.push((terms, rows.len() as f64));
        }
        let epoch_terms = LossTerms::scaled_sum(&parts);
        let previous = trace.last().map(|t| t.total);
        trace.push(epoch_terms);
        if let Some(prev) = previous {
            let change = (epoch_terms.total - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if change < cfg.tol {
                break;
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Divergence {
            layer: 0,
            epoch: trace.len(),
        });
    }

    let hidden = encode_all(&params, input)?;
    Ok(LayerTraining { params, hidden, trace })
}

/// Encodes every row of `input`, in chunks to bound memory on wide inputs.
pub fn encode_all(params: &LayerParams, input: LayerInput<'_>) -> Result<Array2<f64>> {
    const CHUNK: usize = 1024;
    let n = input.rows();
    let mut hidden = Array2::zeros((n, params.dim_hidden()));
    let all: Vec<usize> = (0..n).collect();
    for rows in all.chunks(CHUNK) {
        let h = params.encode(input.select(rows).view())?;
        hidden
            .slice_mut(ndarray::s![rows[0]..rows[0] + rows.len(), ..])
            .assign(&h);
    }
    Ok(hidden)
}

/// Writes `epoch,total,J1,pairwise,J4` rows.
pub fn write_loss_trace(trace: &[LossTerms], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "epoch,total,J1,pairwise,J4")?;
    for (epoch, t) in trace.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            epoch, t.total, t.reconstruction, t.pairwise, t.regularization
        )?;
    }
    Ok(())
}
