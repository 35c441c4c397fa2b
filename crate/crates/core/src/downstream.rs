//! Downstream tasks on node embeddings: link sign prediction with logistic
//! regression over edge features, and signed community detection with
//! k-means scored by the error rate.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{split_edges, Edge, SignedGraph};
use crate::spectral::{spectral_embed, SpectralMethod};
use crate::stack::{layer_seed, train_stack, StackConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeOperator {
    L1,
    L2,
    Had,
    Avg,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 4] = [EdgeOperator::L1, EdgeOperator::L2, EdgeOperator::Had, EdgeOperator::Avg];

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            EdgeOperator::L1 => (a - b).abs(),
            EdgeOperator::L2 => (a - b) * (a - b),
            EdgeOperator::Had => a * b,
            EdgeOperator::Avg => 0.5 * (a + b),
        }
    }
}

impl FromStr for EdgeOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(EdgeOperator::L1),
            "l2" => Ok(EdgeOperator::L2),
            "had" | "hadamard" => Ok(EdgeOperator::Had),
            "avg" | "average" => Ok(EdgeOperator::Avg),
            _ => Err(Error::InvalidConfig(format!("unknown edge operator {s:?}"))),
        }
    }
}

impl fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeOperator::L1 => "L1",
            EdgeOperator::L2 => "L2",
            EdgeOperator::Had => "Had",
            EdgeOperator::Avg => "Avg",
        })
    }
}

pub fn edge_feature(hi: ArrayView1<f64>, hj: ArrayView1<f64>, op: EdgeOperator) -> Result<Array1<f64>> {
    if hi.len() != hj.len() {
        return Err(Error::ShapeMismatch(format!(
            "vectors of length {} and {}",
            hi.len(),
            hj.len()
        )));
    }
    Ok(hi.iter().zip(hj.iter()).map(|(&a, &b)| op.apply(a, b)).collect())
}

/// One feature row per edge.
pub fn edge_features(h: &Array2<f64>, edges: &[Edge], op: EdgeOperator) -> Array2<f64> {
    let mut out = Array2::zeros((edges.len(), h.ncols()));
    for (mut row, e) in out.rows_mut().into_iter().zip(edges) {
        for ((o, &a), &b) in row.iter_mut().zip(h.row(e.i)).zip(h.row(e.j)) {
            *o = op.apply(a, b);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub lr: f64,
    pub iters: usize,
    pub l2: f64,
    /// Standardize features with the training mean and deviation.
    pub standardize: bool,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            lr: 0.1,
            iters: 500,
            l2: 1e-4,
            standardize: false,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss plus `l2/2·‖w‖²` (bias unregularized) and its gradient
/// `(∂/∂w, ∂/∂b)`. `y` holds 1 for the positive class and 0 otherwise.
pub fn logistic_loss_grad(
    w: ArrayView1<f64>,
    b: f64,
    x: ArrayView2<f64>,
    y: &[f64],
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let z = x.dot(&w) + b;
    let mut loss = 0.0;
    let mut residual = Array1::zeros(x.nrows());
    for (k, (&zk, &yk)) in z.iter().zip(y).enumerate() {
        // log(1 + e^z) − y·z, computed stably
        let softplus = if zk > 0.0 {
            zk + (-zk).exp().ln_1p()
        } else {
            zk.exp().ln_1p()
        };
        loss += softplus - yk * zk;
        residual[k] = sigmoid(zk) - yk;
    }
    loss = loss / n + 0.5 * l2 * w.dot(&w);
    let gw = x.t().dot(&residual) / n + &w * l2;
    let gb = residual.sum() / n;
    (loss, gw, gb)
}

/// Logistic model whose positive class is the negative link sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignClassifier {
    pub weights: Array1<f64>,
    pub bias: f64,
    /// Per-feature `(mean, std)` when standardizing.
    pub scaling: Option<(Array1<f64>, Array1<f64>)>,
}

impl SignClassifier {
    fn prepare(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match &self.scaling {
            Some((mean, std)) => (&x - mean) / std,
            None => x.to_owned(),
        }
    }

    /// Probability of a negative sign for each row.
    pub fn predict_negative(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let z = self.prepare(x).dot(&self.weights) + self.bias;
        z.iter().map(|&v| sigmoid(v)).collect()
    }

    /// Predicted signs (−1 when the negative-class probability exceeds ½).
    pub fn predict_sign(&self, x: ArrayView2<f64>) -> Vec<i8> {
        self.predict_negative(x)
            .into_iter()
            .map(|p| if p > 0.5 { -1 } else { 1 })
            .collect()
    }
}

/// Full-batch gradient descent from zero weights. `signs` are the ±1 link
/// signs of the rows.
pub fn train_sign_classifier(x: ArrayView2<f64>, signs: &[i8], opts: &LogisticOptions) -> Result<SignClassifier> {
    if x.nrows() != signs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows for {} labels",
            x.nrows(),
            signs.len()
        )));
    }
    let y: Vec<f64> = signs.iter().map(|&s| if s < 0 { 1.0 } else { 0.0 }).collect();
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let scaling = opts.standardize.then(|| {
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        (mean, std)
    });
    let mut clf = SignClassifier {
        weights: Array1::zeros(x.ncols()),
        bias: 0.0,
        scaling,
    };
    let xs = clf.prepare(x);
    for _ in 0..opts.iters {
        let (_, gw, gb) = logistic_loss_grad(clf.weights.view(), clf.bias, xs.view(), &y, opts.l2);
        clf.weights.scaled_add(-opts.lr, &gw);
        clf.bias -= opts.lr * gb;
    }
    if !clf.weights.iter().all(|v| v.is_finite()) || !clf.bias.is_finite() {
        return Err(Error::Convergence("logistic regression diverged".into()));
    }
    Ok(clf)
}

fn check_classes(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by descending score, grouped into runs of equal score.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve: the probability that a random positive item
/// (`labels[k] == true`) scores above a random negative one, ties counting ½.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_classes(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut negatives_below = neg as f64;
    let mut wins = 0.0;
    for group in tie_groups(scores) {
        let p = group.iter().filter(|&&i| labels[i]).count() as f64;
        let q = group.len() as f64 - p;
        negatives_below -= q;
        wins += p * (negatives_below + 0.5 * q);
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Average precision of the items with `labels[k] == true`, ranked by
/// descending score. Tied scores enter together as one threshold; without
/// ties this is the mean of precision@rank over the relevant items.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_classes(scores, labels)?;
    if pos == 0 {
        return Err(Error::NoNegativeExamples);
    }
    let (mut seen, mut hits, mut ap) = (0usize, 0usize, 0.0);
    for group in tie_groups(scores) {
        let new_hits = group.iter().filter(|&&i| labels[i]).count();
        seen += group.len();
        hits += new_hits;
        ap += new_hits as f64 * hits as f64 / seen as f64;
    }
    Ok(ap / pos as f64)
}

/// AP of the negative links, given each edge's probability of being negative.
pub fn average_precision_negative(prob_negative: &[f64], signs: &[i8]) -> Result<f64> {
    let labels: Vec<bool> = signs.iter().map(|&s| s < 0).collect();
    average_precision(prob_negative, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    /// WCSS after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
    /// Clusters left empty at the end (always empty unless `k` exceeds the
    /// number of distinct points).
    pub empty: Vec<usize>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(h: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = h.nrows();
    let mut centroids = Array2::zeros((k, h.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&h.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(h.row(i), h.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&h.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(h.row(i), h.row(pick)));
        }
    }
    centroids
}

fn assign(h: &Array2<f64>, centroids: &Array2<f64>, labels: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let (best, d) = (0..centroids.nrows())
            .map(|c| (c, sq_dist(h.row(i), centroids.row(c))))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        *label = best;
        wcss += d;
    }
    wcss
}

fn wcss_of(h: &Array2<f64>, centroids: &Array2<f64>, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(h.row(i), centroids.row(c)))
        .sum()
}

/// Recomputes centroids; an empty cluster takes the point farthest from its
/// current centroid. Returns the clusters that stayed empty.
fn update(h: &Array2<f64>, centroids: &mut Array2<f64>, labels: &mut [usize]) -> Vec<usize> {
    let k = centroids.nrows();
    let mut still_empty = Vec::new();
    for c in 0..k {
        if labels.contains(&c) {
            continue;
        }
        // farthest point among clusters that keep at least one other member
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let far = (0..h.nrows())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (i, sq_dist(h.row(i), centroids.row(labels[i]))))
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        match far {
            Some((i, _)) => labels[i] = c,
            None => still_empty.push(c),
        }
    }
    let mut sums = Array2::<f64>::zeros(centroids.dim());
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        sums.row_mut(c).scaled_add(1.0, &h.row(i));
        counts[c] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            centroids.row_mut(c).assign(&(&sums.row(c) / count as f64));
        }
    }
    still_empty
}

fn lloyd(h: &Array2<f64>, k: usize, max_iters: usize, seed: u64) -> ClusterAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(h, k, &mut rng);
    let mut labels = vec![usize::MAX; h.nrows()];
    let mut history = Vec::new();
    let mut empty = Vec::new();
    for _ in 0..max_iters.max(1) {
        let before = labels.clone();
        assign(h, &centroids, &mut labels);
        empty = update(h, &mut centroids, &mut labels);
        history.push(wcss_of(h, &centroids, &labels));
        if labels == before {
            break;
        }
    }
    ClusterAssignment {
        wcss: wcss_of(h, &centroids, &labels),
        labels,
        centroids,
        history,
        empty,
    }
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// WCSS wins (earliest on ties).
pub fn kmeans(h: &Array2<f64>, k: usize, opts: &KMeansOptions) -> Result<ClusterAssignment> {
    let n = h.nrows();
    if k == 0 || k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let runs: Vec<ClusterAssignment> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| lloyd(h, k, opts.max_iters, layer_seed(opts.seed, r)))
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.wcss < best.wcss { run } else { best })
        .expect("at least one restart"))
}

/// Fraction of absolute edge weight that disagrees with the clustering:
/// negative edges inside a cluster plus positive edges across clusters.
pub fn error_rate(g: &SignedGraph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.n()
        )));
    }
    let (mut bad, mut total) = (0.0, 0.0);
    for e in g.edges() {
        let same = labels[e.i] == labels[e.j];
        if e.is_positive() != same {
            bad += e.weight.abs();
        }
        total += e.weight.abs();
    }
    Ok(if total > 0.0 { bad / total } else { 0.0 })
}

/// How node embeddings are produced inside the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingMethod {
    Dnesbp(StackConfig),
    Spectral { method: SpectralMethod, dim: usize },
}

impl EmbeddingMethod {
    pub fn name(&self) -> String {
        match self {
            EmbeddingMethod::Dnesbp(_) => "dnesbp".into(),
            EmbeddingMethod::Spectral { method, .. } => method.to_string(),
        }
    }

    /// Embeds `g`; `seed` replaces the stack's master seed.
    pub fn embed(&self, g: &SignedGraph, seed: u64) -> Result<Array2<f64>> {
        match self {
            EmbeddingMethod::Dnesbp(cfg) => {
                let mut cfg = cfg.clone();
                cfg.layer_dims[0] = g.n();
                cfg.seed = seed;
                Ok(train_stack(g, &cfg)?.embeddings().clone())
            }
            EmbeddingMethod::Spectral { method, dim } => Ok(spectral_embed(g, *method, *dim)?.h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Training percentage of edges, in (0, 100).
    pub fraction: f64,
    pub operators: Vec<EdgeOperator>,
    pub splits: usize,
    pub seed: u64,
    pub stratified: bool,
    pub logistic: LogisticOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub split: usize,
    pub operator: EdgeOperator,
    pub auc: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSummary {
    pub operator: EdgeOperator,
    pub auc: Vec<f64>,
    pub ap: Vec<f64>,
    pub mean_auc: f64,
    pub mean_ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub records: Vec<SplitRecord>,
    pub summary: Vec<OperatorSummary>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Split → embed the training graph → edge features → logistic regression
/// → AUC and negative-class AP on the held-out edges, for every split and
/// operator. Splits run in parallel; each is seed-deterministic.
pub fn link_sign_pipeline(g: &SignedGraph, method: &EmbeddingMethod, cfg: &PipelineConfig) -> Result<PipelineResult> {
    if cfg.splits == 0 || cfg.operators.is_empty() {
        return Err(Error::InvalidConfig("need at least one split and one operator".into()));
    }
    let per_split: Vec<Vec<SplitRecord>> = (0..cfg.splits)
        .into_par_iter()
        .map(|s| run_split(g, method, cfg, s))
        .collect::<Result<_>>()?;
    let records: Vec<SplitRecord> = per_split.into_iter().flatten().collect();
    let summary = cfg
        .operators
        .iter()
        .map(|&op| {
            let auc: Vec<f64> = records.iter().filter(|r| r.operator == op).map(|r| r.auc).collect();
            let ap: Vec<f64> = records.iter().filter(|r| r.operator == op).map(|r| r.ap).collect();
            OperatorSummary {
                operator: op,
                mean_auc: mean(&auc),
                mean_ap: mean(&ap),
                auc,
                ap,
            }
        })
        .collect();
    Ok(PipelineResult { records, summary })
}

fn run_split(g: &SignedGraph, method: &EmbeddingMethod, cfg: &PipelineConfig, s: usize) -> Result<Vec<SplitRecord>> {
    let split_seed = layer_seed(cfg.seed, 2 * s);
    let split = split_edges(g, cfg.fraction, cfg.stratified, split_seed)?;
    for e in &split.test {
        if split.train.weight(e.i, e.j) != 0.0 {
            return Err(Error::Leakage(e.i, e.j));
        }
    }
    let h = method.embed(&split.train, layer_seed(cfg.seed, 2 * s + 1))?;
    let train_edges = split.train.edges();
    let train_signs: Vec<i8> = train_edges.iter().map(Edge::sign).collect();
    let test_signs: Vec<i8> = split.test.iter().map(Edge::sign).collect();
    let test_negative: Vec<bool> = test_signs.iter().map(|&v| v < 0).collect();

    cfg.operators
        .iter()
        .map(|&op| {
            let x_train = edge_features(&h, train_edges, op);
            let clf = train_sign_classifier(x_train.view(), &train_signs, &cfg.logistic)?;
            let x_test = edge_features(&h, &split.test, op);
            let p = clf.predict_negative(x_test.view());
            Ok(SplitRecord {
                split: s,
                operator: op,
                auc: auc(&p, &test_negative)?,
                ap: average_precision(&p, &test_negative)?,
            })
        })
        .collect()
}
