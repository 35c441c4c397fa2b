use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Edge, SignedGraph};
use crate::error::{Error, Result};

/// Training graph over the full node set plus the held-out edges.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train: SignedGraph,
    pub test: Vec<Edge>,
}

/// Samples `⌈f%·|E|⌉` edges into the training graph. With `stratified`, the
/// positive/negative mix of the training sample follows the full graph's.
pub fn split_edges(g: &SignedGraph, train_percent: f64, stratified: bool, seed: u64) -> Result<EdgeSplit> {
    if !(train_percent > 0.0 && train_percent < 100.0) {
        return Err(Error::InvalidConfig(format!(
            "training fraction must lie in (0, 100), got {train_percent}"
        )));
    }
    let total = g.num_edges();
    let n_train = train_count(total, train_percent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen = vec![false; total];
    if stratified {
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..total).partition(|&e| g.edges()[e].is_positive());
        let pos_train = if total == 0 {
            0
        } else {
            ((n_train * pos.len()) as f64 / total as f64).round() as usize
        };
        let pos_train = pos_train.min(pos.len()).max(n_train.saturating_sub(neg.len()));
        let neg_train = n_train - pos_train;
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        for &e in pos[..pos_train].iter().chain(&neg[..neg_train]) {
            chosen[e] = true;
        }
    } else {
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut rng);
        for &e in &order[..n_train] {
            chosen[e] = true;
        }
    }

    let (train, test): (Vec<Edge>, Vec<Edge>) = g.edges().iter().partition(|e| chosen[index_of(g, e)]);
    Ok(EdgeSplit {
        train: g.with_edges(train),
        test,
    })
}

fn index_of(g: &SignedGraph, e: &Edge) -> usize {
    // edges are sorted by (i, j)
    g.edges()
        .binary_search_by(|x| (x.i, x.j).cmp(&(e.i, e.j)))
        .expect("edge belongs to graph")
}

fn train_count(total: usize, percent: f64) -> usize {
    let exact = percent * total as f64 / 100.0;
    let rounded = exact.round();
    let count = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (count as usize).min(total)
}
