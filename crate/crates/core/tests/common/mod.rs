#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbne_core::graph::SignedGraph;

/// Erdős–Rényi style signed graph; each present edge is negative with
/// probability `p_neg`.
pub fn random_signed_graph(n: usize, density: f64, p_neg: f64, seed: u64) -> SignedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                let w = if rng.random_bool(p_neg) { -1.0 } else { 1.0 };
                edges.push((i, j, w));
            }
        }
    }
    SignedGraph::from_indexed(n, &edges).unwrap()
}

/// Random graph guaranteed to have both edge classes.
pub fn random_mixed_graph(n: usize, density: f64, seed: u64) -> SignedGraph {
    let mut s = seed;
    loop {
        let g = random_signed_graph(n, density, 0.35, s);
        if g.num_positive() > 0 && g.num_negative() > 0 {
            return g;
        }
        s += 1000;
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
