use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Edge, SignedGraph};
use crate::error::{Error, Result};

/// Planted k-way partition: intra-cluster pairs become positive edges with
/// probability `p_in`, inter-cluster pairs negative edges with probability
/// `p_out`, then every edge sign flips independently with `flip_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartitionParams {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub flip_noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PlantedPartition {
    pub graph: SignedGraph,
    pub labels: Vec<usize>,
}

pub fn generate_planted_partition(params: &PlantedPartitionParams) -> Result<PlantedPartition> {
    if params.sizes.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "planted partition needs at least 2 clusters, got {}",
            params.sizes.len()
        )));
    }
    if let Some(c) = params.sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(c));
    }
    for (name, p) in [
        ("p_in", params.p_in),
        ("p_out", params.p_out),
        ("flip_noise", params.flip_noise),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
        }
    }

    let labels: Vec<usize> = params
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same = labels[i] == labels[j];
            let p = if same { params.p_in } else { params.p_out };
            if !rng.random_bool(p) {
                continue;
            }
            let mut weight = if same { 1.0 } else { -1.0 };
            if params.flip_noise > 0.0 && rng.random_bool(params.flip_noise) {
                weight = -weight;
            }
            edges.push(Edge { i, j, weight });
        }
    }
    let template = SignedGraph::from_indexed(n, &[])?;
    Ok(PlantedPartition {
        graph: template.with_edges(edges),
        labels,
    })
}

/// Same edges and sign counts with the signs randomly permuted over edges:
/// a null model in which signs carry no structure.
pub fn shuffle_signs(g: &SignedGraph, seed: u64) -> SignedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    weights.shuffle(&mut rng);
    let edges = g
        .edges()
        .iter()
        .zip(weights)
        .map(|(e, weight)| Edge { weight, ..*e })
        .collect();
    g.with_edges(edges)
}
