//! Signed, undirected, weighted graphs and everything derived from their
//! adjacency matrix.
//!
//! The signed adjacency `A` is split as `A = A⁺ − A⁻` with both parts
//! nonnegative and disjoint in support. Storage is sparse: the canonical edge
//! list keeps each undirected edge once with `i < j`, and a symmetric CSR view
//! serves row access. Dense materialization is capped (see
//! [`DEFAULT_DENSE_CAP`]).

mod generate;
mod io;
mod matrices;
mod split;

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub use generate::{generate_planted_partition, shuffle_signs, PlantedPartition, PlantedPartitionParams};
pub use io::{load_edge_list, load_labels, read_edge_list, save_edge_list, save_labels, write_edge_list};
pub use matrices::{build_matrices, default_gamma, GraphMatrices};
pub use split::{split_edges, EdgeSplit};

/// Largest node count for which dense `n × n` matrices are materialized.
pub const DEFAULT_DENSE_CAP: usize = 8192;

/// One undirected edge, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn is_positive(&self) -> bool {
        self.weight > 0.0
    }

    pub fn sign(&self) -> i8 {
        if self.weight > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// How repeated node pairs are reconciled while building a graph.
///
/// Repeats with the same sign always merge into one edge, keeping the last
/// weight seen. The policy only governs repeats with opposite signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Strict,
    KeepFirst,
}

#[derive(Debug, Clone)]
pub struct SignedGraph {
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    adjacency: CsrMatrix,
    dense_cap: usize,
}

impl SignedGraph {
    /// Graph over nodes `"0" .. "n-1"` from index triplets.
    pub fn from_indexed(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut builder = GraphBuilder::new(DuplicatePolicy::Strict);
        for i in 0..n {
            builder.add_node(&i.to_string());
        }
        for (line, &(i, j, w)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::Parse {
                    line: line + 1,
                    message: format!("node index out of range for n = {n}"),
                });
            }
            builder.add_edge(&i.to_string(), &j.to_string(), w, line + 1)?;
        }
        Ok(builder.build())
    }

    fn from_parts(node_ids: Vec<String>, index: HashMap<String, usize>, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.i, e.j));
        let n = node_ids.len();
        let triplets = edges
            .iter()
            .flat_map(|e| [(e.i, e.j, e.weight), (e.j, e.i, e.weight)])
            .collect();
        Self {
            node_ids,
            index,
            edges,
            adjacency: CsrMatrix::from_triplets(n, triplets),
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    /// A graph over the same node set with a different edge list.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Self {
        let mut g = Self::from_parts(self.node_ids.clone(), self.index.clone(), edges);
        g.dense_cap = self.dense_cap;
        g
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.node_ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_positive(&self) -> usize {
        self.edges.iter().filter(|e| e.is_positive()).count()
    }

    pub fn num_negative(&self) -> usize {
        self.edges.len() - self.num_positive()
    }

    /// Symmetric signed adjacency `A`.
    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// `A⁺ = max(A, 0)`.
    pub fn positive_part(&self) -> CsrMatrix {
        let m = self.adjacency.map_values(|v| v.max(0.0));
        CsrMatrix::from_triplets(m.n(), m.triplets())
    }

    /// `A⁻ = −min(A, 0)`.
    pub fn negative_part(&self) -> CsrMatrix {
        let m = self.adjacency.map_values(|v| (-v).max(0.0));
        CsrMatrix::from_triplets(m.n(), m.triplets())
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.row(i)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency.get(i, j)
    }

    /// `Σᵢⱼ A⁺ᵢⱼ` over ordered pairs.
    pub fn positive_total(&self) -> f64 {
        2.0 * self.edges.iter().map(|e| e.weight.max(0.0)).sum::<f64>()
    }

    /// `Σᵢⱼ A⁻ᵢⱼ` over ordered pairs.
    pub fn negative_total(&self) -> f64 {
        2.0 * self.edges.iter().map(|e| (-e.weight).max(0.0)).sum::<f64>()
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn set_dense_cap(&mut self, cap: usize) {
        self.dense_cap = cap;
    }

    pub fn check_dense(&self) -> Result<()> {
        if self.n() > self.dense_cap {
            return Err(Error::TooLargeForDense {
                n: self.n(),
                cap: self.dense_cap,
            });
        }
        Ok(())
    }

    pub fn dense_adjacency(&self) -> Result<Array2<f64>> {
        self.check_dense()?;
        Ok(self.adjacency.to_dense())
    }

    /// Dense rows `A[rows, :]`.
    pub fn adjacency_rows(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.n()));
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.adjacency.row(i) {
                out[[r, j]] = v;
            }
        }
        out
    }

    /// Dense penalty rows: 1 off the support of `A`, `β` on positive and
    /// `γβ` on negative entries.
    pub fn penalty_rows(&self, rows: &[usize], beta: f64, gamma: f64) -> Array2<f64> {
        let mut out = Array2::ones((rows.len(), self.n()));
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.adjacency.row(i) {
                out[[r, j]] = if v > 0.0 { beta } else { gamma * beta };
            }
        }
        out
    }
}

/// Incremental construction from external node ids.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    policy: DuplicatePolicy,
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), f64>,
}

impl GraphBuilder {
    pub fn new(policy: DuplicatePolicy) -> Self {
        Self {
            policy,
            ..Default::default()
        }
    }

    /// Returns the dense index of `id`, assigning the next one on first sight.
    pub fn add_node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.node_ids.len();
        self.node_ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn add_edge(&mut self, src: &str, dst: &str, weight: f64, line: usize) -> Result<()> {
        if !weight.is_finite() || weight == 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("edge weight must be a finite nonzero number, got {weight}"),
            });
        }
        if src == dst {
            return Err(Error::SelfLoop {
                node: src.to_owned(),
                line,
            });
        }
        let a = self.add_node(src);
        let b = self.add_node(dst);
        let key = (a.min(b), a.max(b));
        match self.edges.get_mut(&key) {
            None => {
                self.edges.insert(key, weight);
            }
            Some(existing) if existing.signum() == weight.signum() => *existing = weight,
            Some(_) => match self.policy {
                DuplicatePolicy::Strict => {
                    return Err(Error::Conflict {
                        src: src.to_owned(),
                        dst: dst.to_owned(),
                        line,
                    })
                }
                DuplicatePolicy::KeepFirst => {}
            },
        }
        Ok(())
    }

    pub fn build(self) -> SignedGraph {
        let edges = self
            .edges
            .into_iter()
            .map(|((i, j), weight)| Edge { i, j, weight })
            .collect();
        SignedGraph::from_parts(self.node_ids, self.index, edges)
    }
}
