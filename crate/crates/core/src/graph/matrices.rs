use ndarray::Array2;

use super::SignedGraph;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Degree matrices, signed Laplacians and the reconstruction penalty of a
/// signed graph, all kept sparse.
///
/// The penalty `P` is stored only on the support of `A` (`β` on positive
/// entries, `γβ` on negative ones); every other entry is implicitly 1.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub d_plus: Vec<f64>,
    pub d_minus: Vec<f64>,
    pub d_bar: Vec<f64>,
    pub lplus: CsrMatrix,
    pub lminus: CsrMatrix,
    pub beta: f64,
    pub gamma: f64,
    penalty: CsrMatrix,
}

pub fn build_matrices(g: &SignedGraph, beta: f64, gamma: f64) -> Result<GraphMatrices> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(format!("beta must be >= 1, got {beta}")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma must be >= 1, got {gamma}")));
    }
    let aplus = g.positive_part();
    let aminus = g.negative_part();
    let d_plus = aplus.row_sums();
    let d_minus = aminus.row_sums();
    let d_bar = d_plus.iter().zip(&d_minus).map(|(p, m)| p + m).collect();

    let penalty = g.adjacency().map_values(|a| if a > 0.0 { beta } else { gamma * beta });

    Ok(GraphMatrices {
        lplus: laplacian_of(&aplus, &d_plus),
        lminus: laplacian_of(&aminus, &d_minus),
        d_plus,
        d_minus,
        d_bar,
        beta,
        gamma,
        penalty,
    })
}

fn laplacian_of(adj: &CsrMatrix, degree: &[f64]) -> CsrMatrix {
    let mut triplets: Vec<_> = adj.triplets().into_iter().map(|(i, j, v)| (i, j, -v)).collect();
    triplets.extend(degree.iter().enumerate().map(|(i, &d)| (i, i, d)));
    CsrMatrix::from_triplets(adj.n(), triplets)
}

impl GraphMatrices {
    pub fn n(&self) -> usize {
        self.d_plus.len()
    }

    /// `L = L⁺ − γ·L⁻` with this instance's `γ`.
    pub fn laplacian(&self) -> CsrMatrix {
        self.laplacian_with(self.gamma)
    }

    pub fn laplacian_with(&self, gamma: f64) -> CsrMatrix {
        self.lplus.add_scaled(&self.lminus, -gamma)
    }

    pub fn penalty(&self, i: usize, j: usize) -> f64 {
        match self.penalty.get(i, j) {
            0.0 => 1.0,
            p => p,
        }
    }

    /// Explicitly stored (non-unit) penalty entries.
    pub fn penalty_sparse(&self) -> &CsrMatrix {
        &self.penalty
    }

    /// Dense penalty rows `P[rows, :]`.
    pub fn penalty_rows(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::ones((rows.len(), self.n()));
        for (r, &i) in rows.iter().enumerate() {
            for (j, p) in self.penalty.row(i) {
                out[[r, j]] = p;
            }
        }
        out
    }
}

/// `floor(Σ A⁺ / Σ A⁻)`, clamped below at 1.
pub fn default_gamma(g: &SignedGraph) -> Result<u32> {
    let neg = g.negative_total();
    if neg <= 0.0 {
        return Err(Error::NoNegativeEdges);
    }
    let ratio = (g.positive_total() / neg).floor();
    Ok((ratio as u32).max(1))
}
