//! Spectral embeddings from signed Laplacians: the signed Laplacian
//! `L̄ = D̄ − A`, the simple normalized `D̄⁻¹(D⁺ − D⁻ − A)` (SNS) and the
//! balanced normalized `D̄⁻¹(D⁺ − A)` (BNS).
//!
//! The normalized matrices are not symmetric but are similar to
//! `D̄^{-1/2}(·)D̄^{-1/2}`; that symmetric form is solved and eigenvectors are
//! mapped back with `v = D̄^{-1/2}u`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralMethod {
    Sl,
    Sns,
    Bns,
}

impl FromStr for SpectralMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sl" => Ok(SpectralMethod::Sl),
            "sns" => Ok(SpectralMethod::Sns),
            "bns" => Ok(SpectralMethod::Bns),
            _ => Err(Error::InvalidConfig(format!("unknown spectral method {s:?}"))),
        }
    }
}

impl fmt::Display for SpectralMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralMethod::Sl => "sl",
            SpectralMethod::Sns => "sns",
            SpectralMethod::Bns => "bns",
        })
    }
}

/// Eigenvalues below this magnitude count as zero for SNS/BNS.
pub const ZERO_EIGENVALUE: f64 = 1e-8;

/// Required accuracy of every returned eigenpair, relative to `‖v‖`.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub method: SpectralMethod,
    /// `n × d`, one eigenvector per column.
    pub h: Array2<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// Absolute degrees `D̄`, with isolated nodes treated as degree 1.
fn abs_degrees(g: &SignedGraph) -> Vec<f64> {
    let mut isolated = 0;
    let d: Vec<f64> = (0..g.n())
        .map(|i| {
            let s: f64 = g.neighbors(i).map(|(_, w)| w.abs()).sum();
            if s == 0.0 {
                isolated += 1;
                1.0
            } else {
                s
            }
        })
        .collect();
    if isolated > 0 {
        log::warn!("{isolated} isolated node(s): absolute degree taken as 1");
    }
    d
}

/// Signed degree `D⁺ − D⁻` on the diagonal plus `−A`, optionally dropping
/// the `D⁻` part.
fn degree_minus_adjacency(g: &SignedGraph, subtract_negative: bool) -> CsrMatrix {
    let mut triplets = Vec::new();
    for i in 0..g.n() {
        let mut diag = 0.0;
        for (j, w) in g.neighbors(i) {
            triplets.push((i, j, -w));
            if w > 0.0 || subtract_negative {
                diag += w;
            }
        }
        triplets.push((i, i, diag));
    }
    CsrMatrix::from_triplets(g.n(), triplets)
}

/// `L̄ = D̄ − A`.
pub fn signed_laplacian(g: &SignedGraph) -> CsrMatrix {
    let mut triplets = Vec::new();
    for i in 0..g.n() {
        let mut diag = 0.0;
        for (j, w) in g.neighbors(i) {
            triplets.push((i, j, -w));
            diag += w.abs();
        }
        triplets.push((i, i, diag));
    }
    CsrMatrix::from_triplets(g.n(), triplets)
}

fn row_scaled(m: &CsrMatrix, scale: &[f64]) -> CsrMatrix {
    CsrMatrix::from_triplets(
        m.n(),
        m.triplets().into_iter().map(|(i, j, v)| (i, j, v * scale[i])).collect(),
    )
}

fn sym_scaled(m: &CsrMatrix, scale: &[f64]) -> CsrMatrix {
    CsrMatrix::from_triplets(
        m.n(),
        m.triplets()
            .into_iter()
            .map(|(i, j, v)| (i, j, v * scale[i] * scale[j]))
            .collect(),
    )
}

/// `L_SNS = D̄⁻¹(D⁺ − D⁻ − A)`.
pub fn sns_laplacian(g: &SignedGraph) -> CsrMatrix {
    let inv: Vec<f64> = abs_degrees(g).iter().map(|d| 1.0 / d).collect();
    row_scaled(&degree_minus_adjacency(g, true), &inv)
}

/// `L_BNS = D̄⁻¹(D⁺ − A)`.
pub fn bns_laplacian(g: &SignedGraph) -> CsrMatrix {
    let inv: Vec<f64> = abs_degrees(g).iter().map(|d| 1.0 / d).collect();
    row_scaled(&degree_minus_adjacency(g, false), &inv)
}

/// The matrix of `method` as defined (possibly nonsymmetric).
pub fn method_matrix(g: &SignedGraph, method: SpectralMethod) -> CsrMatrix {
    match method {
        SpectralMethod::Sl => signed_laplacian(g),
        SpectralMethod::Sns => sns_laplacian(g),
        SpectralMethod::Bns => bns_laplacian(g),
    }
}

/// Symmetric matrix with the same spectrum, and the diagonal that maps its
/// eigenvectors back (`None` for SL, which is already symmetric).
pub fn symmetric_form(g: &SignedGraph, method: SpectralMethod) -> (CsrMatrix, Option<Vec<f64>>) {
    match method {
        SpectralMethod::Sl => (signed_laplacian(g), None),
        SpectralMethod::Sns | SpectralMethod::Bns => {
            let inv_sqrt: Vec<f64> = abs_degrees(g).iter().map(|d| 1.0 / d.sqrt()).collect();
            let core = degree_minus_adjacency(g, method == SpectralMethod::Sns);
            (sym_scaled(&core, &inv_sqrt), Some(inv_sqrt))
        }
    }
}

/// Solver selection: dense symmetric decomposition up to `dense_limit`
/// nodes, block subspace iteration above.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub dense_limit: usize,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            max_iters: 20_000,
        }
    }
}

pub fn spectral_embed(g: &SignedGraph, method: SpectralMethod, d: usize) -> Result<SpectralEmbedding> {
    spectral_embed_with(g, method, d, SolverOptions::default())
}

pub fn spectral_embed_with(
    g: &SignedGraph,
    method: SpectralMethod,
    d: usize,
    opts: SolverOptions,
) -> Result<SpectralEmbedding> {
    let n = g.n();
    if d == 0 || d > n {
        return Err(Error::KExceedsN { k: d, n });
    }
    let (sym, back) = symmetric_form(g, method);
    let skip_zero = method != SpectralMethod::Sl;
    let (values, vectors) = if n <= opts.dense_limit {
        dense_eigen(&sym)
    } else {
        let want = d + if skip_zero { 8.min(n - d) } else { 0 };
        subspace_eigen(&sym, want, opts.max_iters)?
    };

    let mut chosen = Vec::with_capacity(d);
    for (k, &lambda) in values.iter().enumerate() {
        if skip_zero && lambda.abs() < ZERO_EIGENVALUE {
            continue;
        }
        chosen.push(k);
        if chosen.len() == d {
            break;
        }
    }
    if chosen.len() < d {
        return Err(Error::Convergence(format!(
            "{method}: only {} eigenpairs with nonzero eigenvalue available, {d} requested",
            chosen.len()
        )));
    }

    let original = method_matrix(g, method);
    let mut h = Array2::zeros((n, d));
    let mut eigenvalues = Vec::with_capacity(d);
    for (c, &k) in chosen.iter().enumerate() {
        let mut v: Array1<f64> = vectors.column(k).to_owned();
        if let Some(scale) = &back {
            v.iter_mut().zip(scale).for_each(|(x, s)| *x *= s);
        }
        let norm = v.dot(&v).sqrt();
        v /= norm;
        fix_gauge(&mut v);
        let lambda = values[k];
        let mv = Array1::from(original.matvec(v.as_slice().unwrap()));
        let residual = (&mv - &(&v * lambda)).mapv(|x| x * x).sum().sqrt();
        if residual > RESIDUAL_TOL {
            return Err(Error::Convergence(format!(
                "{method}: eigenpair {c} (λ = {lambda}) has residual {residual:e}"
            )));
        }
        h.column_mut(c).assign(&v);
        eigenvalues.push(lambda);
    }
    Ok(SpectralEmbedding { method, h, eigenvalues })
}

/// Largest-magnitude entry made positive (first one on ties).
fn fix_gauge(v: &mut Array1<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// All eigenpairs of a symmetric matrix, ascending.
fn dense_eigen(m: &CsrMatrix) -> (Vec<f64>, Array2<f64>) {
    let n = m.n();
    let mut dm = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in m.triplets() {
        dm[(i, j)] = v;
    }
    let eig = SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (c, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, c]] = eig.eigenvectors[(i, k)];
        }
    }
    (values, vectors)
}

/// The `want` smallest eigenpairs of a symmetric sparse matrix by block
/// subspace iteration on `σI − M` (σ a Gershgorin upper bound) with a
/// Rayleigh–Ritz step each sweep.
fn subspace_eigen(m: &CsrMatrix, want: usize, max_iters: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = m.n();
    let block = (want + want.max(8)).min(n);
    let sigma = (0..n)
        .map(|i| m.row(i).map(|(j, v)| if j == i { v } else { v.abs() }).sum::<f64>())
        .fold(0.0f64, f64::max)
        + 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut q = Array2::from_shape_simple_fn((n, block), || rng.random_range(-0.5..0.5));
    orthonormalize(&mut q);

    for _ in 0..max_iters {
        let mq = m.mul_dense(q.view());
        let mut z = &q * sigma - &mq;
        orthonormalize(&mut z);
        q = z;

        // Rayleigh–Ritz on span(q)
        let mq = m.mul_dense(q.view());
        let small = q.t().dot(&mq);
        let mut sm = DMatrix::<f64>::zeros(block, block);
        for ((i, j), v) in small.indexed_iter() {
            sm[(i, j)] = 0.5 * (v + small[[j, i]]);
        }
        let eig = SymmetricEigen::new(sm);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut y = Array2::zeros((block, block));
        for (c, &k) in order.iter().enumerate() {
            for i in 0..block {
                y[[i, c]] = eig.eigenvectors[(i, k)];
            }
        }
        q = q.dot(&y);
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

        let mq = m.mul_dense(q.view());
        let converged = (0..want).all(|c| {
            let r = &mq.column(c) - &(&q.column(c) * values[c]);
            r.dot(&r).sqrt() <= 0.1 * RESIDUAL_TOL
        });
        if converged {
            return Ok((values, q));
        }
    }
    Err(Error::Convergence(format!(
        "subspace iteration did not converge in {max_iters} sweeps"
    )))
}

/// Modified Gram–Schmidt on the columns, in place.
fn orthonormalize(q: &mut Array2<f64>) {
    for c in 0..q.ncols() {
        for p in 0..c {
            let proj = q.column(p).dot(&q.column(c));
            let prev = q.column(p).to_owned();
            q.column_mut(c).scaled_add(-proj, &prev);
        }
        let norm = q.column(c).dot(&q.column(c)).sqrt();
        if norm > 0.0 {
            q.column_mut(c).mapv_inplace(|x| x / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_node_laplacians() {
        let pos = SignedGraph::from_indexed(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(signed_laplacian(&pos).to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);
        let neg = SignedGraph::from_indexed(2, &[(0, 1, -1.0)]).unwrap();
        assert_eq!(signed_laplacian(&neg).to_dense(), array![[1.0, 1.0], [1.0, 1.0]]);
        let e = spectral_embed(&neg, SpectralMethod::Sl, 2).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-12);
        assert!((e.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn all_positive_sns_equals_bns() {
        let g = SignedGraph::from_indexed(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (0, 3, 0.5)]).unwrap();
        assert_eq!(sns_laplacian(&g), bns_laplacian(&g));
    }

    #[test]
    fn three_node_hand_example() {
        // 0 -(+2)- 1 -(−1)- 2
        let g = SignedGraph::from_indexed(3, &[(0, 1, 2.0), (1, 2, -1.0)]).unwrap();
        let dbar = [2.0, 3.0, 1.0];
        let a = array![[0.0, 2.0, 0.0], [2.0, 0.0, -1.0], [0.0, -1.0, 0.0]];
        let dplus = [2.0, 2.0, 0.0];
        let dminus = [0.0, 1.0, 1.0];
        let mut sns = Array2::zeros((3, 3));
        let mut bns = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                let diag = if i == j { 1.0 } else { 0.0 };
                sns[[i, j]] = (diag * (dplus[i] - dminus[i]) - a[[i, j]]) / dbar[i];
                bns[[i, j]] = (diag * dplus[i] - a[[i, j]]) / dbar[i];
            }
        }
        assert_eq!(sns_laplacian(&g).to_dense(), sns);
        assert_eq!(bns_laplacian(&g).to_dense(), bns);
    }

    #[test]
    fn gauge_makes_largest_entry_positive() {
        let mut v = array![0.1, -0.9, 0.3];
        fix_gauge(&mut v);
        assert_eq!(v, array![-0.1, 0.9, -0.3]);
    }

    #[test]
    fn d_exceeding_n_is_rejected() {
        let g = SignedGraph::from_indexed(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            spectral_embed(&g, SpectralMethod::Sl, 3),
            Err(Error::KExceedsN { .. })
        ));
    }
}
