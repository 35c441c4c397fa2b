mod common;
mod oracles;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use sbne_core::autoencoder::{
    forward, gradients, loss, make_batch, sgd_step, train_layer, train_layer_from, Batch, LayerConfig, LayerInput,
    LayerParams,
};
use sbne_core::graph::{build_matrices, generate_planted_partition, PlantedPartitionParams, SignedGraph};
use sbne_core::sparse::CsrMatrix;

use common::{random_mixed_graph, random_signed_graph, rng};

fn layer_cfg(dim_in: usize, dim_hidden: usize, first: bool) -> LayerConfig {
    LayerConfig {
        dim_in,
        dim_hidden,
        alpha: 2.0,
        gamma: 3.0,
        lambda: 0.1,
        eta: 0.025,
        beta: 5.0,
        batch_size: 1000,
        max_iters: 80,
        tol: 0.0,
        seed: 7,
        is_first_layer: first,
    }
}

fn random_params(dim_in: usize, dim_hidden: usize, seed: u64) -> LayerParams {
    let mut r = rng(seed);
    let mut p = LayerParams::glorot(dim_in, dim_hidden, &mut r);
    p.b1 = Array1::from_shape_fn(dim_hidden, |_| r.random_range(-0.3..0.3));
    p.b2 = Array1::from_shape_fn(dim_in, |_| r.random_range(-0.3..0.3));
    p
}

fn full_batch(g: &SignedGraph, input: LayerInput<'_>, cfg: &LayerConfig) -> Batch {
    let m = build_matrices(g, 1.0, 1.0).unwrap();
    let rows: Vec<usize> = (0..g.n()).collect();
    make_batch(input, &m.lplus, &m.lminus, &rows, cfg)
}

#[test]
fn first_layer_gradients_match_finite_differences() {
    for seed in 0..5 {
        let g = random_mixed_graph(6, 0.6, seed);
        let cfg = layer_cfg(6, 3, true);
        let batch = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
        let params = random_params(6, 3, 100 + seed);
        let err = oracles::gradient_check(&params, &batch, &cfg);
        assert!(err <= 1e-4, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn deep_layer_gradients_match_finite_differences() {
    for seed in 0..5 {
        let g = random_mixed_graph(6, 0.6, seed + 50);
        let mut r = rng(seed);
        let x = Array2::from_shape_fn((6, 4), |_| r.random_range(-0.9..0.9));
        let mut cfg = layer_cfg(4, 3, false);
        cfg.gamma = 1.0;
        let batch = full_batch(&g, LayerInput::Dense(x.view()), &cfg);
        assert!(batch.penalty.is_none());
        let params = random_params(4, 3, 200 + seed);
        let err = oracles::gradient_check(&params, &batch, &cfg);
        assert!(err <= 1e-4, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn forward_matches_naive_loops() {
    let mut r = rng(3);
    let x = Array2::from_shape_fn((4, 3), |_| r.random_range(-1.0..1.0));
    let p = random_params(3, 2, 9);
    let c = forward(&p, x.view()).unwrap();
    for row in 0..4 {
        let mut h = [0.0; 2];
        for (k, hk) in h.iter_mut().enumerate() {
            let mut z = p.b1[k];
            for i in 0..3 {
                z += x[[row, i]] * p.w1[[k, i]];
            }
            *hk = z.tanh();
            assert!((c.h[[row, k]] - *hk).abs() < 1e-12);
        }
        for i in 0..3 {
            let mut z = p.b2[i];
            for (k, hk) in h.iter().enumerate() {
                z += hk * p.w2[[i, k]];
            }
            assert!((c.xhat[[row, i]] - z.tanh()).abs() < 1e-12);
        }
    }
}

#[test]
fn perfect_reconstruction_without_extra_terms_has_zero_loss_and_gradient() {
    let g = random_mixed_graph(5, 0.5, 1);
    let mut cfg = layer_cfg(5, 2, true);
    cfg.alpha = 0.0;
    cfg.lambda = 0.0;
    let mut batch = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    let p = random_params(5, 2, 4);
    let cache = forward(&p, batch.x.view()).unwrap();
    batch.targets = cache.xhat.clone();
    assert_eq!(loss(&p, &batch, &cfg).unwrap().total, 0.0);
    let grads = gradients(&cache, &batch, &p, &cfg).unwrap();
    assert!(grads
        .w1
        .iter()
        .chain(&grads.w2)
        .chain(&grads.b1)
        .chain(&grads.b2)
        .all(|&v| v == 0.0));
}

/// Independent plain weighted auto-encoder gradient, written with loops.
fn plain_ae_gradients(p: &LayerParams, x: &Array2<f64>, t: &Array2<f64>, pen: &Array2<f64>, lambda: f64) -> Vec<f64> {
    let (n, d_in) = x.dim();
    let d_h = p.w1.nrows();
    let mut gw1 = Array2::<f64>::zeros((d_h, d_in));
    let mut gw2 = Array2::<f64>::zeros((d_in, d_h));
    let mut gb1 = vec![0.0; d_h];
    let mut gb2 = vec![0.0; d_in];
    for r in 0..n {
        let h: Vec<f64> = (0..d_h)
            .map(|k| (p.b1[k] + (0..d_in).map(|i| x[[r, i]] * p.w1[[k, i]]).sum::<f64>()).tanh())
            .collect();
        let y: Vec<f64> = (0..d_in)
            .map(|i| (p.b2[i] + (0..d_h).map(|k| h[k] * p.w2[[i, k]]).sum::<f64>()).tanh())
            .collect();
        // dJ/dy_i = (y_i - t_i) p_i^2 / n
        let dz3: Vec<f64> = (0..d_in)
            .map(|i| (y[i] - t[[r, i]]) * pen[[r, i]] * pen[[r, i]] * (1.0 - y[i] * y[i]) / n as f64)
            .collect();
        for i in 0..d_in {
            gb2[i] += dz3[i];
            for k in 0..d_h {
                gw2[[i, k]] += dz3[i] * h[k];
            }
        }
        for k in 0..d_h {
            let dh: f64 = (0..d_in).map(|i| dz3[i] * p.w2[[i, k]]).sum();
            let dz2 = dh * (1.0 - h[k] * h[k]);
            gb1[k] += dz2;
            for i in 0..d_in {
                gw1[[k, i]] += dz2 * x[[r, i]];
            }
        }
    }
    gw1.zip_mut_with(&p.w1, |g, w| *g += lambda * w);
    gw2.zip_mut_with(&p.w2, |g, w| *g += lambda * w);
    gw1.into_iter().chain(gw2).chain(gb1).chain(gb2).collect()
}

#[test]
fn zero_alpha_matches_plain_weighted_autoencoder() {
    let g = random_mixed_graph(7, 0.5, 8);
    let mut cfg = layer_cfg(7, 3, true);
    cfg.alpha = 0.0;
    let batch = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    let p = random_params(7, 3, 5);
    let cache = forward(&p, batch.x.view()).unwrap();
    let grads = gradients(&cache, &batch, &p, &cfg).unwrap();
    let ours: Vec<f64> = grads
        .w1
        .iter()
        .chain(&grads.w2)
        .chain(&grads.b1)
        .chain(&grads.b2)
        .copied()
        .collect();
    let oracle = plain_ae_gradients(
        &p,
        &batch.x,
        &batch.targets,
        batch.penalty.as_ref().unwrap(),
        cfg.lambda,
    );
    for (a, b) in ours.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn unit_penalty_first_layer_equals_deep_formula() {
    let g = random_mixed_graph(6, 0.5, 2);
    let mut cfg = layer_cfg(6, 3, true);
    cfg.beta = 1.0;
    cfg.gamma = 1.0;
    let with_p = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    assert!(with_p.penalty.as_ref().unwrap().iter().all(|&v| v == 1.0));
    let mut without = with_p.clone();
    without.penalty = None;
    let p = random_params(6, 3, 1);
    let cache = forward(&p, with_p.x.view()).unwrap();
    assert_eq!(
        gradients(&cache, &with_p, &p, &cfg).unwrap(),
        gradients(&cache, &without, &p, &cfg).unwrap()
    );
}

#[test]
fn trace_form_equals_pairwise_sums() {
    for seed in 0..50u64 {
        let n = 2 + (seed as usize % 19);
        let g = random_signed_graph(n, 0.4, 0.4, seed);
        let gamma = 1.0 + (seed % 4) as f64;
        let mut cfg = layer_cfg(n, 3, true);
        cfg.gamma = gamma;
        let batch = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
        let p = random_params(n, 3, seed + 7);
        let h = forward(&p, batch.x.view()).unwrap().h;
        let terms = loss(&p, &batch, &cfg).unwrap();

        let (ml, cl) = oracles::pairwise_sums(&g.dense_adjacency().unwrap(), &h);
        let nf = n as f64;
        let brute = (ml + gamma * cl) / nf;
        assert!(
            (terms.pairwise - brute).abs() < 1e-10,
            "seed {seed}: {} vs {brute}",
            terms.pairwise
        );
    }
}

#[test]
fn pairwise_term_is_linear_in_gamma_for_negative_only_graphs() {
    let g = SignedGraph::from_indexed(4, &[(0, 1, -1.0), (1, 2, -1.0), (0, 3, -1.0)]).unwrap();
    let mut cfg = layer_cfg(4, 2, true);
    let p = random_params(4, 2, 3);
    cfg.gamma = 2.0;
    let b2 = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    let t2 = loss(&p, &b2, &cfg).unwrap().pairwise;
    cfg.gamma = 4.0;
    let b4 = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    let t4 = loss(&p, &b4, &cfg).unwrap().pairwise;
    assert!(t2 < 0.0);
    assert!((t4 - 2.0 * t2).abs() < 1e-14);
}

#[test]
fn small_step_decreases_loss() {
    let g = random_mixed_graph(8, 0.5, 3);
    let cfg = layer_cfg(8, 3, true);
    let batch = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    let mut p = random_params(8, 3, 2);
    let before = loss(&p, &batch, &cfg).unwrap().total;
    let cache = forward(&p, batch.x.view()).unwrap();
    let grads = gradients(&cache, &batch, &p, &cfg).unwrap();
    sgd_step(&mut p, &grads, 1e-4).unwrap();
    assert!(loss(&p, &batch, &cfg).unwrap().total < before);
}

#[test]
fn training_reevaluates_gradients_each_step() {
    let g = random_mixed_graph(6, 0.5, 4);
    let mut cfg = layer_cfg(6, 3, true);
    cfg.max_iters = 2;
    let m = build_matrices(&g, 1.0, 1.0).unwrap();
    let init = random_params(6, 3, 12);
    let trained = train_layer_from(
        LayerInput::Adjacency(&g),
        &m.lplus,
        &m.lminus,
        &cfg,
        init.clone(),
        &mut rng(0),
    )
    .unwrap();

    let batch = full_batch(&g, LayerInput::Adjacency(&g), &cfg);
    let mut manual = init.clone();
    for _ in 0..2 {
        let cache = forward(&manual, batch.x.view()).unwrap();
        let grads = gradients(&cache, &batch, &manual, &cfg).unwrap();
        sgd_step(&mut manual, &grads, cfg.eta).unwrap();
    }
    assert_eq!(trained.params, manual);

    // a single step with the doubled first gradient lands elsewhere
    let mut stale = init;
    let cache = forward(&stale, batch.x.view()).unwrap();
    let grads = gradients(&cache, &batch, &stale, &cfg).unwrap();
    sgd_step(&mut stale, &grads, 2.0 * cfg.eta).unwrap();
    assert_ne!(trained.params, stale);
}

fn planted(n_per: usize, seed: u64) -> SignedGraph {
    generate_planted_partition(&PlantedPartitionParams {
        sizes: vec![n_per, n_per],
        p_in: 0.3,
        p_out: 0.3,
        flip_noise: 0.0,
        seed,
    })
    .unwrap()
    .graph
}

#[test]
fn loss_trace_trends_down_with_preset_learning_rate() {
    let g = planted(50, 1);
    let m = build_matrices(&g, 1.0, 1.0).unwrap();
    let mut cfg = layer_cfg(100, 32, true);
    cfg.alpha = 16.0;
    cfg.beta = 25.0;
    cfg.gamma = 1.0;
    cfg.lambda = 0.05;
    cfg.eta = 0.025;
    cfg.batch_size = 500;
    let out = train_layer(LayerInput::Adjacency(&g), &m.lplus, &m.lminus, &cfg).unwrap();
    assert_eq!(out.trace.len(), 80);
    for w in out.trace.windows(2) {
        assert!(
            w[1].total <= w[0].total + 0.02 * w[0].total.abs(),
            "{} -> {}",
            w[0].total,
            w[1].total
        );
    }
    assert!(out.trace.last().unwrap().total < out.trace[0].total);
}

#[test]
fn training_is_deterministic_per_seed() {
    let g = planted(20, 2);
    let m = build_matrices(&g, 1.0, 1.0).unwrap();
    let mut cfg = layer_cfg(40, 8, true);
    cfg.batch_size = 16;
    cfg.max_iters = 5;
    let run = || train_layer(LayerInput::Adjacency(&g), &m.lplus, &m.lminus, &cfg).unwrap();
    let (a, b) = (run(), run());
    let bits = |t: &[sbne_core::autoencoder::LossTerms]| t.iter().map(|x| x.total.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.trace), bits(&b.trace));
    assert_eq!(a.params, b.params);
}

#[test]
fn plain_reconstruction_improves() {
    let g = random_mixed_graph(10, 0.4, 6);
    let m = build_matrices(&g, 1.0, 1.0).unwrap();
    let mut cfg = layer_cfg(10, 4, true);
    cfg.alpha = 0.0;
    cfg.lambda = 0.0;
    cfg.beta = 1.0;
    cfg.gamma = 1.0;
    cfg.eta = 0.5;
    let out = train_layer(LayerInput::Adjacency(&g), &m.lplus, &m.lminus, &cfg).unwrap();
    assert!(out.trace.last().unwrap().reconstruction < out.trace[0].reconstruction);
}

#[test]
fn divergence_is_reported() {
    let g = planted(10, 3);
    let m = build_matrices(&g, 1.0, 1.0).unwrap();
    let mut cfg = layer_cfg(20, 4, true);
    cfg.eta = 1e300;
    cfg.lambda = 1e10;
    let err = train_layer(LayerInput::Adjacency(&g), &m.lplus, &m.lminus, &cfg).unwrap_err();
    assert!(err.is_numeric(), "{err}");
}

#[test]
fn initial_loss_is_permutation_invariant_for_symmetric_weights() {
    let g = random_mixed_graph(9, 0.5, 10);
    let perm = [4usize, 0, 8, 2, 7, 1, 6, 3, 5];
    let edges: Vec<_> = g.edges().iter().map(|e| (perm[e.i], perm[e.j], e.weight)).collect();
    let h = SignedGraph::from_indexed(9, &edges).unwrap();

    let cfg = layer_cfg(9, 3, true);
    let mut p = LayerParams::zeros(9, 3);
    for k in 0..3 {
        p.w1.row_mut(k).fill(0.1 * (k as f64 + 1.0));
        p.w2.column_mut(k).fill(-0.2 * (k as f64 + 1.0));
    }
    let lg = loss(&p, &full_batch(&g, LayerInput::Adjacency(&g), &cfg), &cfg).unwrap();
    let lh = loss(&p, &full_batch(&h, LayerInput::Adjacency(&h), &cfg), &cfg).unwrap();
    assert!((lg.total - lh.total).abs() < 1e-12);
}

#[test]
fn batch_laplacian_only_counts_internal_edges() {
    let g = SignedGraph::from_indexed(4, &[(0, 1, 1.0), (1, 2, -1.0), (2, 3, 1.0)]).unwrap();
    let cfg = layer_cfg(4, 2, true);
    let m = build_matrices(&g, 1.0, 1.0).unwrap();
    let b = make_batch(LayerInput::Adjacency(&g), &m.lplus, &m.lminus, &[2, 1], &cfg);
    assert_eq!(b.lplus, CsrMatrix::from_triplets(2, vec![]));
    assert_eq!(b.lminus.to_dense(), ndarray::array![[1.0, -1.0], [-1.0, 1.0]]);
    assert_eq!(b.penalty.unwrap().row(0).to_vec(), vec![1.0, 15.0, 1.0, 5.0]);
}

proptest! {
    #[test]
    fn activations_stay_inside_open_interval(seed in 0u64..1000, scale in 0.1f64..3.0) {
        let mut r = rng(seed);
        let x = Array2::from_shape_fn((5, 6), |_| r.random_range(-1.0..1.0));
        let mut p = random_params(6, 4, seed);
        p.w1 *= scale;
        p.w2 *= scale;
        let c = forward(&p, x.view()).unwrap();
        prop_assert!(c.h.iter().chain(c.xhat.iter()).all(|v| v.abs() < 1.0));
    }
}
