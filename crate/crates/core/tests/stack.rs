mod common;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sbne_core::autoencoder::{train_layer, LayerInput, LayerParams};
use sbne_core::balance::BalanceReport;
use sbne_core::graph::{build_matrices, generate_planted_partition, PlantedPartitionParams, SignedGraph};
use sbne_core::persist::{load_stack, save_stack};
use sbne_core::stack::*;
use sbne_core::Error;

fn planted(n_half: usize, seed: u64) -> SignedGraph {
    generate_planted_partition(&PlantedPartitionParams {
        sizes: vec![n_half, n_half],
        p_in: 0.2,
        p_out: 0.1,
        flip_noise: 0.0,
        seed,
    })
    .unwrap()
    .graph
}

fn small_config(n: usize, hidden: &[usize]) -> StackConfig {
    let mut c =
        StackConfig::preset_defaults(DatasetProfile::Wiki, TaskPreset::LinkPrediction, n).with_hidden_dims(hidden);
    for l in &mut c.layers {
        l.max_iters = 10;
    }
    c.seed = 5;
    c
}

#[test]
fn one_layer_stack_is_a_single_layer_run() {
    let g = planted(15, 1);
    let cfg = small_config(30, &[8]);
    let stack = train_stack(&g, &cfg).unwrap();
    let gamma = stack.gamma1;
    let m = build_matrices(&g, cfg.beta, gamma).unwrap();
    let single = train_layer(
        LayerInput::Adjacency(&g),
        &m.lplus,
        &m.lminus,
        &cfg.layer_config(0, gamma),
    )
    .unwrap();
    assert_eq!(stack.traces[0], single.trace);
    assert_eq!(stack.layers[0], single.params);
    assert_eq!(stack.embeddings(), &single.hidden);
}

#[test]
fn wiki_preset_dims_for_wiki_sized_graph() {
    let c = StackConfig::preset_defaults(DatasetProfile::Wiki, TaskPreset::LinkPrediction, 7118);
    assert_eq!(c.layer_dims, vec![7118, 256, 64]);
    assert_eq!(c.embedding_dim(), DEFAULT_DIM);
}

#[test]
fn adding_a_layer_leaves_earlier_layers_unchanged() {
    let g = planted(15, 2);
    let two = train_stack(&g, &small_config(30, &[16, 8])).unwrap();
    let three = train_stack(&g, &small_config(30, &[16, 8, 4])).unwrap();
    assert_eq!(two.layers[..], three.layers[..2]);
    assert_eq!(two.embeddings().ncols(), 8);
    assert_eq!(three.embeddings().dim(), (30, 4));
}

#[test]
fn stack_is_deterministic_per_seed() {
    let g = planted(15, 3);
    let cfg = small_config(30, &[16, 8]);
    let a = train_stack(&g, &cfg).unwrap();
    let b = train_stack(&g, &cfg).unwrap();
    assert_eq!(a.embeddings(), b.embeddings());
    let mut other = cfg.clone();
    other.seed = 6;
    assert_ne!(train_stack(&g, &other).unwrap().embeddings(), a.embeddings());
}

/// Independent plain stacked auto-encoder: full-batch gradient descent on
/// `‖X̂ − X‖²/2n + λ/2 ‖W‖²` with a hand-written backward pass.
fn plain_sae_traces(x0: Array2<f64>, cfg: &StackConfig) -> Vec<Vec<f64>> {
    let mut x = x0;
    let mut traces = Vec::new();
    for k in 0..cfg.depth() {
        let lc = cfg.layer_config(k, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(lc.seed);
        let p = LayerParams::glorot(lc.dim_in, lc.dim_hidden, &mut rng);
        let (mut w1, mut w2, mut b1, mut b2) = (p.w1, p.w2, p.b1, p.b2);
        let n = x.nrows() as f64;
        let mut trace = Vec::new();
        for _ in 0..lc.max_iters {
            let h = (x.dot(&w1.t()) + &b1).mapv(f64::tanh);
            let y = (h.dot(&w2.t()) + &b2).mapv(f64::tanh);
            let r = &y - &x;
            let loss = r.mapv(|v| v * v).sum() / (2.0 * n)
                + lc.lambda * 0.5 * (w1.mapv(|v| v * v).sum() + w2.mapv(|v| v * v).sum());
            trace.push(loss);
            let d3 = &r * &y.mapv(|v| 1.0 - v * v);
            let d2 = d3.dot(&w2) * h.mapv(|v| 1.0 - v * v);
            let gw1 = d2.t().dot(&x) / n + &w1 * lc.lambda;
            let gw2 = d3.t().dot(&h) / n + &w2 * lc.lambda;
            let gb1: Array1<f64> = d2.sum_axis(Axis(0)) / n;
            let gb2: Array1<f64> = d3.sum_axis(Axis(0)) / n;
            w1 = w1 - gw1 * lc.eta;
            w2 = w2 - gw2 * lc.eta;
            b1 = b1 - gb1 * lc.eta;
            b2 = b2 - gb2 * lc.eta;
        }
        x = (x.dot(&w1.t()) + &b1).mapv(f64::tanh);
        traces.push(trace);
    }
    traces
}

#[test]
fn degenerate_stack_matches_plain_autoencoder() {
    let g = planted(12, 4);
    let mut cfg = small_config(24, &[10, 5]);
    cfg.beta = 1.0;
    cfg.gamma = Some(1.0);
    cfg.tol = 0.0;
    for l in &mut cfg.layers {
        l.alpha = 0.0;
        l.batch_size = 1000;
    }
    let stack = train_stack(&g, &cfg).unwrap();
    let oracle = plain_sae_traces(g.dense_adjacency().unwrap(), &cfg);
    for (ours, theirs) in stack.traces.iter().zip(&oracle) {
        assert_eq!(ours.len(), theirs.len());
        for (a, b) in ours.iter().zip(theirs) {
            assert!((a.total - b).abs() < 1e-8, "{} vs {b}", a.total);
        }
    }
}

#[test]
fn planted_partition_embedding_is_balanced() {
    let g = planted(50, 5);
    let mut cfg = StackConfig::preset_defaults(DatasetProfile::Wiki, TaskPreset::LinkPrediction, g.n());
    cfg.seed = 1;
    let stack = train_stack(&g, &cfg).unwrap();
    let report = BalanceReport::compute(&g, stack.embeddings()).unwrap();
    assert!(report.all_below_one(), "{report:?}");
}

#[test]
fn divergence_names_the_layer() {
    let g = planted(10, 6);
    let mut cfg = small_config(20, &[8, 4]);
    cfg.layers[1].eta = 1e300;
    cfg.layers[1].lambda = 1e10;
    match train_stack(&g, &cfg) {
        Err(Error::Divergence { layer, .. }) => assert_eq!(layer, 2),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn graph_size_must_match_input_dim() {
    let g = planted(10, 7);
    assert!(matches!(
        train_stack(&g, &small_config(21, &[4])),
        Err(Error::ShapeMismatch(_))
    ));
}

#[test]
fn auto_gamma_needs_negative_edges() {
    let g = SignedGraph::from_indexed(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    assert!(matches!(
        train_stack(&g, &small_config(3, &[2])),
        Err(Error::NoNegativeEdges)
    ));
}

#[test]
fn decoder_chain_has_input_shape() {
    let g = planted(10, 8);
    let stack = train_stack(&g, &small_config(20, &[8, 4])).unwrap();
    let x = reconstruct_through_stack(&stack).unwrap();
    assert_eq!(x.dim(), (20, 20));
    assert!(x.iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn saved_stack_round_trips() {
    let g = planted(10, 9);
    let stack = train_stack(&g, &small_config(20, &[8, 4])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_stack(&stack, g.node_ids(), dir.path()).unwrap();
    for name in [
        "stack.json",
        "layer1_w1.bin",
        "layer2_b2.bin",
        "loss_layer2.csv",
        "embeddings.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let loaded = load_stack(dir.path()).unwrap();
    assert_eq!(loaded.layers, stack.layers);
    assert_eq!(&loaded.embeddings, stack.embeddings());
    assert_eq!(loaded.config, stack.config);
    assert_eq!(loaded.node_ids, g.node_ids());
}
