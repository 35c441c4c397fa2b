//! Brute-force reference implementations over dense matrices and explicit
//! double loops. Deliberately naive; shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use ndarray::Array2;

fn dist(h: &Array2<f64>, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..h.ncols() {
        s += (h[[i, k]] - h[[j, k]]).powi(2);
    }
    s.sqrt()
}

fn pos(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

fn neg(a: f64) -> f64 {
    if a < 0.0 {
        -a
    } else {
        0.0
    }
}

pub fn aer(a: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let (mut pn, mut pd, mut nn, mut nd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            pn += pos(a[[i, j]]) * dist(h, i, j);
            pd += pos(a[[i, j]]);
            nn += neg(a[[i, j]]) * dist(h, i, j);
            nd += neg(a[[i, j]]);
        }
    }
    (pn / pd) / (nn / nd)
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

pub fn mer(a: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            if a[[i, j]] > 0.0 {
                p.push(dist(h, i, j));
            }
            if a[[i, j]] < 0.0 {
                q.push(dist(h, i, j));
            }
        }
    }
    median_of(p) / median_of(q)
}

pub fn anr(a: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let (mut ps, mut np, mut ns, mut nn) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (mut dp, mut dn, mut sp, mut sn) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            dp += pos(a[[i, j]]);
            dn += neg(a[[i, j]]);
            sp += pos(a[[i, j]]) * dist(h, i, j);
            sn += neg(a[[i, j]]) * dist(h, i, j);
        }
        if dp > 0.0 {
            ps += sp / dp;
            np += 1.0;
        }
        if dn > 0.0 {
            ns += sn / dn;
            nn += 1.0;
        }
    }
    (ps / np) / (ns / nn)
}

pub fn error_rate(a: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = a.nrows();
    let (mut bad, mut total) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let delta = if labels[i] == labels[j] { 1.0 } else { 0.0 };
            bad += neg(a[[i, j]]) * delta + pos(a[[i, j]]) * (1.0 - delta);
            total += a[[i, j]].abs();
        }
    }
    bad / total
}

/// Enumerates every (positive, negative) pair.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Step-wise area under the precision/recall curve, one point per distinct
/// score threshold.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let relevant = labels.iter().filter(|&&l| l).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (s, &l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1.0;
                if l {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / relevant;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    ap
}

/// Must-link and cannot-link sums `(½ Σ A⁺ᵢⱼ‖hᵢ − hⱼ‖², −½ Σ A⁻ᵢⱼ‖hᵢ − hⱼ‖²)`.
pub fn pairwise_sums(a: &Array2<f64>, h: &Array2<f64>) -> (f64, f64) {
    let n = a.nrows();
    let (mut ml, mut cl) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let d = dist(h, i, j);
            ml += pos(a[[i, j]]) * d * d / 2.0;
            cl -= neg(a[[i, j]]) * d * d / 2.0;
        }
    }
    (ml, cl)
}

/// Max relative error of the analytic layer gradients against centered
/// differences of the loss with step 1e-5.
pub fn gradient_check(
    params: &sbne_core::autoencoder::LayerParams,
    batch: &sbne_core::autoencoder::Batch,
    cfg: &sbne_core::autoencoder::LayerConfig,
) -> f64 {
    use sbne_core::autoencoder::{forward, gradients, loss, LayerParams};
    let step = 1e-5;
    let cache = forward(params, batch.x.view()).unwrap();
    let analytic = gradients(&cache, batch, params, cfg).unwrap();
    let objective = |p: &LayerParams| loss(p, batch, cfg).unwrap().total;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);

    let mut worst: f64 = 0.0;
    macro_rules! check {
        ($field:ident, $grad:expr) => {
            for (idx, &a) in $grad.indexed_iter() {
                let mut plus = params.clone();
                plus.$field[idx] += step;
                let mut minus = params.clone();
                minus.$field[idx] -= step;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * step);
                worst = worst.max(rel(a, numeric));
            }
        };
    }
    check!(w1, analytic.w1);
    check!(w2, analytic.w2);
    check!(b1, analytic.b1);
    check!(b2, analytic.b2);
    worst
}
