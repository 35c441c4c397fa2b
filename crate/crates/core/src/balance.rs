//! Structural-balance ratios of an embedding: positive-pair distances
//! relative to negative-pair distances. Values below 1 mean positively linked
//! nodes sit closer together than negatively linked ones.
//!
//! Distances are Euclidean between embedding rows and are computed per edge.

use std::fmt;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check(g: &SignedGraph, h: &Array2<f64>) -> Result<()> {
    if h.nrows() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} rows, graph has {} nodes",
            h.nrows(),
            g.n()
        )));
    }
    if g.num_positive() == 0 || g.num_negative() == 0 {
        return Err(Error::MissingEdgeClass);
    }
    Ok(())
}

/// `num / den`, with a zero denominator mapped to `+∞` (or NaN when the
/// numerator is zero too).
fn ratio(num: f64, den: f64, what: &str) -> f64 {
    if den == 0.0 {
        log::warn!("{what}: negative-link distances are all zero");
        if num == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Average edge ratio: weighted mean positive-link distance over weighted
/// mean negative-link distance.
pub fn aer(g: &SignedGraph, h: &Array2<f64>) -> Result<f64> {
    check(g, h)?;
    let (mut pos_d, mut pos_w, mut neg_d, mut neg_w) = (0.0, 0.0, 0.0, 0.0);
    for e in g.edges() {
        let d = euclidean(h.row(e.i), h.row(e.j));
        if e.is_positive() {
            pos_d += e.weight * d;
            pos_w += e.weight;
        } else {
            neg_d += -e.weight * d;
            neg_w += -e.weight;
        }
    }
    Ok(ratio(pos_d / pos_w, neg_d / neg_w, "AER"))
}

/// Median with the even-count convention of averaging the two central values.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Median edge ratio.
pub fn mer(g: &SignedGraph, h: &Array2<f64>) -> Result<f64> {
    check(g, h)?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for e in g.edges() {
        let d = euclidean(h.row(e.i), h.row(e.j));
        if e.is_positive() {
            pos.push(d);
        } else {
            neg.push(d);
        }
    }
    Ok(ratio(median(&mut pos), median(&mut neg), "MER"))
}

/// Average node ratio: per-node degree-weighted mean distances, averaged over
/// the nodes having links of that sign.
pub fn anr(g: &SignedGraph, h: &Array2<f64>) -> Result<f64> {
    check(g, h)?;
    let (mut pos_sum, mut n_p, mut neg_sum, mut n_n) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..g.n() {
        let (mut pd, mut pw, mut nd, mut nw) = (0.0, 0.0, 0.0, 0.0);
        for (j, w) in g.neighbors(i) {
            let d = euclidean(h.row(i), h.row(j));
            if w > 0.0 {
                pd += w * d;
                pw += w;
            } else {
                nd += -w * d;
                nw += -w;
            }
        }
        if pw > 0.0 {
            pos_sum += pd / pw;
            n_p += 1;
        }
        if nw > 0.0 {
            neg_sum += nd / nw;
            n_n += 1;
        }
    }
    Ok(ratio(pos_sum / n_p as f64, neg_sum / n_n as f64, "ANR"))
}

/// A ratio that may be infinite or undefined. Serialized as a number,
/// the string `"inf"`, or `null` respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub f64);

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        (!self.0.is_nan()).then_some(self.0)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_nan() {
            s.serialize_none()
        } else if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
            Null,
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ratio(v)),
            Raw::Str(s) if s == "inf" => Ok(Ratio(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected ratio {s:?}"))),
            Raw::Null => Ok(Ratio(f64::NAN)),
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            None => f.write_str("undefined"),
            Some(v) if v.is_infinite() => f.write_str("inf"),
            Some(v) => write!(f, "{v:.6}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub aer: Ratio,
    pub mer: Ratio,
    pub anr: Ratio,
    /// Nodes with at least one positive link.
    pub n_p: usize,
    /// Nodes with at least one negative link.
    pub n_n: usize,
}

impl BalanceReport {
    pub fn compute(g: &SignedGraph, h: &Array2<f64>) -> Result<Self> {
        let count = |positive: bool| {
            (0..g.n())
                .filter(|&i| g.neighbors(i).any(|(_, w)| (w > 0.0) == positive))
                .count()
        };
        Ok(Self {
            aer: Ratio(aer(g, h)?),
            mer: Ratio(mer(g, h)?),
            anr: Ratio(anr(g, h)?),
            n_p: count(true),
            n_n: count(false),
        })
    }

    pub fn all_below_one(&self) -> bool {
        [self.aer, self.mer, self.anr]
            .iter()
            .all(|r| r.value().is_some_and(|v| v < 1.0))
    }
}

/// Aligned text table, one row per labelled report.
pub fn balance_table(rows: &[(String, BalanceReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>6}  {:>6}\n",
        "layer", "AER", "MER", "ANR", "n_p", "n_n"
    );
    for (label, r) in rows {
        out += &format!(
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>6}  {:>6}\n",
            label,
            r.aer.to_string(),
            r.mer.to_string(),
            r.anr.to_string(),
            r.n_p,
            r.n_n
        );
    }
    out
}
