//! Tab-separated edge lists (`src<TAB>dst<TAB>sign`, `#` comments) and
//! `node_id<TAB>cluster` label files.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{DuplicatePolicy, GraphBuilder, SignedGraph};
use crate::error::{Error, Result};
use crate::persist::atomic_write;

pub fn load_edge_list(path: impl AsRef<Path>, policy: DuplicatePolicy) -> Result<SignedGraph> {
    read_edge_list(File::open(path)?, policy)
}

/// Parses an edge list. Node ids receive dense indices in order of first
/// appearance. Lines without a tab fall back to whitespace splitting so that
/// space-separated exports also load.
pub fn read_edge_list(reader: impl Read, policy: DuplicatePolicy) -> Result<SignedGraph> {
    let mut builder = GraphBuilder::new(policy);
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split_whitespace().collect()
        };
        let [src, dst, sign] = fields[..] else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        };
        let weight: f64 = sign.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid sign {sign:?}"),
        })?;
        builder.add_edge(src, dst, weight, line_no)?;
    }
    Ok(builder.build())
}

pub fn save_edge_list(g: &SignedGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    write_edge_list(g, &mut out)?;
    atomic_write(path.as_ref(), &out)?;
    Ok(())
}

pub fn write_edge_list(g: &SignedGraph, mut out: impl Write) -> Result<()> {
    writeln!(out, "# nodes: {} edges: {}", g.n(), g.num_edges())?;
    for e in g.edges() {
        writeln!(out, "{}\t{}\t{}", g.node_id(e.i), g.node_id(e.j), e.weight)?;
    }
    Ok(())
}

pub fn save_labels(g: &SignedGraph, labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        writeln!(out, "{}\t{}", g.node_id(i), label)?;
    }
    atomic_write(path.as_ref(), &out)?;
    Ok(())
}

/// Reads `node_id<TAB>cluster` lines and aligns them to `g`'s node indices.
/// Every node of `g` must receive a label; ids unknown to `g` are ignored.
pub fn load_labels(g: &SignedGraph, path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let mut labels = vec![None; g.n()];
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: "expected node_id<TAB>cluster".into(),
        })?;
        let label: usize = label.trim().parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("invalid cluster index {label:?}"),
        })?;
        if let Some(i) = g.index_of(id) {
            labels[i] = Some(label);
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("no label for node {}", g.node_id(i)),
            })
        })
        .collect()
}
