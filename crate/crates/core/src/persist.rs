//! On-disk formats: binary weight matrices, embedding CSVs and trained
//! stack directories. Every file is written atomically (temp file + rename).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{write_loss_trace, LayerParams};
use crate::error::{Error, Result};
use crate::stack::{StackConfig, TrainedStack};

const MAGIC: &[u8; 8] = b"SBNEMAT\0";

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// 16-byte header (`SBNEMAT\0`, rows u32, cols u32, little-endian) followed
/// by row-major little-endian `f64`s.
pub fn encode_matrix(m: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    let bad = |message: &str| Error::MatrixFormat {
        path: path.to_path_buf(),
        message: message.to_owned(),
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing header"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(bad(&format!(
            "expected {rows}x{cols} values, found {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(&e.to_string()))
}

pub fn save_matrix(m: &Array2<f64>, path: &Path) -> Result<()> {
    Ok(atomic_write(path, &encode_matrix(m))?)
}

pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    decode_matrix(&fs::read(path)?, path)
}

/// CSV with header `node_id,h0,…,h{d−1}`. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn embeddings_csv(node_ids: &[String], h: &Array2<f64>) -> Result<Vec<u8>> {
    if node_ids.len() != h.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} node ids for {} embedding rows",
            node_ids.len(),
            h.nrows()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("node_id".to_owned())
        .chain((0..h.ncols()).map(|k| format!("h{k}")))
        .collect();
    w.write_record(&header)?;
    for (id, row) in node_ids.iter().zip(h.rows()) {
        let record: Vec<String> = std::iter::once(id.clone())
            .chain(row.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&record)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn save_embeddings(node_ids: &[String], h: &Array2<f64>, path: &Path) -> Result<()> {
    Ok(atomic_write(path, &embeddings_csv(node_ids, h)?)?)
}

pub fn load_embeddings(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len().saturating_sub(1);
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Parse {
                line: line + 2,
                message: format!("expected {} fields, found {}", d + 1, rec.len()),
            });
        }
        ids.push(rec[0].to_owned());
        for field in rec.iter().skip(1) {
            values.push(field.parse::<f64>().map_err(|e| Error::Parse {
                line: line + 2,
                message: format!("bad value {field:?}: {e}"),
            })?);
        }
    }
    let h = Array2::from_shape_vec((ids.len(), d), values).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok((ids, h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StackMeta {
    layer_dims: Vec<usize>,
    gamma1: f64,
    seed: u64,
    config: StackConfig,
}

fn layer_file(dir: &Path, k: usize, part: &str) -> PathBuf {
    dir.join(format!("layer{k}_{part}.bin"))
}

/// Writes `stack.json`, `layer{k}_{w1,w2,b1,b2}.bin`, `loss_layer{k}.csv`
/// and `embeddings.csv` into `dir`, creating it if needed.
pub fn save_stack(stack: &TrainedStack, node_ids: &[String], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = StackMeta {
        layer_dims: stack.config.layer_dims.clone(),
        gamma1: stack.gamma1,
        seed: stack.config.seed,
        config: stack.config.clone(),
    };
    atomic_write(&dir.join("stack.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    for (i, p) in stack.layers.iter().enumerate() {
        let k = i + 1;
        save_matrix(&p.w1, &layer_file(dir, k, "w1"))?;
        save_matrix(&p.w2, &layer_file(dir, k, "w2"))?;
        save_matrix(&p.b1.clone().insert_axis(ndarray::Axis(0)), &layer_file(dir, k, "b1"))?;
        save_matrix(&p.b2.clone().insert_axis(ndarray::Axis(0)), &layer_file(dir, k, "b2"))?;
        let mut trace = Vec::new();
        write_loss_trace(&stack.traces[i], &mut trace)?;
        atomic_write(&dir.join(format!("loss_layer{k}.csv")), &trace)?;
    }
    save_embeddings(node_ids, stack.embeddings(), &dir.join("embeddings.csv"))
}

/// Loaded form of a stack directory.
#[derive(Debug, Clone)]
pub struct SavedStack {
    pub config: StackConfig,
    pub gamma1: f64,
    pub layers: Vec<LayerParams>,
    pub node_ids: Vec<String>,
    pub embeddings: Array2<f64>,
}

pub fn load_stack(dir: &Path) -> Result<SavedStack> {
    let meta: StackMeta = serde_json::from_slice(&fs::read(dir.join("stack.json"))?)?;
    let row = |m: Array2<f64>| Array1::from_iter(m);
    let mut layers = Vec::new();
    for k in 1..meta.layer_dims.len() {
        layers.push(LayerParams {
            w1: load_matrix(&layer_file(dir, k, "w1"))?,
            w2: load_matrix(&layer_file(dir, k, "w2"))?,
            b1: row(load_matrix(&layer_file(dir, k, "b1"))?),
            b2: row(load_matrix(&layer_file(dir, k, "b2"))?),
        });
    }
    let (node_ids, embeddings) = load_embeddings(&dir.join("embeddings.csv"))?;
    Ok(SavedStack {
        config: meta.config,
        gamma1: meta.gamma1,
        layers,
        node_ids,
        embeddings,
    })
}
