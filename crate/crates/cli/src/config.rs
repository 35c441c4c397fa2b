//! Flat `key = value` settings and their resolution into a [`StackConfig`].
//!
//! Precedence: command-line flags > config file > preset > built-in
//! defaults. The preset itself may come from a flag or the config file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use sbne_core::stack::{layer_ladder, DatasetProfile, StackConfig, TaskPreset};

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "preset", "task", "dims", "layers", "dim", "beta", "gamma", "alpha1", "alphak", "lambda1", "lambdak", "eta1",
    "etak", "batch", "batch1", "batchk", "iters", "iters1", "itersk", "tol", "seed",
];

pub type Settings = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> CliResult<Settings> {
    let mut out = Settings::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = k.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key {key:?}", no + 1)));
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> CliResult<Settings> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// `overrides` wins on every key present in both.
pub fn merge(mut base: Settings, overrides: Settings) -> Settings {
    base.extend(overrides);
    base
}

pub fn parse_value<T: FromStr>(s: &Settings, key: &str) -> CliResult<Option<T>> {
    s.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::Config(format!("invalid value {v:?} for {key}")))
        })
        .transpose()
}

/// Comma- or dash-separated list of positive integers.
pub fn parse_dims(v: &str) -> CliResult<Vec<usize>> {
    v.split([',', '-'])
        .map(|t| t.trim().parse::<usize>().ok().filter(|&d| d > 0))
        .collect::<Option<Vec<_>>>()
        .filter(|d| !d.is_empty())
        .ok_or_else(|| CliError::Config(format!("invalid dims {v:?}")))
}

pub fn seed(s: &Settings) -> CliResult<u64> {
    Ok(parse_value(s, "seed")?.unwrap_or(0))
}

/// Builds the stack configuration for a graph with `n` nodes.
///
/// `dims` lists the hidden sizes; a leading entry equal to `n` is accepted
/// and dropped. Without `dims`, `layers`/`dim` select [`layer_ladder`] sizes.
pub fn resolve_stack(s: &Settings, n: usize, default_task: TaskPreset) -> CliResult<StackConfig> {
    let profile = match s.get("preset") {
        Some(p) => p.parse::<DatasetProfile>()?,
        None => DatasetProfile::Wiki,
    };
    let task = match s.get("task") {
        Some(t) => t.parse::<TaskPreset>()?,
        None => default_task,
    };
    let mut cfg = StackConfig::preset_defaults(profile, task, n);

    if let Some(v) = s.get("dims") {
        let mut dims = parse_dims(v)?;
        if dims.len() > 1 && dims[0] == n {
            dims.remove(0);
        }
        cfg = cfg.with_hidden_dims(&dims);
    } else if s.contains_key("layers") || s.contains_key("dim") {
        let l: usize = parse_value(s, "layers")?.unwrap_or(cfg.depth());
        let d: usize = parse_value(s, "dim")?.unwrap_or(cfg.embedding_dim());
        if l == 0 || d == 0 {
            return Err(CliError::Config("layers and dim must be positive".into()));
        }
        cfg = cfg.with_hidden_dims(&layer_ladder(n, d, l));
    }

    if let Some(b) = parse_value(s, "beta")? {
        cfg.beta = b;
    }
    match s.get("gamma").map(String::as_str) {
        None | Some("auto") => {}
        Some(_) => cfg.gamma = parse_value(s, "gamma")?,
    }
    if let Some(t) = parse_value(s, "tol")? {
        cfg.tol = t;
    }
    cfg.seed = seed(s)?;

    let (first, rest) = cfg.layers.split_first_mut().expect("presets have layers");
    macro_rules! per_layer {
        ($field:ident, $all:expr, $one:expr, $k:expr) => {
            if let Some(v) = $all {
                first.$field = v;
                rest.iter_mut().for_each(|l| l.$field = v);
            }
            if let Some(v) = $one {
                first.$field = v;
            }
            if let Some(v) = $k {
                rest.iter_mut().for_each(|l| l.$field = v);
            }
        };
    }
    per_layer!(alpha, None::<f64>, parse_value(s, "alpha1")?, parse_value(s, "alphak")?);
    per_layer!(
        lambda,
        None::<f64>,
        parse_value(s, "lambda1")?,
        parse_value(s, "lambdak")?
    );
    per_layer!(eta, None::<f64>, parse_value(s, "eta1")?, parse_value(s, "etak")?);
    per_layer!(
        batch_size,
        parse_value(s, "batch")?,
        parse_value(s, "batch1")?,
        parse_value(s, "batchk")?
    );
    per_layer!(
        max_iters,
        parse_value(s, "iters")?,
        parse_value(s, "iters1")?,
        parse_value(s, "itersk")?
    );

    cfg.validate()?;
    Ok(cfg)
}
