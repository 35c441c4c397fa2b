use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sbne_core::balance::{balance_table, BalanceReport};
use sbne_core::downstream::{
    error_rate, kmeans, link_sign_pipeline, EdgeOperator, EmbeddingMethod, KMeansOptions, LogisticOptions,
    OperatorSummary, PipelineConfig, PipelineResult,
};
use sbne_core::graph::{
    generate_planted_partition, load_edge_list, save_edge_list, save_labels, PlantedPartitionParams,
};
use sbne_core::persist::save_stack;
use sbne_core::spectral::{spectral_embed, SpectralMethod};
use sbne_core::stack::{train_stack, StackConfig, TaskPreset, DEFAULT_DIM};
use sbne_core::{DuplicatePolicy, Error, SignedGraph};

use crate::args::*;
use crate::config::{self, parse_value, resolve_stack, Settings};
use crate::error::{CliError, CliResult};
use crate::manifest::{write_json, RunManifest};

fn policy(s: &str) -> CliResult<DuplicatePolicy> {
    match s {
        "strict" => Ok(DuplicatePolicy::Strict),
        "keep-first" | "keep_first" => Ok(DuplicatePolicy::KeepFirst),
        other => Err(CliError::Config(format!("unknown duplicate policy {other:?}"))),
    }
}

fn settings(h: &HyperArgs) -> CliResult<Settings> {
    let file = match &h.config {
        Some(p) => config::read_config_file(p)?,
        None => Settings::new(),
    };
    Ok(config::merge(file, h.to_settings()))
}

/// Loads the graph and records the digests of every input file.
fn load_inputs(input: &InputArgs, hyper: &HyperArgs, manifest: &mut RunManifest) -> CliResult<SignedGraph> {
    let policy = policy(&input.duplicates)?;
    let g = manifest.time("load", || load_edge_list(&input.edges, policy))?;
    manifest.add_input(&input.edges)?;
    if let Some(c) = &hyper.config {
        manifest.add_input(c)?;
    }
    Ok(g)
}

fn parse_operators(s: &str) -> CliResult<Vec<EdgeOperator>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(EdgeOperator::ALL.to_vec());
    }
    s.split(',').map(|t| Ok(t.trim().parse::<EdgeOperator>()?)).collect()
}

enum Method {
    Stack,
    Spectral(SpectralMethod),
}

fn parse_method(s: &str) -> CliResult<Method> {
    match s.to_ascii_lowercase().as_str() {
        "dnesbp" | "dne-sbp" => Ok(Method::Stack),
        other => Ok(Method::Spectral(other.parse()?)),
    }
}

fn embedding_method(method: &str, s: &Settings, n: usize, task: TaskPreset) -> CliResult<EmbeddingMethod> {
    Ok(match parse_method(method)? {
        Method::Stack => EmbeddingMethod::Dnesbp(resolve_stack(s, n, task)?),
        Method::Spectral(m) => EmbeddingMethod::Spectral {
            method: m,
            dim: parse_value(s, "dim")?.unwrap_or(DEFAULT_DIM.min(n)),
        },
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct LayerBalance {
    layer: usize,
    #[serde(flatten)]
    report: BalanceReport,
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let s = settings(&args.hyper)?;
    let mut manifest = RunManifest::new("train", config::seed(&s)?);
    let g = load_inputs(&args.input, &args.hyper, &mut manifest)?;
    let cfg = resolve_stack(&s, g.n(), TaskPreset::LinkPrediction)?;
    let stack = manifest.time("train", || train_stack(&g, &cfg))?;
    create_dir(&args.out)?;
    manifest.time("save", || save_stack(&stack, g.node_ids(), &args.out))?;

    let reports: sbne_core::Result<Vec<BalanceReport>> =
        stack.hidden.iter().map(|h| BalanceReport::compute(&g, h)).collect();
    writeln!(
        out,
        "trained {} layer(s) {:?} with gamma1 = {}",
        stack.layers.len(),
        stack.config.layer_dims,
        stack.gamma1
    )?;
    match reports {
        Ok(reports) => {
            let rows: Vec<LayerBalance> = reports
                .into_iter()
                .enumerate()
                .map(|(i, report)| LayerBalance { layer: i + 1, report })
                .collect();
            write_json(&args.out.join("balance.json"), &rows)?;
            let table: Vec<(String, BalanceReport)> =
                rows.iter().map(|r| (r.layer.to_string(), r.report.clone())).collect();
            write!(out, "{}", balance_table(&table))?;
        }
        Err(Error::MissingEdgeClass) => log::warn!("balance ratios need both edge signs; skipped"),
        Err(e) => return Err(e.into()),
    }

    manifest.config = json!({
        "duplicates": args.input.duplicates,
        "gamma1": stack.gamma1,
        "stack": stack.config,
    });
    manifest.write(&args.out)
}

fn split_table(summary: &[OperatorSummary]) -> String {
    let splits = summary.first().map_or(0, |s| s.auc.len());
    let mut t = format!("{:<8}", "operator");
    for k in 1..=splits {
        t += &format!("  {:>7}", format!("AUC{k}"));
    }
    t += &format!("  {:>8}  {:>8}\n", "meanAUC", "meanAP");
    for s in summary {
        t += &format!("{:<8}", s.operator.to_string());
        for a in &s.auc {
            t += &format!("  {a:>7.4}");
        }
        t += &format!("  {:>8.4}  {:>8.4}\n", s.mean_auc, s.mean_ap);
    }
    t
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    method: String,
    fraction: f64,
    splits: usize,
    seed: u64,
    #[serde(flatten)]
    result: &'a PipelineResult,
}

pub fn predict(args: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let s = settings(&args.hyper)?;
    let seed = config::seed(&s)?;
    let mut manifest = RunManifest::new("predict", seed);
    let g = load_inputs(&args.input, &args.hyper, &mut manifest)?;
    let method = embedding_method(&args.method, &s, g.n(), TaskPreset::LinkPrediction)?;
    let pc = PipelineConfig {
        fraction: args.fraction,
        operators: parse_operators(&args.operator)?,
        splits: args.splits,
        seed,
        stratified: args.stratified,
        logistic: LogisticOptions::default(),
    };
    let result = manifest.time("pipeline", || link_sign_pipeline(&g, &method, &pc))?;
    write!(out, "{}", split_table(&result.summary))?;
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let report = PredictOutput {
            method: method.name(),
            fraction: pc.fraction,
            splits: pc.splits,
            seed,
            result: &result,
        };
        write_json(&dir.join("predict.json"), &report)?;
        manifest.config = json!({ "method": method, "pipeline": pc, "duplicates": args.input.duplicates });
        manifest.write(dir)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ClusterRow {
    k: usize,
    error_rate: f64,
    wcss: f64,
}

#[derive(Serialize)]
struct ClusterOutput {
    method: String,
    seed: u64,
    rows: Vec<ClusterRow>,
    average: f64,
}

pub fn cluster(args: &ClusterArgs, out: &mut dyn Write) -> CliResult<()> {
    if args.k_min == 0 || args.k_min > args.k_max {
        return Err(CliError::Config(format!(
            "invalid k range {}..{}",
            args.k_min, args.k_max
        )));
    }
    let s = settings(&args.hyper)?;
    let seed = config::seed(&s)?;
    let mut manifest = RunManifest::new("cluster", seed);
    let g = load_inputs(&args.input, &args.hyper, &mut manifest)?;
    let method = parse_method(&args.method)?;
    let mut stack_cfg: Option<StackConfig> = None;
    let shared = match method {
        Method::Stack => {
            let cfg = resolve_stack(&s, g.n(), TaskPreset::CommunityDetection)?;
            let h = manifest.time("embed", || train_stack(&g, &cfg))?.embeddings().clone();
            stack_cfg = Some(cfg);
            Some(h)
        }
        Method::Spectral(_) => None,
    };
    let opts = KMeansOptions {
        restarts: args.restarts,
        seed,
        ..Default::default()
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    manifest.time("cluster", || -> CliResult<()> {
        for k in args.k_min..=args.k_max {
            let h = match (&method, &shared) {
                (Method::Spectral(m), _) => spectral_embed(&g, *m, k)?.h,
                (_, Some(h)) => h.clone(),
                _ => unreachable!(),
            };
            let a = kmeans(&h, k, &opts)?;
            rows.push(ClusterRow {
                k,
                error_rate: error_rate(&g, &a.labels)?,
                wcss: a.wcss,
            });
            labels.push(a.labels);
        }
        Ok(())
    })?;
    let average = rows.iter().map(|r| r.error_rate).sum::<f64>() / rows.len() as f64;

    writeln!(out, "{:>7}  {:>10}", "k", "error_rate")?;
    for r in &rows {
        writeln!(out, "{:>7}  {:>10.4}", r.k, r.error_rate)?;
    }
    writeln!(out, "{:>7}  {:>10.4}", "average", average)?;

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        for (r, l) in rows.iter().zip(&labels) {
            save_labels(&g, l, dir.join(format!("labels_k{}.tsv", r.k)))?;
        }
        let name = match method {
            Method::Stack => "dnesbp".to_owned(),
            Method::Spectral(m) => m.to_string(),
        };
        write_json(
            &dir.join("cluster.json"),
            &ClusterOutput {
                method: name.clone(),
                seed,
                rows,
                average,
            },
        )?;
        manifest.config = json!({
            "method": name,
            "k_min": args.k_min,
            "k_max": args.k_max,
            "kmeans": opts,
            "stack": stack_cfg,
            "duplicates": args.input.duplicates,
        });
        manifest.write(dir)?;
    }
    Ok(())
}

pub const SWEEP_PARAMS: &[&str] = &["beta", "gamma", "alpha1", "alphak", "layers", "dim"];

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    param: String,
    value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_rate: Option<f64>,
}

pub fn sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    if !SWEEP_PARAMS.contains(&args.param.as_str()) {
        return Err(CliError::Config(format!(
            "unknown sweep parameter {:?}; expected one of {SWEEP_PARAMS:?}",
            args.param
        )));
    }
    let values: Vec<String> = args
        .values
        .split(',')
        .map(|v| v.trim().to_owned())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::Config("no sweep values".into()));
    }
    let s = settings(&args.hyper)?;
    let seed = config::seed(&s)?;
    let task = match s.get("task") {
        Some(t) => t.parse::<TaskPreset>()?,
        None => TaskPreset::LinkPrediction,
    };
    let k = match (task, args.k) {
        (TaskPreset::CommunityDetection, None) => {
            return Err(CliError::Config("--k is required for the community task".into()))
        }
        (_, k) => k,
    };
    let operator: EdgeOperator = args.operator.parse()?;
    let mut manifest = RunManifest::new("sweep", seed);
    let g = load_inputs(&args.input, &args.hyper, &mut manifest)?;

    let configs: Vec<StackConfig> = values
        .iter()
        .map(|v| {
            let mut sv = s.clone();
            sv.insert(args.param.clone(), v.clone());
            resolve_stack(&sv, g.n(), task)
        })
        .collect::<CliResult<_>>()?;

    let run = |cfg: &StackConfig| -> sbne_core::Result<(Option<f64>, Option<f64>, Option<f64>)> {
        match task {
            TaskPreset::LinkPrediction => {
                let pc = PipelineConfig {
                    fraction: args.fraction,
                    operators: vec![operator],
                    splits: args.splits,
                    seed,
                    stratified: false,
                    logistic: LogisticOptions::default(),
                };
                let r = link_sign_pipeline(&g, &EmbeddingMethod::Dnesbp(cfg.clone()), &pc)?;
                Ok((Some(r.summary[0].mean_auc), Some(r.summary[0].mean_ap), None))
            }
            TaskPreset::CommunityDetection => {
                let h = train_stack(&g, cfg)?.embeddings().clone();
                let k = k.expect("checked above");
                let a = kmeans(
                    &h,
                    k,
                    &KMeansOptions {
                        seed,
                        ..Default::default()
                    },
                )?;
                Ok((None, None, Some(error_rate(&g, &a.labels)?)))
            }
        }
    };
    let metrics = manifest.time("sweep", || {
        configs.par_iter().map(run).collect::<sbne_core::Result<Vec<_>>>()
    })?;

    let rows: Vec<SweepRow> = values
        .iter()
        .zip(metrics)
        .map(|(v, (mean_auc, mean_ap, error_rate))| SweepRow {
            param: args.param.clone(),
            value: v.clone(),
            mean_auc,
            mean_ap,
            error_rate,
        })
        .collect();

    create_dir(&args.out)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    match task {
        TaskPreset::LinkPrediction => {
            csv.write_record(["param", "value", "mean_auc", "mean_ap"])?;
            for r in &rows {
                csv.write_record([
                    r.param.clone(),
                    r.value.clone(),
                    r.mean_auc.unwrap_or(f64::NAN).to_string(),
                    r.mean_ap.unwrap_or(f64::NAN).to_string(),
                ])?;
                writeln!(
                    out,
                    "{}={:<8} AUC {:.4}  AP {:.4}",
                    r.param,
                    r.value,
                    r.mean_auc.unwrap_or(f64::NAN),
                    r.mean_ap.unwrap_or(f64::NAN)
                )?;
            }
        }
        TaskPreset::CommunityDetection => {
            csv.write_record(["param", "value", "error_rate"])?;
            for r in &rows {
                csv.write_record([
                    r.param.clone(),
                    r.value.clone(),
                    r.error_rate.unwrap_or(f64::NAN).to_string(),
                ])?;
                writeln!(
                    out,
                    "{}={:<8} error rate {:.4}",
                    r.param,
                    r.value,
                    r.error_rate.unwrap_or(f64::NAN)
                )?;
            }
        }
    }
    let bytes = csv.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    sbne_core::persist::atomic_write(&args.out.join("sweep.csv"), &bytes)?;
    write_json(&args.out.join("sweep.json"), &rows)?;
    manifest.config = json!({
        "param": args.param,
        "values": values,
        "task": task,
        "fraction": args.fraction,
        "splits": args.splits,
        "operator": operator,
        "k": k,
        "stacks": configs,
        "duplicates": args.input.duplicates,
    });
    manifest.write(&args.out)
}

pub fn generate(args: &GenerateArgs, out: &mut dyn Write) -> CliResult<()> {
    let sizes = args
        .sizes
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Config(format!("invalid sizes {:?}", args.sizes)))?;
    if let Some(k) = args.k {
        if k != sizes.len() {
            return Err(CliError::Config(format!(
                "--k {k} does not match {} sizes",
                sizes.len()
            )));
        }
    }
    let params = PlantedPartitionParams {
        sizes,
        p_in: args.p_in,
        p_out: args.p_out,
        flip_noise: args.noise,
        seed: args.seed,
    };
    let mut manifest = RunManifest::new("generate", args.seed);
    let pp = manifest.time("generate", || generate_planted_partition(&params))?;
    let labels_path = args.labels.clone().unwrap_or_else(|| labels_path_for(&args.out));
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_edge_list(&pp.graph, &args.out)?;
    save_labels(&pp.graph, &pp.labels, &labels_path)?;
    writeln!(
        out,
        "wrote {} nodes, {} edges ({} positive, {} negative) to {}",
        pp.graph.n(),
        pp.graph.num_edges(),
        pp.graph.num_positive(),
        pp.graph.num_negative(),
        args.out.display()
    )?;
    manifest.config = json!({ "planted_partition": params, "edges": args.out, "labels": labels_path });
    let dir = args
        .out
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    manifest.write(dir)
}

/// `graph.tsv` → `graph.labels.tsv`.
pub fn labels_path_for(edges: &Path) -> PathBuf {
    let stem = edges.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
    edges.with_file_name(format!("{stem}.labels.tsv"))
}
