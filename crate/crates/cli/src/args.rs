use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(
    name = "sbne",
    version,
    about = "Signed network embedding with balance-preserving stacked auto-encoders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a stack and write weights, loss traces, embeddings and balance ratios.
    Train(TrainArgs),
    /// Link sign prediction over random edge splits.
    Predict(PredictArgs),
    /// k-means community detection over a range of k.
    Cluster(ClusterArgs),
    /// Vary one hyperparameter and record the task metric per value.
    Sweep(SweepArgs),
    /// Write a planted-partition signed graph and its ground truth.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Tab-separated `src dst sign` edge list.
    #[arg(long)]
    pub edges: PathBuf,
    /// Handling of duplicate rows with opposite signs: strict | keep-first.
    #[arg(long, default_value = "strict")]
    pub duplicates: String,
}

/// Stack hyperparameters; each flag overrides the config file and preset.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Flat `key = value` file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// wiki | slashdot | epinions
    #[arg(long)]
    pub preset: Option<String>,
    /// link | community
    #[arg(long)]
    pub task: Option<String>,
    /// Hidden sizes, e.g. 256,64 (a leading node count is accepted).
    #[arg(long)]
    pub dims: Option<String>,
    /// Number of layers when `--dims` is absent.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Embedding size when `--dims` is absent; also the spectral dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// A number >= 1, or `auto` for floor(positive/negative weight).
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alphak: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambdak: Option<f64>,
    #[arg(long)]
    pub eta1: Option<f64>,
    #[arg(long)]
    pub etak: Option<f64>,
    /// Batch size of every layer.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub batch1: Option<usize>,
    #[arg(long)]
    pub batchk: Option<usize>,
    /// Epoch count of every layer.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub iters1: Option<usize>,
    #[arg(long)]
    pub itersk: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl HyperArgs {
    pub fn to_settings(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_owned(), v);
            }
        };
        let str = |v: &Option<String>| v.clone();
        let num = |v: Option<f64>| v.map(|x| x.to_string());
        let int = |v: Option<usize>| v.map(|x| x.to_string());
        put("preset", str(&self.preset));
        put("task", str(&self.task));
        put("dims", str(&self.dims));
        put("layers", int(self.layers));
        put("dim", int(self.dim));
        put("beta", num(self.beta));
        put("gamma", str(&self.gamma));
        put("alpha1", num(self.alpha1));
        put("alphak", num(self.alphak));
        put("lambda1", num(self.lambda1));
        put("lambdak", num(self.lambdak));
        put("eta1", num(self.eta1));
        put("etak", num(self.etak));
        put("batch", int(self.batch));
        put("batch1", int(self.batch1));
        put("batchk", int(self.batchk));
        put("iters", int(self.iters));
        put("iters1", int(self.iters1));
        put("itersk", int(self.itersk));
        put("tol", num(self.tol));
        put("seed", self.seed.map(|x| x.to_string()));
        s
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Training percentage of edges.
    #[arg(long, default_value_t = 80.0)]
    pub fraction: f64,
    /// had | l1 | l2 | avg | all
    #[arg(long, default_value = "had")]
    pub operator: String,
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    /// dnesbp | sl | sns | bns
    #[arg(long, default_value = "dnesbp")]
    pub method: String,
    /// Keep the positive/negative mix in both halves of each split.
    #[arg(long)]
    pub stratified: bool,
    /// Directory for `predict.json` and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// dnesbp | sl | sns | bns
    #[arg(long, default_value = "dnesbp")]
    pub method: String,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Directory for `cluster.json`, per-k labels and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// beta | gamma | alpha1 | alphak | layers | dim
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long)]
    pub values: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Link task: training percentage.
    #[arg(long, default_value_t = 80.0)]
    pub fraction: f64,
    /// Link task: number of splits.
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    /// Link task: edge operator.
    #[arg(long, default_value = "had")]
    pub operator: String,
    /// Community task: number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Number of clusters; must agree with `--sizes` when both are given.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated cluster sizes.
    #[arg(long)]
    pub sizes: String,
    #[arg(long)]
    pub p_in: f64,
    #[arg(long)]
    pub p_out: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edge-list path.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth path; defaults to the edge-list path with `.labels.tsv`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}
