//! Command-line surface over `sbne-core`: training, link sign prediction,
//! community detection, parameter sweeps and synthetic graph generation.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

/// Caps the global rayon pool at `SBNE_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("SBNE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SBNE_THREADS must be a positive integer, got {v:?}")))?;
    // a pool that is already built (e.g. in tests) keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => commands::train(a, out),
        Command::Predict(a) => commands::predict(a, out),
        Command::Cluster(a) => commands::cluster(a, out),
        Command::Sweep(a) => commands::sweep(a, out),
        Command::Generate(a) => commands::generate(a, out),
    }
}
