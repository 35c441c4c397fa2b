//! Signed network embedding with a semisupervised stacked auto-encoder whose
//! pairwise must-link / cannot-link terms preserve structural balance, plus
//! the evaluation machinery around it: balance ratios, link sign prediction,
//! signed community detection and spectral baselines.

pub mod autoencoder;
pub mod balance;
pub mod downstream;
pub mod error;
pub mod graph;
pub mod persist;
pub mod sparse;
pub mod spectral;
pub mod stack;

pub use balance::BalanceReport;
pub use error::{Error, Result};
pub use graph::{DuplicatePolicy, Edge, GraphMatrices, SignedGraph};
pub use stack::{train_stack, StackConfig, TrainedStack};
