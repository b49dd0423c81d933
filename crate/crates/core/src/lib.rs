//! Bayesian ranking of Olympic medal tables by long-run medals per capita.
//!
//! The crate fits a hierarchical Poisson model of per-athlete medal
//! multiplicities with a Metropolis-within-Gibbs sampler, summarizes the
//! posterior rank of every medal-winning NOC, and provides the comparison
//! baselines (lexicographic, per-capita, Duncan-Parece U-index) and the
//! Poisson diagnostics used to check the model.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod output;
pub mod par;
pub mod quantile;
pub mod ranking;
pub mod sampler;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
