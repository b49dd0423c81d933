//! Posterior sampling for the hierarchical medal model.
//!
//! Chains are independent Metropolis-within-Gibbs runs seeded from
//! `(seed, chain index)` through ChaCha8 stream selection, so the draws are a
//! pure function of the dataset, prior and config regardless of how many
//! threads execute them.

mod chain;
pub mod convergence;
mod transform;

use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use chain::ChainAcceptance;
pub use convergence::{convergence, ConvergenceReport, ParamDiagnostics};

use crate::data::GamesDataset;
use crate::error::{Error, Result};
use crate::model::{HyperParams, PriorFamily, PriorSpec};
use crate::par::{self, Execution};

/// Generator used for every chain; recorded in run manifests.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng 0.9 (seed_from_u64(seed), set_stream(chain))";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub adapt_iters: usize,
    pub burn_in: usize,
    pub keep_iters: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub rhat_threshold: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            adapt_iters: 5_000,
            burn_in: 5_000,
            keep_iters: 20_000,
            thin: 5,
            seed: 1,
            target_accept: 0.44,
            rhat_threshold: 1.01,
            execution: Execution::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::Validation("at least two chains are required for convergence diagnostics".into()));
        }
        if self.adapt_iters == 0 || self.burn_in == 0 || self.keep_iters == 0 {
            return Err(Error::Validation("iteration counts must be positive".into()));
        }
        if self.thin == 0 || self.thin > self.keep_iters {
            return Err(Error::Validation("thin must be in 1..=keep_iters".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Validation("target_accept must be in (0, 1)".into()));
        }
        if !(self.rhat_threshold >= 1.0) {
            return Err(Error::Validation("rhat_threshold must be at least 1".into()));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.keep_iters / self.thin
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// `[q2, q3, q4]` per iteration.
    pub q: Array2<f64>,
    /// Hyperparameters per iteration, columns as in [`PosteriorDraws::hyper_names`].
    pub hyper: Array2<f64>,
    /// `p_c` per iteration, columns in dataset order.
    pub p: Array2<f64>,
}

impl ChainDraws {
    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub family: PriorFamily,
    pub codes: Vec<String>,
    pub hyper_names: Vec<String>,
    pub chains: Vec<ChainDraws>,
    pub dataset_fingerprint: String,
    pub config: SamplerConfig,
    pub acceptance: Vec<ChainAcceptance>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_nocs(&self) -> usize {
        self.codes.len()
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(ChainDraws::len).sum()
    }

    /// Iterates `(p row, q)` over all draws, chain by chain.
    pub fn iter_draws(&self) -> impl Iterator<Item = (ArrayView1<'_, f64>, [f64; 3])> + '_ {
        self.chains.iter().flat_map(|c| {
            c.p.rows().into_iter().zip(c.q.rows()).map(|(p, q)| (p, [q[0], q[1], q[2]]))
        })
    }

    /// Scalar trace of every parameter, per chain, keyed by name.
    pub fn traces(&self) -> Vec<(String, Vec<Vec<f64>>)> {
        let mut out = Vec::new();
        for (k, name) in ["q2", "q3", "q4"].iter().enumerate() {
            out.push((name.to_string(), self.chains.iter().map(|c| c.q.column(k).to_vec()).collect()));
        }
        for (k, name) in self.hyper_names.iter().enumerate() {
            out.push((name.clone(), self.chains.iter().map(|c| c.hyper.column(k).to_vec()).collect()));
        }
        for (k, code) in self.codes.iter().enumerate() {
            out.push((format!("p_{code}"), self.chains.iter().map(|c| c.p.column(k).to_vec()).collect()));
        }
        out
    }

    /// Checks the support constraints of every stored draw.
    pub fn check_support(&self, spec: &PriorSpec) -> Result<()> {
        for (ci, chain) in self.chains.iter().enumerate() {
            for (it, ((p, q), h)) in chain.p.rows().into_iter().zip(chain.q.rows()).zip(chain.hyper.rows()).enumerate() {
                let inside = |v: &f64| *v > 0.0 && *v < 1.0;
                if !p.iter().all(inside) || !q.iter().all(inside) {
                    return Err(Error::Sampler(format!("draw {it} of chain {ci} leaves (0,1)")));
                }
                let hyper = HyperParams::from_values(self.family, h.as_slice().expect("row is contiguous"))?;
                if crate::model::ln_hyperprior(&hyper, spec) == f64::NEG_INFINITY {
                    return Err(Error::Sampler(format!("draw {it} of chain {ci} has hyperparameters outside the support")));
                }
            }
        }
        Ok(())
    }
}

/// Runs all chains and computes their convergence report.
pub fn run_sampler(
    data: &GamesDataset,
    spec: &PriorSpec,
    config: &SamplerConfig,
) -> Result<(PosteriorDraws, ConvergenceReport)> {
    if data.is_empty() {
        return Err(Error::Validation("dataset has no NOCs".into()));
    }
    config.validate()?;
    spec.validate()?;

    let per_chain = par::try_map_indexed(config.chains, config.execution, |c| run_chain(data, spec, config, c))?;
    let (chains, acceptance) = per_chain.into_iter().unzip();
    let draws = PosteriorDraws {
        family: spec.family,
        codes: data.records.iter().map(|r| r.code.clone()).collect(),
        hyper_names: HyperParams::names(spec.family).into_iter().map(String::from).collect(),
        chains,
        dataset_fingerprint: data.fingerprint(),
        config: config.clone(),
        acceptance,
    };
    let report = convergence(&draws, config.rhat_threshold)?;
    if !report.passed {
        log::warn!(
            "convergence check failed: max R-hat {:.4} (threshold {})",
            report.max_rhat,
            config.rhat_threshold
        );
    }
    Ok((draws, report))
}

pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn run_chain(
    data: &GamesDataset,
    spec: &PriorSpec,
    config: &SamplerConfig,
    index: usize,
) -> Result<(ChainDraws, ChainAcceptance)> {
    let mut chain = chain::Chain::new(data, spec, config, chain_rng(config.seed, index))?;
    let n_keep = config.draws_per_chain();
    let n_hyper = HyperParams::names(spec.family).len();
    let mut q = Array2::zeros((n_keep, 3));
    let mut hyper = Array2::zeros((n_keep, n_hyper));
    let mut p = Array2::zeros((n_keep, data.len()));

    for _ in 0..config.adapt_iters {
        chain.sweep(true);
    }
    for _ in 0..config.burn_in {
        chain.sweep(false);
    }
    let mut row = 0;
    for it in 0..n_keep * config.thin {
        chain.sweep(false);
        if (it + 1) % config.thin == 0 {
            for (k, v) in chain.q().into_iter().enumerate() {
                q[[row, k]] = v;
            }
            for (k, v) in chain.hyper().values().into_iter().enumerate() {
                hyper[[row, k]] = v;
            }
            for (k, v) in chain.p().enumerate() {
                p[[row, k]] = v;
            }
            row += 1;
        }
    }
    Ok((ChainDraws { q, hyper, p }, chain.acceptance()))
}
