//! Checks of the Poisson assumption on a multi-Games panel: sample mean
//! against variance with a Monte Carlo predictive band, and exact binomial
//! tests of successive-Games medal counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::MultiGamesPanel;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::quantile::quantile_sorted;
use crate::special::{ln_binomial_pmf, log_sum_exp};

pub const MIN_BAND_REPS: usize = 10_000;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVarPoint {
    pub code: String,
    pub sample_mean: f64,
    /// Unbiased (n - 1) sample variance.
    pub sample_variance: f64,
    pub games_count: usize,
    pub is_host_in_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BandPoint {
    pub fn contains(&self, variance: f64) -> bool {
        self.lo <= variance && variance <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub code: String,
    pub year_a: u16,
    pub year_b: u16,
    pub medals_a: u32,
    pub medals_b: u32,
    pub p_value: f64,
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Per-NOC mean and variance of medal totals over the Games it entered.
pub fn mean_variance_panel(panel: &MultiGamesPanel) -> Vec<MeanVarPoint> {
    let hosts = panel.hosts();
    panel
        .series
        .iter()
        .filter_map(|(code, series)| {
            let present: Vec<f64> = series.iter().flatten().map(|&m| m as f64).collect();
            if present.len() < 2 {
                return None;
            }
            let (sample_mean, sample_variance) = mean_and_variance(&present);
            Some(MeanVarPoint {
                code: code.clone(),
                sample_mean,
                sample_variance,
                games_count: present.len(),
                is_host_in_window: hosts.contains(code.as_str()),
            })
        })
        .collect()
}

/// Equal-tailed `level` band of the sample variance of `n_games` Poisson(mean)
/// counts. Replicates are generated in fixed-size chunks, chunk `k` drawing
/// from stream `k` of `seed`, so a larger `reps` extends a smaller run.
pub fn poisson_variance_band(
    mean: f64,
    n_games: usize,
    level: f64,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<BandPoint> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::Domain(format!("band mean must be positive, got {mean}")));
    }
    if n_games < 2 {
        return Err(Error::Domain("sample variance needs at least two Games".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("band level {level} outside (0, 1)")));
    }
    if reps < MIN_BAND_REPS {
        return Err(Error::Domain(format!("at least {MIN_BAND_REPS} replicates required, got {reps}")));
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::Numeric(e.to_string()))?;
    let chunks = reps.div_ceil(CHUNK);
    let mut variances: Vec<f64> = par::map_indexed(chunks, exec, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let len = CHUNK.min(reps - k * CHUNK);
        let mut sample = vec![0.0; n_games];
        (0..len)
            .map(|_| {
                for s in sample.iter_mut() {
                    *s = poisson.sample(&mut rng);
                }
                mean_and_variance(&sample).1
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    variances.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BandPoint { mean, lo: quantile_sorted(&variances, tail), hi: quantile_sorted(&variances, 1.0 - tail) })
}

/// Bands on a grid of means, all from the same seed.
pub fn variance_band_grid(
    means: &[f64],
    n_games: usize,
    level: f64,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<BandPoint>> {
    means.iter().map(|&m| poisson_variance_band(m, n_games, level, reps, seed, exec)).collect()
}

/// `n` log-spaced means spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Share of NOCs whose sample variance lies inside the band for their own
/// mean and Games count. NOCs with a zero mean carry no information and are
/// left out, as are hosts when `exclude_hosts` is set.
pub fn band_coverage(
    points: &[MeanVarPoint],
    level: f64,
    reps: usize,
    seed: u64,
    exclude_hosts: bool,
    exec: Execution,
) -> Result<(f64, usize)> {
    let eligible: Vec<&MeanVarPoint> = points
        .iter()
        .filter(|p| p.sample_mean > 0.0 && !(exclude_hosts && p.is_host_in_window))
        .collect();
    if eligible.is_empty() {
        return Err(Error::Validation("no NOC with a positive mean medal count".into()));
    }
    let mut inside = 0;
    for p in &eligible {
        let band = poisson_variance_band(p.sample_mean, p.games_count, level, reps, seed, exec)?;
        if band.contains(p.sample_variance) {
            inside += 1;
        }
    }
    Ok((inside as f64 / eligible.len() as f64, eligible.len()))
}

/// Two-sided exact test of `a` against `Binomial(a + b, 1/2)`. No trials
/// means no information, so `p = 1`.
pub fn excess_variation_pvalue(a: u32, b: u32) -> f64 {
    let r = (a + b) as u64;
    if r == 0 || a == b {
        return 1.0;
    }
    let k = a.max(b) as u64;
    let ln_tail = log_sum_exp((k..=r).map(|j| ln_binomial_pmf(j, r, 0.5)));
    (2.0 * ln_tail.exp()).min(1.0)
}

/// Excess-variation tests for every NOC over each adjacent pair of Games it
/// entered in both.
pub fn successive_pair_pvalues(panel: &MultiGamesPanel) -> Vec<PairTest> {
    let years = panel.years();
    let mut out = Vec::new();
    for (code, series) in &panel.series {
        for g in 0..series.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (series[g], series[g + 1]) {
                out.push(PairTest {
                    code: code.clone(),
                    year_a: years[g],
                    year_b: years[g + 1],
                    medals_a: a,
                    medals_b: b,
                    p_value: excess_variation_pvalue(a, b),
                });
            }
        }
    }
    out
}
