//! Comparison rankings: lexicographic, observed per-capita and the
//! Duncan-Parece U-index.
//!
//! All three rank only medal-winning NOCs and use min-rank for ties (two NOCs
//! sharing second place both get 2, the next gets 4).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

use crate::data::GamesDataset;
use crate::error::{Error, Result};
use crate::ranking::{BaselineColumns, RankingTable};
use crate::special::{ln_binomial_pmf, ln_binomial_upper_tail};

/// Smallest p-value represented before clamping.
pub const MIN_P_VALUE: f64 = 1e-300;

/// Which populations make up the reference total `N` of the U-index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NDefinition {
    /// Every NOC in the dataset.
    #[default]
    AllNocs,
    /// Only NOCs that won at least one medal at these Games.
    MedalWinners,
}

impl NDefinition {
    pub fn name(self) -> &'static str {
        match self {
            NDefinition::AllNocs => "all-nocs",
            NDefinition::MedalWinners => "medal-winners",
        }
    }

    pub fn reference_population(self, data: &GamesDataset) -> u64 {
        data.records
            .iter()
            .filter(|r| self == NDefinition::AllNocs || r.is_medal_winner())
            .map(|r| r.population)
            .sum()
    }
}

impl std::str::FromStr for NDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-nocs" | "all" => Ok(NDefinition::AllNocs),
            "medal-winners" | "winners" => Ok(NDefinition::MedalWinners),
            other => Err(Error::Validation(format!("unknown N definition `{other}` (all-nocs|medal-winners)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub code: String,
    pub population: u64,
    pub medal_total: u32,
    pub per_capita_rate_per_million: f64,
    pub per_capita_rank: Option<u32>,
    pub lexicographic_rank: Option<u32>,
    pub u_index: f64,
    pub u_index_rank: Option<u32>,
}

/// Baseline columns for every NOC, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub n_definition: NDefinition,
    pub reference_population: u64,
    pub lexicographic_available: bool,
    pub rows: Vec<BaselineRow>,
}

impl BaselineTable {
    pub fn row(&self, code: &str) -> Option<&BaselineRow> {
        self.rows.iter().find(|r| r.code == code)
    }

    /// Codes ordered by a rank column, ties by code.
    pub fn order_by(&self, rank: impl Fn(&BaselineRow) -> Option<u32>) -> Vec<&str> {
        let mut ranked: Vec<(u32, &str)> =
            self.rows.iter().filter_map(|r| rank(r).map(|k| (k, r.code.as_str()))).collect();
        ranked.sort();
        ranked.into_iter().map(|(_, c)| c).collect()
    }
}

/// Min-rank of `items` (rank 1 = best) under `better`, which returns `Less`
/// when the first argument ranks ahead.
fn min_ranks<T>(items: &[T], better: impl Fn(&T, &T) -> Ordering) -> Vec<u32> {
    items
        .iter()
        .map(|a| 1 + items.iter().filter(|b| better(b, a) == Ordering::Less).count() as u32)
        .collect()
}

fn scatter(winners: &[usize], ranks: Vec<u32>, len: usize) -> Vec<Option<u32>> {
    let mut out = vec![None; len];
    for (&i, r) in winners.iter().zip(ranks) {
        out[i] = Some(r);
    }
    out
}

fn winners(data: &GamesDataset) -> Vec<usize> {
    (0..data.len()).filter(|&i| data.records[i].is_medal_winner()).collect()
}

/// Observed medals per person ranked descending, compared as exact rationals.
pub fn per_capita_rank(data: &GamesDataset) -> Vec<Option<u32>> {
    let w = winners(data);
    let fractions: Vec<(u128, u128)> = w
        .iter()
        .map(|&i| (data.records[i].total_medals() as u128, data.records[i].population as u128))
        .collect();
    let ranks = min_ranks(&fractions, |a, b| (b.0 * a.1).cmp(&(a.0 * b.1)));
    scatter(&w, ranks, data.len())
}

/// Official ordering by gold, silver, bronze, then total. `None` when any
/// medal winner lacks a medal split.
pub fn lexicographic_rank(data: &GamesDataset) -> Option<Vec<Option<u32>>> {
    let w = winners(data);
    let keys: Option<Vec<(u32, u32, u32, u32)>> = w
        .iter()
        .map(|&i| {
            let r = &data.records[i];
            r.medals.map(|m| (m.gold, m.silver, m.bronze, r.total_medals()))
        })
        .collect();
    let Some(keys) = keys else {
        log::warn!("lexicographic ranking omitted: some medal winners have no gold/silver/bronze split");
        return None;
    };
    let ranks = min_ranks(&keys, |a, b| b.cmp(a));
    Some(scatter(&w, ranks, data.len()))
}

/// Success probability of the equal-capability null for one NOC.
pub fn null_probability(population: u64, reference_population: u64, total_medals: u32, quota: u32) -> f64 {
    population as f64 / reference_population as f64 * total_medals as f64 / quota as f64
}

/// `-log10 P(Binomial(quota, prob) >= medals)`, with the p-value clamped at
/// [`MIN_P_VALUE`]. Returns the U value and whether it was clamped.
pub fn u_index(medals: u32, quota: u32, prob: f64) -> Result<(f64, bool)> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("null probability {prob} must lie in (0, 1)")));
    }
    let ln_p = ln_binomial_upper_tail(medals as u64, quota as u64, prob);
    let floor = MIN_P_VALUE.ln();
    let clamped = ln_p < floor;
    let u = -ln_p.max(floor) / std::f64::consts::LN_10;
    // -0.0 when the tail is the whole distribution
    Ok((u + 0.0, clamped))
}

/// U-index of every NOC, in dataset order.
pub fn dp_u_index(data: &GamesDataset, n_def: NDefinition) -> Result<Vec<f64>> {
    let big_n = n_def.reference_population(data);
    let GamesDataset { meta, records } = data;
    records
        .iter()
        .map(|r| {
            let prob = null_probability(r.population, big_n, meta.total_medals, meta.medal_quota);
            if prob >= 1.0 {
                return Err(Error::Domain(format!(
                    "U-index null probability for {} is {prob:.4} >= 1",
                    r.code
                )));
            }
            let medals = r.total_medals();
            if medals > meta.medal_quota {
                return Err(Error::Domain(format!(
                    "{} won {medals} medals, above the quota {}",
                    r.code, meta.medal_quota
                )));
            }
            let (u, clamped) = u_index(medals, meta.medal_quota, prob)?;
            if clamped {
                log::warn!("U-index p-value for {} below {MIN_P_VALUE:e}; clamped", r.code);
            }
            Ok(u)
        })
        .collect()
}

/// Total-variation distance between `Binomial(quota, n/N * T/quota)` and
/// `Poisson(n/N * T)`, including the Poisson mass above `quota`.
pub fn dp_poisson_equivalence(population: u64, reference_population: u64, total_medals: u32, quota: u32) -> Result<f64> {
    if population == 0 || reference_population == 0 || total_medals == 0 || quota == 0 {
        return Err(Error::Domain("populations, total and quota must be positive".into()));
    }
    let prob = null_probability(population, reference_population, total_medals, quota);
    if prob >= 1.0 {
        return Err(Error::Domain(format!("null probability {prob:.4} >= 1")));
    }
    let lambda = prob * quota as f64;
    let poisson = Poisson::new(lambda).map_err(|e| Error::Numeric(e.to_string()))?;
    let body: f64 = (0..=quota as u64)
        .map(|k| (ln_binomial_pmf(k, quota as u64, prob).exp() - poisson.pmf(k)).abs())
        .sum();
    Ok(0.5 * (body + poisson.sf(quota as u64)))
}

/// All baseline columns for a dataset.
pub fn baseline_table(data: &GamesDataset, n_def: NDefinition) -> Result<BaselineTable> {
    let per_capita = per_capita_rank(data);
    let lexicographic = lexicographic_rank(data);
    let u = dp_u_index(data, n_def)?;
    let w = winners(data);
    let u_winners: Vec<f64> = w.iter().map(|&i| u[i]).collect();
    let u_rank = scatter(&w, min_ranks(&u_winners, |a, b| b.total_cmp(a)), data.len());
    let rows = data
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| BaselineRow {
            code: r.code.clone(),
            population: r.population,
            medal_total: r.total_medals(),
            per_capita_rate_per_million: r.observed_rate_per_million(),
            per_capita_rank: per_capita[i],
            lexicographic_rank: lexicographic.as_ref().and_then(|l| l[i]),
            u_index: u[i],
            u_index_rank: u_rank[i],
        })
        .collect();
    Ok(BaselineTable {
        n_definition: n_def,
        reference_population: n_def.reference_population(data),
        lexicographic_available: lexicographic.is_some(),
        rows,
    })
}

/// Attaches baseline columns to every row of a posterior rank table.
pub fn join(table: &RankingTable, baselines: &BaselineTable) -> Result<RankingTable> {
    let mut out = table.clone();
    for row in out.rows.iter_mut() {
        let b = baselines
            .row(&row.code)
            .ok_or_else(|| Error::Validation(format!("no baseline row for {}", row.code)))?;
        row.baselines = Some(BaselineColumns {
            per_capita_rank: b.per_capita_rank,
            lexicographic_rank: b.lexicographic_rank,
            u_index: Some(b.u_index),
            u_index_rank: b.u_index_rank,
        });
    }
    Ok(out)
}
