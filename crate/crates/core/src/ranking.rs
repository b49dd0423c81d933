//! Posterior rank tables, rate summaries, shrinkage records and trajectories.
//!
//! Every posterior draw induces a ranking of the medal-winning NOCs by
//! expected medals per person (rank 1 = best). The table orders NOCs by the
//! mean (default) or median of their per-draw rank. NOCs without medals get
//! rate summaries but never a rank.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{GamesDataset, MultiGamesPanel};
use crate::error::{Error, Result};
use crate::model::{medals_per_medallist, PriorSpec};
use crate::par;
use crate::quantile::{equal_tailed, quantile_sorted};
use crate::sampler::{run_sampler, ConvergenceReport, PosteriorDraws, SamplerConfig};

pub const RANK_INTERVAL_LEVEL: f64 = 0.80;
pub const RATE_INTERVAL_LEVEL: f64 = 0.95;
const PER_MILLION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderStatistic {
    #[default]
    Mean,
    Median,
}

impl std::str::FromStr for OrderStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(OrderStatistic::Mean),
            "median" => Ok(OrderStatistic::Median),
            other => Err(Error::Validation(format!("unknown ordering `{other}` (mean|median)"))),
        }
    }
}

impl OrderStatistic {
    pub fn label(self) -> &'static str {
        match self {
            OrderStatistic::Mean => "posterior_mean_rank",
            OrderStatistic::Median => "posterior_median_rank",
        }
    }
}

/// Baseline ranks joined onto a posterior rank row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineColumns {
    pub per_capita_rank: Option<u32>,
    pub lexicographic_rank: Option<u32>,
    pub u_index: Option<f64>,
    pub u_index_rank: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    /// Position in the table under its ordering statistic.
    pub position: u32,
    pub code: String,
    pub name: String,
    pub population: u64,
    pub medal_total: u32,
    pub posterior_mean_rank: f64,
    pub posterior_median_rank: f64,
    pub rank_ci80: (f64, f64),
    pub rate_median_per_million: f64,
    pub rate_ci95_per_million: (f64, f64),
    pub observed_rate_per_million: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BaselineColumns>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub order: OrderStatistic,
    pub rows: Vec<RankSummary>,
}

impl RankingTable {
    pub fn row(&self, code: &str) -> Option<&RankSummary> {
        self.rows.iter().find(|r| r.code == code)
    }

    pub fn position_of(&self, code: &str) -> Option<u32> {
        self.row(code).map(|r| r.position)
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.rows.iter().take(k).map(|r| r.code.as_str()).collect()
    }

    /// Re-sorts the rows under another ordering statistic.
    pub fn reordered(&self, order: OrderStatistic) -> RankingTable {
        let mut rows = self.rows.clone();
        sort_rows(&mut rows, order);
        RankingTable { order, rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageRecord {
    pub code: String,
    pub population: u64,
    pub medal_total: u32,
    pub observed_rate_per_million: f64,
    pub posterior_median_rate_per_million: f64,
    pub rate_ci95_per_million: (f64, f64),
    pub has_multimedalist: bool,
    pub zero_medal: bool,
}

fn check_alignment(draws: &PosteriorDraws, data: &GamesDataset) -> Result<()> {
    if draws.codes.len() != data.len() || draws.codes.iter().zip(&data.records).any(|(c, r)| *c != r.code) {
        return Err(Error::Validation("posterior draws do not match the dataset's NOCs".into()));
    }
    if draws.total_draws() == 0 {
        return Err(Error::Validation("no posterior draws".into()));
    }
    Ok(())
}

/// Expected medals per person for every draw (rows) and NOC (columns).
pub fn per_draw_rates(draws: &PosteriorDraws) -> Array2<f64> {
    let mut out = Array2::zeros((draws.total_draws(), draws.n_nocs()));
    for (mut row, (p, q)) in out.rows_mut().into_iter().zip(draws.iter_draws()) {
        let factor = medals_per_medallist(q);
        for (cell, &pc) in row.iter_mut().zip(p.iter()) {
            *cell = pc * factor;
        }
    }
    out
}

/// 1-based ranks of `values` in descending order; exact ties fall back to
/// ascending `codes`.
pub fn rank_descending(values: &[f64], codes: &[&str]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then_with(|| codes[a].cmp(codes[b])));
    let mut ranks = vec![0u32; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos as u32 + 1;
    }
    ranks
}

/// Per-draw ranks (rows) of the NOCs at `winners` (columns).
pub fn per_draw_ranks(values: &Array2<f64>, winners: &[usize], codes: &[&str], exec: par::Execution) -> Array2<u32> {
    let winner_codes: Vec<&str> = winners.iter().map(|&i| codes[i]).collect();
    let rows = par::map_indexed(values.nrows(), exec, |d| {
        let row = values.row(d);
        let v: Vec<f64> = winners.iter().map(|&i| row[i]).collect();
        rank_descending(&v, &winner_codes)
    });
    let mut out = Array2::zeros((values.nrows(), winners.len()));
    for (d, ranks) in rows.into_iter().enumerate() {
        for (w, r) in ranks.into_iter().enumerate() {
            out[[d, w]] = r;
        }
    }
    out
}

fn sort_rows(rows: &mut [RankSummary], order: OrderStatistic) {
    let key = |r: &RankSummary| match order {
        OrderStatistic::Mean => r.posterior_mean_rank,
        OrderStatistic::Median => r.posterior_median_rank,
    };
    rows.sort_by(|a, b| {
        key(a)
            .total_cmp(&key(b))
            .then_with(|| a.posterior_mean_rank.total_cmp(&b.posterior_mean_rank))
            .then_with(|| a.code.cmp(&b.code))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.position = i as u32 + 1;
    }
}

fn rate_interval(column: ndarray::ArrayView1<'_, f64>) -> crate::quantile::Interval {
    let per_million: Vec<f64> = column.iter().map(|v| v * PER_MILLION).collect();
    equal_tailed(&per_million, RATE_INTERVAL_LEVEL)
}

/// Posterior rank table over the medal-winning NOCs.
pub fn summarize_ranks(draws: &PosteriorDraws, data: &GamesDataset, order: OrderStatistic) -> Result<RankingTable> {
    check_alignment(draws, data)?;
    let winners: Vec<usize> = (0..data.len()).filter(|&i| data.records[i].is_medal_winner()).collect();
    if winners.is_empty() {
        return Err(Error::Validation("no medal-winning NOCs to rank".into()));
    }
    let codes = data.codes();
    let rates = per_draw_rates(draws);
    let ranks = per_draw_ranks(&rates, &winners, &codes, draws.config.execution);

    let mut rows = par::map_indexed(winners.len(), draws.config.execution, |w| {
        let i = winners[w];
        let record = &data.records[i];
        let mut r: Vec<f64> = ranks.column(w).iter().map(|&x| x as f64).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        r.sort_by(f64::total_cmp);
        let tail = (1.0 - RANK_INTERVAL_LEVEL) / 2.0;
        let rate = rate_interval(rates.column(i));
        RankSummary {
            position: 0,
            code: record.code.clone(),
            name: record.name.clone(),
            population: record.population,
            medal_total: record.total_medals(),
            posterior_mean_rank: mean,
            posterior_median_rank: quantile_sorted(&r, 0.5),
            rank_ci80: (quantile_sorted(&r, tail), quantile_sorted(&r, 1.0 - tail)),
            rate_median_per_million: rate.median,
            rate_ci95_per_million: (rate.lo, rate.hi),
            observed_rate_per_million: record.observed_rate_per_million(),
            baselines: None,
        }
    });
    sort_rows(&mut rows, order);
    Ok(RankingTable { order, rows })
}

/// Observed versus posterior median rates for every NOC.
pub fn shrinkage_table(draws: &PosteriorDraws, data: &GamesDataset) -> Result<Vec<ShrinkageRecord>> {
    check_alignment(draws, data)?;
    let rates = per_draw_rates(draws);
    Ok(par::map_indexed(data.len(), draws.config.execution, |i| {
        let record = &data.records[i];
        let rate = rate_interval(rates.column(i));
        ShrinkageRecord {
            code: record.code.clone(),
            population: record.population,
            medal_total: record.total_medals(),
            observed_rate_per_million: record.observed_rate_per_million(),
            posterior_median_rate_per_million: rate.median,
            rate_ci95_per_million: (rate.lo, rate.hi),
            has_multimedalist: record.has_multimedalist(),
            zero_medal: !record.is_medal_winner(),
        }
    }))
}

/// One independently fitted Games of a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryEntry {
    pub year: u16,
    pub label: String,
    pub table: RankingTable,
    pub convergence: ConvergenceReport,
}

/// Fits every Games of the panel separately with the same prior and config.
pub fn rank_trajectory(
    panel: &MultiGamesPanel,
    spec: &PriorSpec,
    config: &SamplerConfig,
    order: OrderStatistic,
) -> Result<Vec<TrajectoryEntry>> {
    panel
        .games
        .iter()
        .map(|games| {
            let attach = |e: Error| Error::Games { year: games.meta.year, source: Box::new(e) };
            let (draws, convergence) = run_sampler(games, spec, config).map_err(attach)?;
            let table = summarize_ranks(&draws, games, order).map_err(attach)?;
            Ok(TrajectoryEntry { year: games.meta.year, label: games.meta.label.clone(), table, convergence })
        })
        .collect()
}

/// Table position of one NOC in each Games; `None` where it has no rank.
pub fn rank_path(trajectory: &[TrajectoryEntry], code: &str) -> Vec<(u16, Option<u32>)> {
    trajectory.iter().map(|e| (e.year, e.table.position_of(code))).collect()
}
