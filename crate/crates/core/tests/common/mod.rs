//! Shared fixtures and oracle checks for the integration tests and the
//! acceptance target. Each check returns a one-line detail on success and a
//! description of the violation on failure.
#![allow(dead_code)]

use std::path::PathBuf;

use medalrank::baselines::{null_probability, u_index};
use medalrank::data::{GamesDataset, GamesMeta, NocRecord};
use medalrank::diagnostics::excess_variation_pvalue;
use medalrank::model::{cell_probabilities, expected_rate, log_posterior, HyperParams, ModelParams, PriorFamily, PriorSpec};
use medalrank::ranking::{per_draw_rates, rank_descending};
use medalrank::sampler::{run_sampler, PosteriorDraws, SamplerConfig};
use medalrank::simulate::draw_from_prior;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};
use statrs::function::gamma::digamma;

pub type Check = Result<String, String>;

pub const TELESCOPING_TOL: f64 = 1e-12;
pub const RATE_TWO_FORM_TOL: f64 = 1e-12;
pub const GRADIENT_REL_TOL: f64 = 1e-4;
pub const GRID_TV_MAX: f64 = 0.02;
pub const SBC_P_MIN: f64 = 0.01;

pub fn record(code: &str, population: u64, counts: [u32; 4]) -> NocRecord {
    NocRecord { code: code.into(), name: code.into(), population, counts, medals: None }
}

pub fn dataset(records: Vec<NocRecord>) -> GamesDataset {
    let total = records.iter().map(NocRecord::total_medals).sum::<u32>().max(1);
    let meta = GamesMeta { year: 2024, label: "Synthetic".into(), host: records[0].code.clone(), total_medals: total, medal_quota: total };
    GamesDataset::new(meta, records).unwrap().0
}

/// NOCs with log-uniform populations and counts simulated from a Beta prior
/// with mean rate `alpha / (alpha + beta)`.
pub fn synthetic_games(c: usize, seed: u64, year: u16) -> GamesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nocs: Vec<(String, u64)> = (0..c)
        .map(|i| (format!("N{i:03}"), rng.random_range(11.0f64..21.0).exp() as u64))
        .collect();
    let p: Vec<f64> =
        nocs.iter().map(|_| medalrank::simulate::draw_ln_p(&HyperParams::Beta { alpha: 0.6, beta: 4e6 }, PriorFamily::Beta, &mut rng).exp()).collect();
    medalrank::simulate::simulate_dataset(&nocs, &p, [0.2, 0.25, 0.3], year, &mut rng).unwrap()
}

pub fn quick_config(seed: u64) -> SamplerConfig {
    SamplerConfig { chains: 2, adapt_iters: 1000, burn_in: 500, keep_iters: 2000, thin: 2, seed, ..Default::default() }
}

pub fn data_dir() -> PathBuf {
    std::env::var_os("MEDALRANK_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

// ---------------------------------------------------------------- model identities

pub fn check_telescoping() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let p: f64 = rng.random();
        let q: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let cells = cell_probabilities(p, q[0], q[1], q[2]).map_err(|e| e.to_string())?;
        let sum: f64 = cells.0.iter().sum();
        worst = worst.max((sum - p).abs());
    }
    if worst <= TELESCOPING_TOL {
        Ok(format!("max |sum cells - p| = {worst:.2e} over 1e5 points"))
    } else {
        Err(format!("max |sum cells - p| = {worst:.2e} > {TELESCOPING_TOL:e}"))
    }
}

/// Expected rate as `p * E(medals | medallist)` against `sum_i i * p_i`.
pub fn check_rate_two_forms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let p: f64 = rng.random();
        let q: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let direct = expected_rate(p, q[0], q[1], q[2]).map_err(|e| e.to_string())?;
        let cells = [p * (1.0 - q[0]), p * q[0] * (1.0 - q[1]), p * q[0] * q[1] * (1.0 - q[2]), p * q[0] * q[1] * q[2]];
        let weighted: f64 = cells.iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).sum();
        worst = worst.max((direct - weighted).abs());
    }
    if worst <= RATE_TWO_FORM_TOL {
        Ok(format!("max form difference {worst:.2e}"))
    } else {
        Err(format!("max form difference {worst:.2e} > {RATE_TWO_FORM_TOL:e}"))
    }
}

// ---------------------------------------------------------------- ranking

fn small_fit(seed: u64) -> (GamesDataset, PosteriorDraws) {
    let data = synthetic_games(40, seed, 2024);
    let (draws, _) = run_sampler(&data, &PriorSpec::new(PriorFamily::Beta), &quick_config(seed)).unwrap();
    (data, draws)
}

pub fn check_rank_sum_and_equivalence() -> (Check, Check) {
    let (data, draws) = small_fit(21);
    let winners: Vec<usize> = (0..data.len()).filter(|&i| data.records[i].is_medal_winner()).collect();
    let codes: Vec<&str> = winners.iter().map(|&i| data.records[i].code.as_str()).collect();
    let w = winners.len() as u64;
    let rates = per_draw_rates(&draws);
    let mut bad_sum = 0;
    let mut bad_order = 0;
    for (d, (p, _)) in draws.iter_draws().enumerate() {
        let by_rate: Vec<f64> = winners.iter().map(|&i| rates[[d, i]]).collect();
        let by_p: Vec<f64> = winners.iter().map(|&i| p[i]).collect();
        let ranks = rank_descending(&by_rate, &codes);
        if ranks.iter().map(|&r| r as u64).sum::<u64>() != w * (w + 1) / 2 {
            bad_sum += 1;
        }
        if ranks != rank_descending(&by_p, &codes) {
            bad_order += 1;
        }
    }
    let n = draws.total_draws();
    let sum = if bad_sum == 0 {
        Ok(format!("{n} draws, W={w}, every per-draw rank sum = W(W+1)/2"))
    } else {
        Err(format!("{bad_sum} of {n} draws violate the rank sum"))
    };
    let order = if bad_order == 0 {
        Ok(format!("{n} draws, rank by rate identical to rank by p"))
    } else {
        Err(format!("{bad_order} of {n} draws rank differently by rate and by p"))
    };
    (sum, order)
}

// ---------------------------------------------------------------- gradient

/// Parameters from unconstrained coordinates
/// `[logit p_1.., logit q2, logit q3, logit q4, logit(alpha/A), logit(beta/B)]`.
fn params_from(theta: &[f64], c: usize, spec: &PriorSpec) -> ModelParams {
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    ModelParams {
        p: theta[..c].iter().map(|&t| sig(t)).collect(),
        q: [sig(theta[c]), sig(theta[c + 1]), sig(theta[c + 2])],
        hyper: HyperParams::Beta { alpha: spec.alpha_upper * sig(theta[c + 3]), beta: spec.beta_upper * sig(theta[c + 4]) },
    }
}

fn transformed_target(theta: &[f64], data: &GamesDataset, spec: &PriorSpec) -> f64 {
    let c = data.len();
    let params = params_from(theta, c, spec);
    let ln_sig = |x: f64| -(-x).exp().ln_1p();
    let jac: f64 = theta.iter().map(|&t| ln_sig(t) + ln_sig(-t)).sum::<f64>() + spec.alpha_upper.ln() + spec.beta_upper.ln();
    log_posterior(data, &params, spec).unwrap() + jac
}

/// Closed-form gradient of the transformed Beta-family target.
fn analytic_gradient(theta: &[f64], data: &GamesDataset, spec: &PriorSpec) -> Vec<f64> {
    let c = data.len();
    let params = params_from(theta, c, spec);
    let HyperParams::Beta { alpha, beta } = params.hyper else { unreachable!() };
    let mut g = vec![0.0; theta.len()];
    let (mut sum_ln_p, mut sum_ln_1mp) = (0.0, 0.0);
    let mut succ = [0.0; 3];
    let mut fail = [0.0; 3];
    for (i, r) in data.records.iter().enumerate() {
        let p = params.p[i];
        let u = r.unique_medalists() as f64;
        let n = r.population as f64;
        g[i] = (u + alpha) * (1.0 - p) - n * p * (1.0 - p) - beta * p;
        sum_ln_p += p.ln();
        sum_ln_1mp += (-p).ln_1p();
        let m = r.counts.map(|v| v as f64);
        succ[0] += m[1] + m[2] + m[3];
        fail[0] += m[0];
        succ[1] += m[2] + m[3];
        fail[1] += m[1];
        succ[2] += m[3];
        fail[2] += m[2];
    }
    for k in 0..3 {
        let q = params.q[k];
        g[c + k] = (succ[k] + 1.0) * (1.0 - q) - (fail[k] + 1.0) * q;
    }
    let cf = c as f64;
    let d_alpha = sum_ln_p - cf * (digamma(alpha) - digamma(alpha + beta));
    let d_beta = sum_ln_1mp - cf * (digamma(beta) - digamma(alpha + beta));
    let sa = alpha / spec.alpha_upper;
    let sb = beta / spec.beta_upper;
    g[c + 3] = d_alpha * alpha * (1.0 - sa) + 1.0 - 2.0 * sa;
    g[c + 4] = d_beta * beta * (1.0 - sb) + 1.0 - 2.0 * sb;
    g
}

/// Central differences (h = 1e-6) of the library's log posterior plus
/// Jacobian against the closed form, at 20 random points.
pub fn check_gradient() -> Check {
    let data = dataset(vec![
        record("AAA", 5_000_000, [12, 3, 1, 0]),
        record("BBB", 200_000, [1, 0, 0, 0]),
        record("CCC", 80_000_000, [30, 5, 2, 1]),
        record("DDD", 1_000_000, [0, 0, 0, 0]),
        record("EEE", 40_000, [2, 1, 0, 0]),
    ]);
    let spec = PriorSpec::new(PriorFamily::Beta);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut theta: Vec<f64> = (0..data.len()).map(|_| rng.random_range(-17.0..-11.0)).collect();
        theta.extend((0..3).map(|_| rng.random_range(-2.0..2.0)));
        theta.push(rng.random_range(-2.0..2.0));
        theta.push(rng.random_range(-6.0..-2.0));
        let analytic = analytic_gradient(&theta, &data, &spec);
        let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for k in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[k] += h;
            dn[k] -= h;
            let numeric = (transformed_target(&up, &data, &spec) - transformed_target(&dn, &data, &spec)) / (2.0 * h);
            worst = worst.max((numeric - analytic[k]).abs() / scale);
        }
    }
    if worst < GRADIENT_REL_TOL {
        Ok(format!("max relative error {worst:.2e} over 20 points x 10 coordinates"))
    } else {
        Err(format!("max relative error {worst:.2e} >= {GRADIENT_REL_TOL:e}"))
    }
}

// ---------------------------------------------------------------- sampler distribution

/// Long-run histogram of q2 on a 2-NOC toy against its exact marginal,
/// `Beta(M2+M3+M4+1, M1+1)`, integrated over a 50-bin grid.
pub fn check_grid_tv(sweeps: usize) -> Check {
    let data = dataset(vec![record("AAA", 3_000_000, [6, 2, 1, 0]), record("BBB", 700_000, [2, 1, 0, 0])]);
    let spec = PriorSpec::new(PriorFamily::Beta);
    let config = SamplerConfig { chains: 2, adapt_iters: 5000, burn_in: 5000, keep_iters: sweeps / 2, thin: 1, seed: 41, ..Default::default() };
    let (draws, _) = run_sampler(&data, &spec, &config).map_err(|e| e.to_string())?;
    let bins = 50;
    let mut hist = vec![0.0; bins];
    let mut n = 0.0;
    for chain in &draws.chains {
        for &q2 in chain.q.column(0) {
            hist[((q2 * bins as f64) as usize).min(bins - 1)] += 1.0;
            n += 1.0;
        }
    }
    let m = data.pooled_counts();
    let (s, f) = ((m[1] + m[2] + m[3] + 1) as f64, (m[0] + 1) as f64);
    let exact = Beta::new(s, f).unwrap();
    let tv = 0.5
        * (0..bins)
            .map(|b| {
                let mass = exact.cdf((b + 1) as f64 / bins as f64) - exact.cdf(b as f64 / bins as f64);
                (hist[b] / n - mass).abs()
            })
            .sum::<f64>();
    if tv < GRID_TV_MAX {
        Ok(format!("TV = {tv:.4} over {n} draws"))
    } else {
        Err(format!("TV = {tv:.4} >= {GRID_TV_MAX}"))
    }
}

/// Simulation-based calibration of `p_c` under the Beta-prior model.
pub fn check_sbc(datasets: usize) -> Check {
    let spec = PriorSpec::new(PriorFamily::Beta);
    let bins = 20usize;
    let mut counts = vec![0u64; bins];
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for d in 0..datasets {
        let nocs: Vec<(String, u64)> =
            (0..30).map(|i| (format!("S{i:02}"), (rng.random_range(5.0f64..8.0) * std::f64::consts::LN_10).exp() as u64)).collect();
        let (params, _, data) = draw_from_prior(&spec, &nocs, &mut rng).map_err(|e| e.to_string())?;
        let config = SamplerConfig { chains: 2, adapt_iters: 2000, burn_in: 2000, keep_iters: 19_000, thin: 100, seed: 1000 + d as u64, ..Default::default() };
        let (draws, _) = run_sampler(&data, &spec, &config).map_err(|e| e.to_string())?;
        let total = draws.total_draws();
        for c in 0..nocs.len() {
            let truth = params.p[c];
            let mut below = 0usize;
            let mut ties = 0usize;
            for chain in &draws.chains {
                for &v in chain.p.column(c) {
                    if v < truth {
                        below += 1;
                    } else if v == truth {
                        ties += 1;
                    }
                }
            }
            let rank = below + if ties > 0 { rng.random_range(0..=ties) } else { 0 };
            counts[(rank * bins / (total + 1)).min(bins - 1)] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = ChiSquared::new((bins - 1) as f64).unwrap().sf(stat);
    let detail = format!("chi2 = {stat:.2}, p = {p:.4}, {n} ranks, bins {counts:?}");
    if p > SBC_P_MIN {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- baselines and diagnostics

pub fn check_excess_symmetry() -> Check {
    for r in 0..=50u32 {
        for a in 0..=r {
            if excess_variation_pvalue(a, r - a) != excess_variation_pvalue(r - a, a) {
                return Err(format!("p({a},{}) differs from its mirror", r - a));
            }
        }
    }
    Ok("p(a,b) = p(b,a) for all a+b <= 50".into())
}

pub fn check_u_monotone() -> Check {
    for &(n_c, big_n, t, m) in &[(330_000_000u64, 7_000_000_000u64, 1080u32, 579u32), (5_000_000, 7_000_000_000, 1039, 559)] {
        let prob = null_probability(n_c, big_n, t, m);
        let mut last = f64::NEG_INFINITY;
        for medals in 0..=20 {
            let (u, _) = u_index(medals, m, prob).map_err(|e| e.to_string())?;
            if u <= last {
                return Err(format!("U not increasing at M_c = {medals} (pi = {prob:.3e})"));
            }
            last = u;
        }
    }
    Ok("U strictly increasing over M_c = 0..20 at two fixed null probabilities".into())
}

/// Prints a criterion line and returns whether it passed.
pub fn report(label: &str, check: &Check) -> bool {
    match check {
        Ok(detail) => println!("PASS  {label}: {detail}"),
        Err(detail) => println!("FAIL  {label}: {detail}"),
    }
    check.is_ok()
}

// ---------------------------------------------------------------- reproducibility

/// Two runs with the same seed give bit-identical draws and ranking tables,
/// in both execution modes.
pub fn check_determinism() -> Check {
    use medalrank::par::Execution;
    use medalrank::ranking::{summarize_ranks, OrderStatistic};
    let data = synthetic_games(30, 61, 2024);
    let spec = PriorSpec::new(PriorFamily::Beta);
    let run = |execution: Execution| {
        let config = SamplerConfig { execution, ..quick_config(7) };
        let (draws, _) = run_sampler(&data, &spec, &config).map_err(|e| e.to_string())?;
        let csv = medalrank::output::draws_to_csv(&draws);
        let table = summarize_ranks(&draws, &data, OrderStatistic::Mean).map_err(|e| e.to_string())?;
        Ok::<_, String>((csv, format!("{table:?}")))
    };
    let first = run(Execution::Parallel)?;
    let second = run(Execution::Parallel)?;
    let sequential = run(Execution::Sequential)?;
    if first != second {
        return Err("repeated runs with seed 7 differ".into());
    }
    if first != sequential {
        return Err("sequential and parallel runs differ".into());
    }
    Ok(format!("draws CSV ({} bytes) and ranking table identical across reruns and execution modes", first.0.len()))
}

/// Two NOCs with identical data get posterior mean ranks within two Monte
/// Carlo standard errors of each other.
pub fn check_exchangeability() -> Check {
    use medalrank::par::Execution;
    use medalrank::ranking::per_draw_ranks;
    use medalrank::sampler::convergence::ess;
    let data = dataset(vec![
        record("AAA", 10_000_000, [8, 2, 1, 0]),
        record("BBB", 10_000_000, [8, 2, 1, 0]),
        record("CCC", 40_000_000, [15, 3, 0, 0]),
        record("DDD", 2_000_000, [1, 0, 0, 0]),
        record("EEE", 5_000_000, [3, 1, 0, 0]),
    ]);
    let config = SamplerConfig { chains: 4, adapt_iters: 2000, burn_in: 2000, keep_iters: 10_000, thin: 5, seed: 71, ..Default::default() };
    let (draws, _) = run_sampler(&data, &PriorSpec::new(PriorFamily::Beta), &config).map_err(|e| e.to_string())?;
    let codes: Vec<&str> = data.records.iter().map(|r| r.code.as_str()).collect();
    let winners: Vec<usize> = (0..data.len()).collect();
    let ranks = per_draw_ranks(&per_draw_rates(&draws), &winners, &codes, Execution::default());
    let per_chain = draws.chains[0].len();
    let diff: Vec<f64> = (0..ranks.nrows()).map(|d| ranks[[d, 0]] as f64 - ranks[[d, 1]] as f64).collect();
    let chains: Vec<&[f64]> = diff.chunks(per_chain).collect();
    let n = diff.len() as f64;
    let mean = diff.iter().sum::<f64>() / n;
    let var = diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / ess(&chains)).sqrt();
    let detail = format!("mean rank difference {mean:.4}, MC standard error {se:.4}");
    if mean.abs() <= 2.0 * se {
        Ok(detail)
    } else {
        Err(detail)
    }
}
