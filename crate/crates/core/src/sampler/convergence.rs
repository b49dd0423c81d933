//! Rank-normalized split R-hat and effective sample size.
//!
//! Follows the multi-chain estimators of Vehtari, Gelman, Simpson, Carpenter
//! and Bürkner (2021): each chain is split in half, draws are replaced by
//! normal scores of their pooled ranks, and R-hat is the larger of the bulk
//! and folded (tail) versions. ESS uses Geyer's initial monotone sequence on
//! the combined autocorrelation.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::PosteriorDraws;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub rhat: f64,
    pub rhat_bulk: f64,
    pub rhat_tail: f64,
    pub ess_bulk: f64,
    pub ess_tail: f64,
    /// Zero variance within and between chains; R-hat is undefined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub params: Vec<ParamDiagnostics>,
    pub min_ess: f64,
    pub max_rhat: f64,
    pub rhat_threshold: f64,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn get(&self, name: &str) -> Option<&ParamDiagnostics> {
        self.params.iter().find(|d| d.name == name)
    }
}

/// Diagnostics for every scalar parameter of a posterior sample.
pub fn convergence(draws: &PosteriorDraws, rhat_threshold: f64) -> Result<ConvergenceReport> {
    if draws.n_chains() < 2 {
        return Err(Error::Validation("convergence diagnostics need at least two chains".into()));
    }
    let traces = draws.traces();
    let params = par::map_indexed(traces.len(), draws.config.execution, |i| {
        let (name, chains) = &traces[i];
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        diagnose(name, &refs)
    });
    Ok(summarize(params, rhat_threshold))
}

pub fn summarize(params: Vec<ParamDiagnostics>, rhat_threshold: f64) -> ConvergenceReport {
    let max_rhat = params
        .iter()
        .map(|d| if d.rhat.is_nan() { f64::INFINITY } else { d.rhat })
        .fold(f64::NEG_INFINITY, f64::max);
    let min_ess = params
        .iter()
        .map(|d| if d.ess_bulk.is_nan() { 0.0 } else { d.ess_bulk })
        .fold(f64::INFINITY, f64::min);
    let passed = params.iter().all(|d| !d.degenerate && d.rhat <= rhat_threshold);
    ConvergenceReport { params, min_ess, max_rhat, rhat_threshold, passed }
}

/// Full diagnostics of one parameter given per-chain traces.
pub fn diagnose(name: &str, chains: &[&[f64]]) -> ParamDiagnostics {
    let split = split_chains(chains);
    let z = rank_normalize(&split);
    let z_refs: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
    let rhat_bulk = classic_rhat(&z_refs);

    let mut pooled: Vec<f64> = split.iter().flat_map(|c| c.iter().copied()).collect();
    let med = quantile_sorted(&sorted(&pooled), 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let zf = rank_normalize(&folded);
    let zf_refs: Vec<&[f64]> = zf.iter().map(Vec::as_slice).collect();
    let rhat_tail = classic_rhat(&zf_refs);

    let degenerate = rhat_bulk.is_nan();
    let rhat = if degenerate { f64::NAN } else { rhat_bulk.max(rhat_tail) };
    let total = pooled.len() as f64;
    let ess_bulk = ess(&z_refs).min(total);

    pooled.sort_by(f64::total_cmp);
    let mut ess_tail = f64::INFINITY;
    for prob in [0.05, 0.95] {
        let cut = quantile_sorted(&pooled, prob);
        let ind: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|&x| f64::from(u8::from(x <= cut))).collect()).collect();
        let refs: Vec<&[f64]> = ind.iter().map(Vec::as_slice).collect();
        let e = ess(&refs);
        if !e.is_nan() {
            ess_tail = ess_tail.min(e);
        }
    }
    let ess_tail = if ess_tail.is_finite() { ess_tail.min(total) } else { f64::NAN };

    ParamDiagnostics { name: name.to_string(), rhat, rhat_bulk, rhat_tail, ess_bulk, ess_tail, degenerate }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn quantile_sorted(s: &[f64], prob: f64) -> f64 {
    crate::quantile::quantile_sorted(s, prob)
}

/// Halves every chain; the middle draw of odd-length chains is dropped.
pub fn split_chains(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Normal scores of pooled average ranks, `Phi^-1((r - 3/8) / (S + 1/4))`.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut idx: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in chains.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            idx.push((x, ci, i));
        }
    }
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = idx.len() as f64;
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && idx[end].0 == idx[start].0 {
            end += 1;
        }
        // Average 1-based rank of the tie block.
        let rank = (start + 1 + end) as f64 / 2.0;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for &(_, ci, i) in &idx[start..end] {
            out[ci][i] = z;
        }
        start = end;
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Gelman-Rubin potential scale reduction on already-split chains.
/// `NaN` when every chain is constant at the same value, `+inf` when
/// chains are constant at different values.
pub fn classic_rhat(chains: &[&[f64]]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b = n * var(&means);
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    if w <= 0.0 || !w.is_finite() {
        return if b > 0.0 { f64::INFINITY } else { f64::NAN };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Biased autocovariance at all lags via zero-padded FFT.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
pub fn ess(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(&c[..n])).collect();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let w = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let b = if m > 1 { nf * var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    if !(var_plus > 0.0) || !(w > 0.0) {
        return f64::NAN;
    }
    let rho = |t: usize| -> f64 {
        let mean_acov = acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let r0 = if t == 0 { 1.0 } else { rho(t) };
        let pair = r0 + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    (m as f64 * nf) / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn iid_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
    }

    #[test]
    fn iid_normal_draws_look_converged() {
        for seed in 0..5 {
            let chains = iid_chains(4, 1000, seed);
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            let d = diagnose("x", &refs);
            assert!(d.rhat >= 0.99 && d.rhat <= 1.02, "rhat {}", d.rhat);
            assert!((d.ess_bulk - 4000.0).abs() <= 0.2 * 4000.0, "ess {}", d.ess_bulk);
            assert!(d.ess_bulk <= 4000.0);
        }
    }

    #[test]
    fn disjoint_constant_chains_diverge() {
        let a = vec![0.0; 100];
        let b = vec![1.0; 100];
        let d = diagnose("x", &[&a, &b]);
        assert!(d.rhat > 2.0);
        assert!(!d.degenerate);
    }

    #[test]
    fn identical_constant_chains_are_flagged() {
        let a = vec![0.25; 100];
        let d = diagnose("x", &[&a, &a]);
        assert!(d.degenerate);
        assert!(d.rhat.is_nan());
        let report = summarize(vec![d], 1.01);
        assert!(!report.passed);
    }

    #[test]
    fn shifted_chains_fail_threshold() {
        let mut chains = iid_chains(4, 500, 9);
        for v in chains[0].iter_mut() {
            *v += 3.0;
        }
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        assert!(diagnose("x", &refs).rhat > 1.1);
    }

    #[test]
    fn autocorrelated_chain_has_smaller_ess() {
        // AR(1) with phi = 0.9 has integrated time (1 + phi) / (1 - phi) = 19.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..20_000)
                    .map(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let e = ess(&refs);
        let expected = 80_000.0 / 19.0;
        assert!((e - expected).abs() < 0.2 * expected, "ess {e} vs {expected}");
    }

    #[test]
    fn fft_autocovariance_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..257).map(|_| rng.random::<f64>()).collect();
        let fast = autocovariance(&x);
        let m = mean(&x);
        for t in [0, 1, 5, 100, 256] {
            let direct: f64 = (0..x.len() - t).map(|i| (x[i] - m) * (x[i + t] - m)).sum::<f64>() / x.len() as f64;
            assert!((fast[t] - direct).abs() < 1e-12);
        }
    }
}
