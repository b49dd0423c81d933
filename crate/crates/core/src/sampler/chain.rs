//! One Metropolis-within-Gibbs chain.
//!
//! Every coordinate lives on an unconstrained scale (`logit p_c`, `logit q_k`,
//! hyperparameter coordinates from [`super::transform`]) and is updated by a
//! Gaussian random walk whose log step size follows a Robbins-Monro recursion
//! towards the target acceptance rate while adapting, then stays fixed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::transform;
use super::SamplerConfig;
use crate::data::GamesDataset;
use crate::error::{Error, Result};
use crate::model::{ln_hyperprior, ln_prior_p, HyperParams, PriorFamily, PriorSpec};
use crate::special::{ln_logistic, ln_normal_cdf, logistic, logit};

const INITIAL_STEP_P: f64 = 1.0;
const INITIAL_STEP_Q: f64 = 0.5;
const INITIAL_STEP_HYPER: f64 = 0.5;
const ADAPT_EXPONENT: f64 = 0.6;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Random-walk step size with its acceptance bookkeeping.
#[derive(Debug, Clone)]
struct Proposal {
    ln_step: f64,
    updates: u64,
    proposed: u64,
    accepted: u64,
}

impl Proposal {
    fn new(step: f64) -> Self {
        Proposal { ln_step: step.ln(), updates: 0, proposed: 0, accepted: 0 }
    }

    fn step(&self) -> f64 {
        self.ln_step.exp()
    }

    fn record(&mut self, accepted: bool, adapting: bool, target: f64) {
        if adapting {
            self.updates += 1;
            let gain = (self.updates as f64).powf(-ADAPT_EXPONENT);
            self.ln_step += gain * (f64::from(accepted as u8) - target);
            self.ln_step = self.ln_step.clamp(-20.0, 10.0);
        } else {
            self.proposed += 1;
            self.accepted += accepted as u64;
        }
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Post-adaptation acceptance rates of one chain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainAcceptance {
    pub p_mean: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q: [f64; 3],
    pub hyper: Vec<f64>,
    pub paired: Vec<f64>,
    pub final_step_p_median: f64,
}

/// Sufficient statistics of the `p_c` values for the hyperparameter conditionals.
#[derive(Debug, Clone, Copy, Default)]
struct PriorStats {
    count: f64,
    sum_ln_p: f64,
    sum_ln_1mp: f64,
    sum_g: f64,
    sum_g2: f64,
}

pub(crate) struct Chain<'a> {
    data: &'a GamesDataset,
    spec: &'a PriorSpec,
    target_accept: f64,
    rng: ChaCha8Rng,
    /// Per NOC: unique medallists and population.
    unique: Vec<f64>,
    population: Vec<f64>,
    /// Pooled multiplicity counts.
    pooled: [f64; 4],
    theta_p: Vec<f64>,
    ln_p: Vec<f64>,
    ln_1mp: Vec<f64>,
    theta_q: [f64; 3],
    theta_h: Vec<f64>,
    hyper: HyperParams,
    prop_p: Vec<Proposal>,
    prop_q: [Proposal; 3],
    prop_h: Vec<Proposal>,
    pairs: Vec<(usize, usize)>,
    prop_pair: Vec<Proposal>,
}

impl<'a> Chain<'a> {
    pub(crate) fn new(data: &'a GamesDataset, spec: &'a PriorSpec, config: &SamplerConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        let c = data.len();
        let unique: Vec<f64> = data.records.iter().map(|r| r.unique_medalists() as f64).collect();
        let population: Vec<f64> = data.records.iter().map(|r| r.population as f64).collect();
        let pooled_u = data.pooled_counts();
        let pooled = pooled_u.map(|m| m as f64);

        let mut theta_p = Vec::with_capacity(c);
        for (u, n) in unique.iter().zip(&population) {
            let naive = (u + 0.5) / (n + 1.0);
            let jitter: f64 = rng.sample(StandardNormal);
            theta_p.push(logit(naive) + jitter);
        }

        // Pooled continuation fractions: medallists with >= k medals over those with >= k-1.
        let at_least = |k: usize| -> f64 { pooled[k - 1..].iter().sum() };
        let mut theta_q = [0.0; 3];
        for (slot, k) in theta_q.iter_mut().zip(2..=4) {
            let (num, den) = (at_least(k), at_least(k - 1));
            let frac = (num + 0.5) / (den + 1.0);
            let jitter: f64 = rng.sample(StandardNormal);
            *slot = logit(frac) + jitter;
        }

        let theta_h = initial_hyper(&theta_p, spec, &mut rng);
        let hyper = transform::to_hyper(&theta_h, spec);
        let pairs = transform::paired_coordinates(spec.family);

        let mut chain = Chain {
            data,
            spec,
            target_accept: config.target_accept,
            rng,
            unique,
            population,
            pooled,
            ln_p: theta_p.iter().map(|&t| ln_logistic(t)).collect(),
            ln_1mp: theta_p.iter().map(|&t| ln_logistic(-t)).collect(),
            theta_p,
            theta_q,
            prop_p: vec![Proposal::new(INITIAL_STEP_P); c],
            prop_q: std::array::from_fn(|_| Proposal::new(INITIAL_STEP_Q)),
            prop_h: vec![Proposal::new(INITIAL_STEP_HYPER); transform::dim(spec.family)],
            prop_pair: vec![Proposal::new(INITIAL_STEP_HYPER); pairs.len()],
            pairs,
            theta_h,
            hyper,
        };
        chain.check_initial_state()?;
        Ok(chain)
    }

    fn check_initial_state(&mut self) -> Result<()> {
        for k in 0..3 {
            if !self.q_target(k, self.theta_q[k]).is_finite() {
                return Err(Error::Sampler(format!("non-finite log-posterior at initialization in q{}", k + 2)));
            }
        }
        let stats = self.prior_stats();
        if !self.hyper_target(&self.theta_h.clone(), &stats).is_finite() {
            return Err(Error::Sampler(format!(
                "non-finite log-posterior at initialization in hyperparameters {:?}",
                self.hyper.values()
            )));
        }
        for i in 0..self.theta_p.len() {
            if !self.p_target(i, self.theta_p[i]).is_finite() {
                return Err(Error::Sampler(format!(
                    "non-finite log-posterior at initialization in p of {}",
                    self.data.records[i].code
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn p(&self) -> impl Iterator<Item = f64> + '_ {
        self.theta_p.iter().map(|&t| logistic(t))
    }

    pub(crate) fn q(&self) -> [f64; 3] {
        self.theta_q.map(logistic)
    }

    pub(crate) fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    /// Conditional log density of `logit p_c`, Jacobian included.
    fn p_target(&self, i: usize, theta: f64) -> f64 {
        let ln_p = ln_logistic(theta);
        let ln_1mp = ln_logistic(-theta);
        let p = logistic(theta);
        // sum_i m_i ln(n p f_i) - n p sum_i f_i, keeping only the p-dependent part.
        let lik = self.unique[i] * ln_p - self.population[i] * p;
        lik + ln_prior_p(ln_p, ln_1mp, &self.hyper, self.spec.family) + ln_p + ln_1mp
    }

    /// Conditional log density of `logit q_{k+2}`: a binomial kernel in the pooled counts.
    fn q_target(&self, k: usize, theta: f64) -> f64 {
        let m = &self.pooled;
        let (succ, fail) = match k {
            0 => (m[1] + m[2] + m[3], m[0]),
            1 => (m[2] + m[3], m[1]),
            _ => (m[3], m[2]),
        };
        (succ + 1.0) * ln_logistic(theta) + (fail + 1.0) * ln_logistic(-theta)
    }

    fn prior_stats(&self) -> PriorStats {
        let mut s = PriorStats { count: self.ln_p.len() as f64, ..Default::default() };
        for (&lp, &l1) in self.ln_p.iter().zip(&self.ln_1mp) {
            s.sum_ln_p += lp;
            s.sum_ln_1mp += l1;
            let g = match self.spec.family {
                PriorFamily::TruncLogNormal => lp,
                PriorFamily::LogitNormal => lp - l1,
                _ => 0.0,
            };
            s.sum_g += g;
            s.sum_g2 += g * g;
        }
        s
    }

    /// Hyperprior plus the summed `p_c` prior, on the transformed scale.
    fn hyper_target(&self, theta: &[f64], stats: &PriorStats) -> f64 {
        let hyper = transform::to_hyper(theta, self.spec);
        let base = ln_hyperprior(&hyper, self.spec);
        if base == f64::NEG_INFINITY {
            return base;
        }
        let countries = match &hyper {
            HyperParams::Beta { alpha, beta } => {
                (alpha - 1.0) * stats.sum_ln_p + (beta - 1.0) * stats.sum_ln_1mp
                    - stats.count * crate::special::ln_beta(*alpha, *beta)
            }
            HyperParams::Normal { mu, sigma } => {
                let quad = stats.sum_g2 - 2.0 * mu * stats.sum_g + stats.count * mu * mu;
                let mut v = -0.5 * quad / (sigma * sigma) - stats.count * (LN_SQRT_2PI + sigma.ln()) - stats.sum_ln_p;
                if self.spec.family == PriorFamily::TruncLogNormal {
                    v -= stats.count * ln_normal_cdf(-mu / sigma);
                } else {
                    v -= stats.sum_ln_1mp;
                }
                v
            }
            HyperParams::Mixture { .. } => self
                .ln_p
                .iter()
                .zip(&self.ln_1mp)
                .map(|(&lp, &l1)| ln_prior_p(lp, l1, &hyper, self.spec.family))
                .sum(),
        };
        base + countries + transform::ln_jacobian(theta, self.spec)
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        if log_ratio >= 0.0 {
            return true;
        }
        if log_ratio.is_nan() {
            return false;
        }
        let u: f64 = self.rng.random();
        u.ln() < log_ratio
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub(crate) fn sweep(&mut self, adapting: bool) {
        let target = self.target_accept;

        for i in 0..self.theta_p.len() {
            let current = self.theta_p[i];
            let proposal = current + self.prop_p[i].step() * self.normal();
            let ratio = self.p_target(i, proposal) - self.p_target(i, current);
            let ok = self.accept(ratio);
            if ok {
                self.theta_p[i] = proposal;
                self.ln_p[i] = ln_logistic(proposal);
                self.ln_1mp[i] = ln_logistic(-proposal);
            }
            self.prop_p[i].record(ok, adapting, target);
        }

        for k in 0..3 {
            let current = self.theta_q[k];
            let proposal = current + self.prop_q[k].step() * self.normal();
            let ratio = self.q_target(k, proposal) - self.q_target(k, current);
            let ok = self.accept(ratio);
            if ok {
                self.theta_q[k] = proposal;
            }
            self.prop_q[k].record(ok, adapting, target);
        }

        let stats = self.prior_stats();
        let mut current_target = self.hyper_target(&self.theta_h, &stats);
        for k in 0..self.theta_h.len() {
            let mut proposal = self.theta_h.clone();
            proposal[k] += self.prop_h[k].step() * self.normal();
            let proposed_target = self.hyper_target(&proposal, &stats);
            let ok = self.accept(proposed_target - current_target);
            if ok {
                self.theta_h = proposal;
                current_target = proposed_target;
            }
            self.prop_h[k].record(ok, adapting, target);
        }
        for j in 0..self.pairs.len() {
            let (a, b) = self.pairs[j];
            let shift = self.prop_pair[j].step() * self.normal();
            let mut proposal = self.theta_h.clone();
            proposal[a] += shift;
            proposal[b] += shift;
            let proposed_target = self.hyper_target(&proposal, &stats);
            let ok = self.accept(proposed_target - current_target);
            if ok {
                self.theta_h = proposal;
                current_target = proposed_target;
            }
            self.prop_pair[j].record(ok, adapting, target);
        }
        self.hyper = transform::to_hyper(&self.theta_h, self.spec);
    }

    pub(crate) fn acceptance(&self) -> ChainAcceptance {
        let rates: Vec<f64> = self.prop_p.iter().map(Proposal::rate).collect();
        let mut steps: Vec<f64> = self.prop_p.iter().map(Proposal::step).collect();
        steps.sort_by(f64::total_cmp);
        ChainAcceptance {
            p_mean: rates.iter().sum::<f64>() / rates.len() as f64,
            p_min: rates.iter().copied().fold(f64::INFINITY, f64::min),
            p_max: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            q: std::array::from_fn(|k| self.prop_q[k].rate()),
            hyper: self.prop_h.iter().map(Proposal::rate).collect(),
            paired: self.prop_pair.iter().map(Proposal::rate).collect(),
            final_step_p_median: steps[steps.len() / 2],
        }
    }
}

fn initial_hyper(theta_p: &[f64], spec: &PriorSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = theta_p.len() as f64;
    let p: Vec<f64> = theta_p.iter().map(|&t| logistic(t)).collect();
    let mean_p = (p.iter().sum::<f64>() / n).clamp(1e-12, 0.5);
    let mut jitter = || -> f64 { rng.sample(StandardNormal) };
    let beta_for = |alpha: f64, scale: f64| -> f64 {
        (alpha * (1.0 - mean_p) / mean_p * scale).clamp(spec.beta_upper * 1e-9, spec.beta_upper * (1.0 - 1e-6))
    };
    match spec.family {
        PriorFamily::Beta => {
            let alpha = spec.alpha_upper * logistic(jitter());
            let beta = beta_for(alpha, 1.0);
            transform::from_hyper(&HyperParams::Beta { alpha, beta }, spec)
        }
        PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => {
            let g: Vec<f64> = theta_p
                .iter()
                .map(|&t| if spec.family == PriorFamily::TruncLogNormal { ln_logistic(t) } else { t })
                .collect();
            let mean = g.iter().sum::<f64>() / n;
            let sd = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt().max(0.1);
            let mu = mean + jitter();
            let sigma = (sd * (0.5 * jitter()).exp()).max(spec.sigma_floor * 10.0);
            vec![mu, sigma.ln()]
        }
        PriorFamily::BetaMixture3 => {
            let mut alpha = [0.0; 3];
            let mut beta = [0.0; 3];
            for j in 0..3 {
                alpha[j] = spec.alpha_upper * logistic(jitter());
                beta[j] = beta_for(alpha[j], jitter().exp());
            }
            let v1 = logistic(logit(1.0 / 3.0) + 0.5 * jitter());
            let v2 = logistic(0.5 * jitter());
            let weights = [v1, (1.0 - v1) * v2, (1.0 - v1) * (1.0 - v2)];
            transform::from_hyper(&HyperParams::Mixture { alpha, beta, weights }, spec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GamesMeta, NocRecord};
    use crate::model::{log_posterior, ModelParams};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn toy() -> GamesDataset {
        let rows = [(5_000_000u64, [12u32, 2, 1, 0]), (120_000, [2, 0, 0, 0]), (80_000_000, [30, 3, 0, 1]), (300_000, [0; 4])];
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(population, counts))| NocRecord {
                code: format!("C{i}"),
                name: String::new(),
                population,
                counts,
                medals: None,
            })
            .collect();
        let meta = GamesMeta { year: 2024, label: "toy".into(), host: "C0".into(), total_medals: 100, medal_quota: 50 };
        GamesDataset::new(meta, records).unwrap().0
    }

    /// Each conditional must differ from the full joint density only by a
    /// term that does not depend on the coordinate being updated.
    #[test]
    fn conditionals_track_the_joint_posterior() {
        let data = toy();
        for family in PriorFamily::ALL {
            let spec = PriorSpec::new(family);
            let config = SamplerConfig::default();
            let chain = Chain::new(&data, &spec, &config, ChaCha8Rng::seed_from_u64(3)).unwrap();
            let joint = |chain: &Chain, theta_p: &[f64], theta_q: [f64; 3], theta_h: &[f64]| -> f64 {
                let params = ModelParams {
                    p: theta_p.iter().map(|&t| logistic(t)).collect(),
                    q: theta_q.map(logistic),
                    hyper: transform::to_hyper(theta_h, chain.spec),
                };
                log_posterior(chain.data, &params, chain.spec).unwrap()
            };
            let base = joint(&chain, &chain.theta_p, chain.theta_q, &chain.theta_h);

            for i in 0..data.len() {
                let mut tp = chain.theta_p.clone();
                tp[i] += 0.3;
                let jac = |t: f64| ln_logistic(t) + ln_logistic(-t);
                let d_joint = joint(&chain, &tp, chain.theta_q, &chain.theta_h) + jac(tp[i])
                    - base
                    - jac(chain.theta_p[i]);
                let d_cond = chain.p_target(i, tp[i]) - chain.p_target(i, chain.theta_p[i]);
                assert_relative_eq!(d_joint, d_cond, epsilon = 1e-6, max_relative = 1e-8);
            }
            for k in 0..3 {
                let mut tq = chain.theta_q;
                tq[k] -= 0.4;
                let jac = |t: f64| ln_logistic(t) + ln_logistic(-t);
                let d_joint = joint(&chain, &chain.theta_p, tq, &chain.theta_h) + jac(tq[k])
                    - base
                    - jac(chain.theta_q[k]);
                let d_cond = chain.q_target(k, tq[k]) - chain.q_target(k, chain.theta_q[k]);
                assert_relative_eq!(d_joint, d_cond, epsilon = 1e-6, max_relative = 1e-8);
            }
            let stats = chain.prior_stats();
            for k in 0..chain.theta_h.len() {
                let mut th = chain.theta_h.clone();
                th[k] += 0.2;
                let d_joint = joint(&chain, &chain.theta_p, chain.theta_q, &th) + transform::ln_jacobian(&th, &spec)
                    - base
                    - transform::ln_jacobian(&chain.theta_h, &spec);
                let d_cond = chain.hyper_target(&th, &stats) - chain.hyper_target(&chain.theta_h, &stats);
                assert_relative_eq!(d_joint, d_cond, epsilon = 1e-5, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn adaptation_moves_step_towards_target() {
        let mut prop = Proposal::new(1.0);
        for _ in 0..200 {
            prop.record(false, true, 0.44);
        }
        assert!(prop.step() < 1.0);
        let frozen = prop.ln_step;
        prop.record(true, false, 0.44);
        assert_eq!(prop.ln_step, frozen);
        assert_eq!(prop.rate(), 1.0);
    }
}
