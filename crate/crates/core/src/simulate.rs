//! Forward simulation from the hierarchical model.

use rand::Rng;
use rand_distr::{Dirichlet, Distribution, Gamma, Normal, Poisson, StandardUniform};
use statrs::distribution::{ContinuousCDF, Normal as StatrsNormal};

use crate::data::{GamesDataset, GamesMeta, NocRecord};
use crate::error::{Error, Result};
use crate::model::{cell_probabilities, HyperParams, ModelParams, PriorFamily, PriorSpec, MIXTURE_COMPONENTS};
use crate::special::log_sum_exp;

/// `ln Gamma(shape, 1)` variate, stable for shapes far below one.
fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return Gamma::new(shape, 1.0).expect("valid shape").sample(rng).ln();
    }
    let boosted = Gamma::new(shape + 1.0, 1.0).expect("valid shape").sample(rng).ln();
    let u: f64 = rng.sample(StandardUniform);
    boosted + u.ln() / shape
}

/// `(ln x, ln(1-x))` for `x ~ Beta(a, b)`, without underflowing tiny `x`.
pub fn ln_beta_variate<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> (f64, f64) {
    let ga = ln_gamma_variate(a, rng);
    let gb = ln_gamma_variate(b, rng);
    let total = log_sum_exp([ga, gb]);
    (ga - total, gb - total)
}

/// Hyperparameters drawn from their hyperpriors.
pub fn draw_hyper<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> HyperParams {
    let bounded = |upper: f64, rng: &mut R| loop {
        let v = upper * rng.sample::<f64, _>(StandardUniform);
        if v > 0.0 {
            break v;
        }
    };
    match spec.family {
        PriorFamily::Beta => HyperParams::Beta { alpha: bounded(spec.alpha_upper, rng), beta: bounded(spec.beta_upper, rng) },
        PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => {
            let mu = Normal::new(spec.mu_location, spec.mu_sd()).expect("valid normal").sample(rng);
            let sigma = Gamma::new(spec.sigma_shape, 1.0 / spec.sigma_rate).expect("valid gamma").sample(rng);
            HyperParams::Normal { mu, sigma: sigma.max(spec.sigma_floor) }
        }
        PriorFamily::BetaMixture3 => {
            let mut alpha = [0.0; MIXTURE_COMPONENTS];
            let mut beta = [0.0; MIXTURE_COMPONENTS];
            for j in 0..MIXTURE_COMPONENTS {
                alpha[j] = bounded(spec.alpha_upper, rng);
                beta[j] = bounded(spec.beta_upper, rng);
            }
            let w = Dirichlet::new(spec.dirichlet).expect("valid concentrations").sample(rng);
            HyperParams::Mixture { alpha, beta, weights: w }
        }
    }
}

/// `ln p` for one NOC given hyperparameters.
pub fn draw_ln_p<R: Rng + ?Sized>(hyper: &HyperParams, family: PriorFamily, rng: &mut R) -> f64 {
    match (hyper, family) {
        (HyperParams::Beta { alpha, beta }, _) => ln_beta_variate(*alpha, *beta, rng).0,
        (HyperParams::Normal { mu, sigma }, PriorFamily::TruncLogNormal) => {
            // inverse CDF restricted to ln p < 0
            let n = StatrsNormal::new(*mu, *sigma).expect("valid normal");
            let top = n.cdf(0.0);
            let u: f64 = rng.sample(StandardUniform);
            n.inverse_cdf((u * top).max(f64::MIN_POSITIVE)).min(-f64::EPSILON)
        }
        (HyperParams::Normal { mu, sigma }, _) => {
            let z: f64 = Normal::new(*mu, *sigma).expect("valid normal").sample(rng);
            // ln logistic(z)
            -log_sum_exp([0.0, -z])
        }
        (HyperParams::Mixture { alpha, beta, weights }, _) => {
            let u: f64 = rng.sample(StandardUniform);
            let mut acc = 0.0;
            let mut j = MIXTURE_COMPONENTS - 1;
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    j = k;
                    break;
                }
            }
            ln_beta_variate(alpha[j], beta[j], rng).0
        }
    }
}

/// Continuation probabilities from their uniform priors.
pub fn draw_q<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let mut q = [0.0; 3];
    for v in q.iter_mut() {
        *v = loop {
            let u: f64 = rng.sample(StandardUniform);
            if u > 0.0 {
                break u;
            }
        };
    }
    q
}

/// Multiplicity counts of one NOC.
pub fn draw_counts<R: Rng + ?Sized>(population: u64, p: f64, q: [f64; 3], rng: &mut R) -> Result<[u32; 4]> {
    let cells = cell_probabilities(p, q[0], q[1], q[2])?;
    let mut out = [0u32; 4];
    for (o, prob) in out.iter_mut().zip(cells.0) {
        let lambda = population as f64 * prob;
        if lambda > 0.0 {
            let d = Poisson::new(lambda).map_err(|e| Error::Numeric(format!("Poisson({lambda}): {e}")))?;
            *o = d.sample(rng) as u32;
        }
    }
    Ok(out)
}

/// Dataset with simulated counts for the given NOC codes and populations.
/// The metadata totals are set to the simulated medal total.
pub fn simulate_dataset<R: Rng + ?Sized>(
    nocs: &[(String, u64)],
    p: &[f64],
    q: [f64; 3],
    year: u16,
    rng: &mut R,
) -> Result<GamesDataset> {
    if nocs.len() != p.len() {
        return Err(Error::Dimension { expected: nocs.len(), found: p.len() });
    }
    let records = nocs
        .iter()
        .zip(p)
        .map(|((code, population), &pc)| {
            Ok(NocRecord {
                code: code.clone(),
                name: code.clone(),
                population: *population,
                counts: draw_counts(*population, pc, q, rng)?,
                medals: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total: u32 = records.iter().map(NocRecord::total_medals).sum::<u32>().max(1);
    let meta = GamesMeta {
        year,
        label: format!("Simulated {year}"),
        host: nocs[0].0.clone(),
        total_medals: total,
        medal_quota: total,
    };
    Ok(GamesDataset::new(meta, records)?.0)
}

/// A full draw from the joint prior and the matching dataset. Also returns
/// `ln p` so callers can compare parameters too small for `f64`.
pub fn draw_from_prior<R: Rng + ?Sized>(
    spec: &PriorSpec,
    nocs: &[(String, u64)],
    rng: &mut R,
) -> Result<(ModelParams, Vec<f64>, GamesDataset)> {
    let hyper = draw_hyper(spec, rng);
    let q = draw_q(rng);
    let ln_p: Vec<f64> = nocs.iter().map(|_| draw_ln_p(&hyper, spec.family, rng)).collect();
    let p: Vec<f64> = ln_p.iter().map(|l| l.exp()).collect();
    let data = simulate_dataset(nocs, &p, q, 2024, rng)?;
    Ok((ModelParams { p, q, hyper }, ln_p, data))
}
