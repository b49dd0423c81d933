//! Hierarchical Poisson model for per-athlete medal multiplicities.
//!
//! For NOC `c` with population `n_c`, the number of athletes winning exactly
//! `i` medals is `Poisson(n_c * p_{i,c})` where
//!
//! ```text
//! p_{1,c} = p_c (1 - q2)
//! p_{2,c} = p_c q2 (1 - q3)
//! p_{3,c} = p_c q2 q3 (1 - q4)
//! p_{4,c} = p_c q2 q3 q4          (4 or more medals)
//! ```
//!
//! `p_c` is the NOC-specific chance of producing a medallist and carries one
//! of several hierarchical priors; `q2..q4` are shared continuation
//! probabilities with uniform priors.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::GamesDataset;
use crate::error::{Error, Result};
use crate::special::{ln_beta, ln_factorial, ln_normal_cdf, ln_normal_pdf, log_sum_exp};

/// Number of mixture components for [`PriorFamily::BetaMixture3`].
pub const MIXTURE_COMPONENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    Beta,
    #[serde(rename = "lognormal")]
    TruncLogNormal,
    #[serde(rename = "logitnormal")]
    LogitNormal,
    #[serde(rename = "mixture")]
    BetaMixture3,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 4] =
        [PriorFamily::Beta, PriorFamily::TruncLogNormal, PriorFamily::LogitNormal, PriorFamily::BetaMixture3];

    pub fn name(self) -> &'static str {
        match self {
            PriorFamily::Beta => "beta",
            PriorFamily::TruncLogNormal => "lognormal",
            PriorFamily::LogitNormal => "logitnormal",
            PriorFamily::BetaMixture3 => "mixture",
        }
    }
}

impl std::str::FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown prior family `{s}`")))
    }
}

/// How the second argument of the Normal hyperprior on `mu` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Precision,
    #[serde(rename = "sd")]
    StdDev,
}

/// Prior family for `p_c` plus every hyperprior constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub family: PriorFamily,
    /// `alpha ~ Uniform(0, alpha_upper)`.
    pub alpha_upper: f64,
    /// `beta ~ Uniform(0, beta_upper)`.
    pub beta_upper: f64,
    /// `mu ~ Normal(mu_location, mu_scale)`, scale read per `mu_scale_kind`.
    pub mu_location: f64,
    pub mu_scale: f64,
    pub mu_scale_kind: ScaleKind,
    /// `sigma ~ Gamma(shape, rate)`.
    pub sigma_shape: f64,
    pub sigma_rate: f64,
    /// Lower bound on `sigma`; smaller values are outside the support.
    pub sigma_floor: f64,
    /// Dirichlet concentration for the mixture weights.
    pub dirichlet: [f64; MIXTURE_COMPONENTS],
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::new(PriorFamily::Beta)
    }
}

impl PriorSpec {
    pub fn new(family: PriorFamily) -> Self {
        PriorSpec {
            family,
            alpha_upper: 1.0,
            beta_upper: 1e8,
            mu_location: -15.0,
            mu_scale: 0.323,
            mu_scale_kind: ScaleKind::Precision,
            sigma_shape: 0.001,
            sigma_rate: 0.001,
            sigma_floor: 1e-6,
            dirichlet: [1.0; MIXTURE_COMPONENTS],
        }
    }

    /// Standard deviation of the Normal hyperprior on `mu`.
    pub fn mu_sd(&self) -> f64 {
        match self.mu_scale_kind {
            ScaleKind::Precision => 1.0 / self.mu_scale.sqrt(),
            ScaleKind::StdDev => self.mu_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_upper", self.alpha_upper),
            ("beta_upper", self.beta_upper),
            ("mu_scale", self.mu_scale),
            ("sigma_shape", self.sigma_shape),
            ("sigma_rate", self.sigma_rate),
            ("sigma_floor", self.sigma_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("prior constant {name} must be positive, got {v}")));
            }
        }
        if self.dirichlet.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::Validation("Dirichlet concentrations must be positive".into()));
        }
        if !self.mu_location.is_finite() {
            return Err(Error::Validation("mu_location must be finite".into()));
        }
        Ok(())
    }
}

/// Hyperparameters of the prior on `p_c`. Both Normal-based families share
/// the `Normal` variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HyperParams {
    Beta { alpha: f64, beta: f64 },
    Normal { mu: f64, sigma: f64 },
    Mixture {
        alpha: [f64; MIXTURE_COMPONENTS],
        beta: [f64; MIXTURE_COMPONENTS],
        weights: [f64; MIXTURE_COMPONENTS],
    },
}

impl HyperParams {
    pub fn names(family: PriorFamily) -> Vec<&'static str> {
        match family {
            PriorFamily::Beta => vec!["alpha", "beta"],
            PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => vec!["mu", "sigma"],
            PriorFamily::BetaMixture3 => {
                vec!["alpha1", "beta1", "alpha2", "beta2", "alpha3", "beta3", "w1", "w2", "w3"]
            }
        }
    }

    /// Flat values in the order of [`HyperParams::names`].
    pub fn values(&self) -> Vec<f64> {
        match self {
            HyperParams::Beta { alpha, beta } => vec![*alpha, *beta],
            HyperParams::Normal { mu, sigma } => vec![*mu, *sigma],
            HyperParams::Mixture { alpha, beta, weights } => {
                let mut v = Vec::with_capacity(9);
                for j in 0..MIXTURE_COMPONENTS {
                    v.push(alpha[j]);
                    v.push(beta[j]);
                }
                v.extend_from_slice(weights);
                v
            }
        }
    }

    pub fn from_values(family: PriorFamily, v: &[f64]) -> Result<Self> {
        let expected = Self::names(family).len();
        if v.len() != expected {
            return Err(Error::Dimension { expected, found: v.len() });
        }
        Ok(match family {
            PriorFamily::Beta => HyperParams::Beta { alpha: v[0], beta: v[1] },
            PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => HyperParams::Normal { mu: v[0], sigma: v[1] },
            PriorFamily::BetaMixture3 => HyperParams::Mixture {
                alpha: [v[0], v[2], v[4]],
                beta: [v[1], v[3], v[5]],
                weights: [v[6], v[7], v[8]],
            },
        })
    }

    fn matches(&self, family: PriorFamily) -> bool {
        matches!(
            (self, family),
            (HyperParams::Beta { .. }, PriorFamily::Beta)
                | (HyperParams::Normal { .. }, PriorFamily::TruncLogNormal | PriorFamily::LogitNormal)
                | (HyperParams::Mixture { .. }, PriorFamily::BetaMixture3)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `p_c = P(X_c >= 1)` for every NOC in dataset order.
    pub p: Vec<f64>,
    /// `[q2, q3, q4]`.
    pub q: [f64; 3],
    pub hyper: HyperParams,
}

/// Probabilities of winning exactly 1, 2, 3 and >=4 medals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbabilities(pub [f64; 4]);

impl CellProbabilities {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} is outside [0, 1]")))
    }
}

/// Multiplicity fractions `p_{i,c} / p_c`, which sum to one.
pub fn multiplicity_fractions(q: [f64; 3]) -> [f64; 4] {
    let [q2, q3, q4] = q;
    [1.0 - q2, q2 * (1.0 - q3), q2 * q3 * (1.0 - q4), q2 * q3 * q4]
}

/// Expected medals per medallist, the NOC-independent factor in the expected rate.
pub fn medals_per_medallist(q: [f64; 3]) -> f64 {
    let [q2, q3, q4] = q;
    1.0 - q2 + 2.0 * q2 * (1.0 - q3) + 3.0 * q2 * q3 * (1.0 - q4) + 4.0 * q2 * q3 * q4
}

pub fn cell_probabilities(p: f64, q2: f64, q3: f64, q4: f64) -> Result<CellProbabilities> {
    check_unit("p", p)?;
    check_unit("q2", q2)?;
    check_unit("q3", q3)?;
    check_unit("q4", q4)?;
    let f = multiplicity_fractions([q2, q3, q4]);
    Ok(CellProbabilities([p * f[0], p * f[1], p * f[2], p * f[3]]))
}

/// Expected medals per person, `E(M_c / n_c)`.
pub fn expected_rate(p: f64, q2: f64, q3: f64, q4: f64) -> Result<f64> {
    check_unit("p", p)?;
    check_unit("q2", q2)?;
    check_unit("q3", q3)?;
    check_unit("q4", q4)?;
    Ok(p * medals_per_medallist([q2, q3, q4]))
}

/// Full Poisson log-likelihood including the `ln(m!)` terms.
pub fn log_likelihood(data: &GamesDataset, params: &ModelParams) -> Result<f64> {
    if params.p.len() != data.len() {
        return Err(Error::Dimension { expected: data.len(), found: params.p.len() });
    }
    let [q2, q3, q4] = params.q;
    let mut total = 0.0;
    for (record, &p) in data.records.iter().zip(&params.p) {
        let cells = cell_probabilities(p, q2, q3, q4)?;
        let n = record.population as f64;
        for (&m, &pi) in record.counts.iter().zip(&cells.0) {
            let lambda = n * pi;
            if m > 0 {
                total += m as f64 * lambda.ln() - ln_factorial(m as u64);
            }
            total -= lambda;
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("log-likelihood is not finite ({total})")));
    }
    Ok(total)
}

/// Log prior density of one `p_c` given the hyperparameters, from `ln p` and `ln(1-p)`.
pub fn ln_prior_p(ln_p: f64, ln_1mp: f64, hyper: &HyperParams, family: PriorFamily) -> f64 {
    match (hyper, family) {
        (HyperParams::Beta { alpha, beta }, _) => ln_beta_density(ln_p, ln_1mp, *alpha, *beta),
        (HyperParams::Normal { mu, sigma }, PriorFamily::TruncLogNormal) => {
            let z = (ln_p - mu) / sigma;
            ln_normal_pdf(z) - sigma.ln() - ln_p - ln_normal_cdf(-mu / sigma)
        }
        (HyperParams::Normal { mu, sigma }, _) => {
            let z = (ln_p - ln_1mp - mu) / sigma;
            ln_normal_pdf(z) - sigma.ln() - ln_p - ln_1mp
        }
        (HyperParams::Mixture { alpha, beta, weights }, _) => log_sum_exp(
            (0..MIXTURE_COMPONENTS).map(|j| weights[j].ln() + ln_beta_density(ln_p, ln_1mp, alpha[j], beta[j])),
        ),
    }
}

fn ln_beta_density(ln_p: f64, ln_1mp: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * ln_p + (b - 1.0) * ln_1mp - ln_beta(a, b)
}

fn ln_uniform(v: f64, upper: f64) -> f64 {
    if v > 0.0 && v <= upper {
        -upper.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log density of the hyperparameters under their hyperpriors.
pub fn ln_hyperprior(hyper: &HyperParams, spec: &PriorSpec) -> f64 {
    if !hyper.matches(spec.family) {
        return f64::NEG_INFINITY;
    }
    match hyper {
        HyperParams::Beta { alpha, beta } => ln_uniform(*alpha, spec.alpha_upper) + ln_uniform(*beta, spec.beta_upper),
        HyperParams::Normal { mu, sigma } => {
            if !(mu.is_finite() && sigma.is_finite() && *sigma >= spec.sigma_floor) {
                return f64::NEG_INFINITY;
            }
            let sd = spec.mu_sd();
            let ln_mu = ln_normal_pdf((mu - spec.mu_location) / sd) - sd.ln();
            let (a, b) = (spec.sigma_shape, spec.sigma_rate);
            let ln_sigma = a * b.ln() - ln_gamma(a) + (a - 1.0) * sigma.ln() - b * sigma;
            ln_mu + ln_sigma
        }
        HyperParams::Mixture { alpha, beta, weights } => {
            let sum: f64 = weights.iter().sum();
            if weights.iter().any(|&w| !(w > 0.0 && w < 1.0)) || (sum - 1.0).abs() > 1e-12 {
                return f64::NEG_INFINITY;
            }
            let mut total = 0.0;
            for j in 0..MIXTURE_COMPONENTS {
                total += ln_uniform(alpha[j], spec.alpha_upper) + ln_uniform(beta[j], spec.beta_upper);
            }
            let c = &spec.dirichlet;
            total += ln_gamma(c.iter().sum()) - c.iter().map(|&x| ln_gamma(x)).sum::<f64>()
                + c.iter().zip(weights).map(|(&cj, &w)| (cj - 1.0) * w.ln()).sum::<f64>();
            total
        }
    }
}

/// Joint log prior of all parameters; `-inf` outside the support.
pub fn log_prior(params: &ModelParams, spec: &PriorSpec) -> f64 {
    if params.q.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return f64::NEG_INFINITY;
    }
    if params.p.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return f64::NEG_INFINITY;
    }
    let hyper = ln_hyperprior(&params.hyper, spec);
    if hyper == f64::NEG_INFINITY {
        return hyper;
    }
    let countries: f64 = params
        .p
        .iter()
        .map(|&p| ln_prior_p(p.ln(), (-p).ln_1p(), &params.hyper, spec.family))
        .sum();
    hyper + countries
}

/// `log_likelihood + log_prior`; `-inf` outside the support.
pub fn log_posterior(data: &GamesDataset, params: &ModelParams, spec: &PriorSpec) -> Result<f64> {
    if params.p.len() != data.len() {
        return Err(Error::Dimension { expected: data.len(), found: params.p.len() });
    }
    let prior = log_prior(params, spec);
    if prior == f64::NEG_INFINITY {
        return Ok(prior);
    }
    Ok(log_likelihood(data, params)? + prior)
}
