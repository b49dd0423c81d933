//! Unconstrained coordinates for the hyperparameters.
//!
//! | family  | coordinates                                               |
//! |---------|-----------------------------------------------------------|
//! | beta    | `logit(alpha/A)`, `logit(beta/B)`                         |
//! | normal  | `mu`, `ln sigma`                                          |
//! | mixture | `logit(alpha_j/A)`, `logit(beta_j/B)` for j=1..3, then two stick-breaking logits |

use crate::model::{HyperParams, PriorFamily, PriorSpec, MIXTURE_COMPONENTS};
use crate::special::{ln_logistic, logistic, logit};

pub(crate) fn dim(family: PriorFamily) -> usize {
    match family {
        PriorFamily::Beta => 2,
        PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => 2,
        PriorFamily::BetaMixture3 => 2 * MIXTURE_COMPONENTS + MIXTURE_COMPONENTS - 1,
    }
}

/// Pairs of coordinates that also get a joint move along `(+e, +e)`.
pub(crate) fn paired_coordinates(family: PriorFamily) -> Vec<(usize, usize)> {
    match family {
        PriorFamily::Beta => vec![(0, 1)],
        PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => vec![],
        PriorFamily::BetaMixture3 => (0..MIXTURE_COMPONENTS).map(|j| (2 * j, 2 * j + 1)).collect(),
    }
}

fn bounded(theta: f64, upper: f64) -> f64 {
    upper * logistic(theta)
}

fn ln_jac_bounded(theta: f64, upper: f64) -> f64 {
    upper.ln() + ln_logistic(theta) + ln_logistic(-theta)
}

fn unbounded(x: f64, upper: f64) -> f64 {
    logit(x / upper)
}

fn stick_breaking(v: [f64; 2]) -> [f64; 3] {
    [v[0], (1.0 - v[0]) * v[1], (1.0 - v[0]) * (1.0 - v[1])]
}

pub(crate) fn to_hyper(theta: &[f64], spec: &PriorSpec) -> HyperParams {
    match spec.family {
        PriorFamily::Beta => HyperParams::Beta {
            alpha: bounded(theta[0], spec.alpha_upper),
            beta: bounded(theta[1], spec.beta_upper),
        },
        PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => {
            HyperParams::Normal { mu: theta[0], sigma: theta[1].exp() }
        }
        PriorFamily::BetaMixture3 => {
            let mut alpha = [0.0; MIXTURE_COMPONENTS];
            let mut beta = [0.0; MIXTURE_COMPONENTS];
            for j in 0..MIXTURE_COMPONENTS {
                alpha[j] = bounded(theta[2 * j], spec.alpha_upper);
                beta[j] = bounded(theta[2 * j + 1], spec.beta_upper);
            }
            let v = [logistic(theta[6]), logistic(theta[7])];
            HyperParams::Mixture { alpha, beta, weights: stick_breaking(v) }
        }
    }
}

/// Log absolute Jacobian of `theta -> hyper`.
pub(crate) fn ln_jacobian(theta: &[f64], spec: &PriorSpec) -> f64 {
    match spec.family {
        PriorFamily::Beta => ln_jac_bounded(theta[0], spec.alpha_upper) + ln_jac_bounded(theta[1], spec.beta_upper),
        PriorFamily::TruncLogNormal | PriorFamily::LogitNormal => theta[1],
        PriorFamily::BetaMixture3 => {
            let mut total = 0.0;
            for j in 0..MIXTURE_COMPONENTS {
                total += ln_jac_bounded(theta[2 * j], spec.alpha_upper)
                    + ln_jac_bounded(theta[2 * j + 1], spec.beta_upper);
            }
            // (v1, v2) -> (w1, w2) has determinant (1 - v1).
            total += ln_logistic(-theta[6]);
            total += ln_logistic(theta[6]) + ln_logistic(-theta[6]) + ln_logistic(theta[7]) + ln_logistic(-theta[7]);
            total
        }
    }
}

pub(crate) fn from_hyper(hyper: &HyperParams, spec: &PriorSpec) -> Vec<f64> {
    match hyper {
        HyperParams::Beta { alpha, beta } => {
            vec![unbounded(*alpha, spec.alpha_upper), unbounded(*beta, spec.beta_upper)]
        }
        HyperParams::Normal { mu, sigma } => vec![*mu, sigma.ln()],
        HyperParams::Mixture { alpha, beta, weights } => {
            let mut theta = Vec::with_capacity(8);
            for j in 0..MIXTURE_COMPONENTS {
                theta.push(unbounded(alpha[j], spec.alpha_upper));
                theta.push(unbounded(beta[j], spec.beta_upper));
            }
            let v1 = weights[0];
            let v2 = weights[1] / (1.0 - v1);
            theta.push(logit(v1));
            theta.push(logit(v2));
            theta
        }
    }
}
