//! Log-space numerics shared by the model, baselines and diagnostics.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// `ln(k!)`, exact zero for `k < 2`.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// Remainder of Stirling's series, `ln Γ(x) - ((x - 1/2) ln x - x + ln(2π)/2)`,
/// for `x >= 10`.
fn stirling_remainder(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r * (1.0 / 1680.0 - r / 1188.0)))) / x
}

/// `ln Γ(b + a) - ln Γ(b)` without cancellation when `b` is large.
fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    (b - 0.5) * (a / b).ln_1p() + a * (a + b).ln() - a + stirling_remainder(a + b) - stirling_remainder(b)
}

/// `ln B(a, b)`. Once the larger argument passes 10 the log-gamma
/// difference is taken directly, so huge `b` keeps full relative accuracy.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, big) = if a <= b { (a, b) } else { (b, a) };
    if big < 10.0 {
        return ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    }
    ln_gamma(small) - ln_gamma_ratio(small, big)
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Poisson log-pmf; `lambda = 0` gives `0` at `k = 0` and `-inf` elsewhere.
pub fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return -lambda;
    }
    if lambda == 0.0 {
        return f64::NEG_INFINITY;
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

/// Binomial log-pmf.
pub fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let succ = if k == 0 { 0.0 } else if p == 0.0 { f64::NEG_INFINITY } else { k as f64 * p.ln() };
    let fail = if k == n { 0.0 } else if p == 1.0 { f64::NEG_INFINITY } else { (n - k) as f64 * (-p).ln_1p() };
    ln_choose(n, k) + succ + fail
}

/// Numerically stable `ln(sum(exp(x)))`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln P(Binomial(n, p) >= k)` by summing pmf terms in log space, over
/// whichever side of the mean is the smaller tail.
pub fn ln_binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n {
        return f64::NEG_INFINITY;
    }
    if (k as f64) <= n as f64 * p {
        // tail near one: take the complement of the lower sum
        let lower = log_sum_exp((0..k).map(|j| ln_binomial_pmf(j, n, p)));
        return (-lower.exp()).ln_1p();
    }
    log_sum_exp((k..=n).map(|j| ln_binomial_pmf(j, n, p)))
}

/// `ln Phi(x)` for the standard normal CDF, accurate in the far lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic Mills-ratio expansion.
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Standard normal log-density.
pub fn ln_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(logistic(x))` without cancellation for very negative `x`.
pub fn ln_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_beta_matches_closed_forms_for_integer_shapes() {
        // B(1, b) = 1/b, B(2, b) = 1/(b(b+1)), B(3, b) = 2/(b(b+1)(b+2))
        for &b in &[0.7, 3.0, 12.5, 1e3, 2.5e5, 7.3e7, 1e8] {
            let one = -f64::ln(b);
            let two = -(f64::ln(b) + f64::ln(b + 1.0));
            let three = f64::ln(2.0) - (f64::ln(b) + f64::ln(b + 1.0) + f64::ln(b + 2.0));
            for (a, want) in [(1.0, one), (2.0, two), (3.0, three)] {
                let got = ln_beta(a, b);
                assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "B({a},{b}): {got} vs {want}");
                assert_eq!(got, ln_beta(b, a));
            }
        }
    }

    #[test]
    fn ln_beta_half_shape_matches_product_form() {
        // B(1/2, n) = 2 * prod_{k=1}^{n-1} 2k/(2k+1)
        for n in [11u32, 40, 500] {
            let mut want = f64::ln(2.0);
            for k in 1..n {
                want += f64::ln(2.0 * k as f64) - f64::ln(2.0 * k as f64 + 1.0);
            }
            let got = ln_beta(0.5, n as f64);
            assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn ln_factorial_matches_direct_summation() {
        for k in 0..200u64 {
            let direct: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
            assert_relative_eq!(ln_factorial(k), direct, max_relative = 1e-13, epsilon = 1e-300);
        }
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
    }

    #[test]
    fn binomial_upper_tail_matches_regularized_incomplete_beta() {
        // P(X >= k) = I_p(k, n - k + 1)
        for &(k, n, p) in &[(3u64, 10u64, 0.2), (40, 559, 0.05), (1, 1, 0.3), (100, 579, 0.08)] {
            let via_beta = statrs::function::beta::beta_reg(k as f64, (n - k + 1) as f64, p);
            assert_relative_eq!(ln_binomial_upper_tail(k, n, p).exp(), via_beta, max_relative = 1e-10);
        }
        assert_eq!(ln_binomial_upper_tail(0, 10, 0.5), 0.0);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let total = log_sum_exp((0..=30).map(|k| ln_binomial_pmf(k, 30, 0.37)));
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn normal_cdf_tails_are_continuous() {
        let a = ln_normal_cdf(-29.999);
        let b = ln_normal_cdf(-30.001);
        assert!((a - b).abs() < 0.1);
        assert_relative_eq!(ln_normal_cdf(0.0), 0.5f64.ln(), max_relative = 1e-14);
        assert!(ln_normal_cdf(10.0).abs() < 1e-20);
    }

    #[test]
    fn logistic_inverts_logit() {
        for &p in &[1e-12, 1e-7, 0.3, 0.5, 0.999] {
            assert_relative_eq!(logistic(logit(p)), p, max_relative = 1e-12);
            assert_relative_eq!(ln_logistic(logit(p)), p.ln(), max_relative = 1e-12);
        }
    }
}
