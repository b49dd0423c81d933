//! Type-7 (linear interpolation) sample quantiles and equal-tailed intervals.

/// Quantile of an ascending-sorted slice, `h = (n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, prob)
}

/// Equal-tailed interval holding `level` of the mass, plus the median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub median: f64,
    pub hi: f64,
}

pub fn equal_tailed(values: &[f64], level: f64) -> Interval {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Interval { lo: quantile_sorted(&s, tail), median: quantile_sorted(&s, 0.5), hi: quantile_sorted(&s, 1.0 - tail) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_type7_hand_values() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        // Sorted: 1 1 2 3 4 5 6 9; h = 7p.
        assert_eq!(quantile(&v, 0.5), 3.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 9.0);
        assert!((quantile(&v, 0.1) - 1.0).abs() < 1e-15);
        assert!((quantile(&v, 0.9) - 6.9).abs() < 1e-12);
        let i = equal_tailed(&v, 0.8);
        assert!(i.lo <= i.median && i.median <= i.hi);
    }
}
