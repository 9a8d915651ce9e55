//! Small descriptive statistics shared by the regressors and conformal code.

use alloc::vec::Vec;

use libm::sqrt;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mu = mean(xs);
    sqrt(xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64)
}

/// Lower empirical quantile: the `ceil(n * level)`-th order statistic
/// (1-based, clamped to `1..=n`).
pub fn empirical_quantile(xs: &[f64], level: f64) -> f64 {
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted_quantile(&sorted, level)
}

pub fn sorted_quantile(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let k = ceil_rank(n as f64 * level).clamp(1, n);
    sorted[k - 1]
}

/// `ceil(x)` as a rank, forgiving round-off just above an integer.
pub(crate) fn ceil_rank(x: f64) -> usize {
    let r = libm::round(x);
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}

pub fn pinball(residual: f64, level: f64) -> f64 {
    if residual >= 0.0 {
        level * residual
    } else {
        (level - 1.0) * residual
    }
}

/// Mean pinball loss of `pred` against `y` at `level`.
pub fn pinball_loss(y: &[f64], pred: &[f64], level: f64) -> f64 {
    y.iter()
        .zip(pred)
        .map(|(&t, &p)| pinball(t - p, level))
        .sum::<f64>()
        / y.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_rank_rule() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        // ceil(100 * 0.5) = 50
        assert_eq!(empirical_quantile(&xs, 0.5), 50.0);
        assert_eq!(empirical_quantile(&xs, 0.001), 1.0);
        assert_eq!(empirical_quantile(&xs, 0.999), 100.0);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 0.9), 3.0);
    }

    #[test]
    fn rank_round_off() {
        // 10 * 0.9 is 9.000000000000002 in floating point
        assert_eq!(ceil_rank(10.0 * 0.9), 9);
        assert_eq!(ceil_rank(9.2), 10);
    }

    #[test]
    fn pinball_asymmetry() {
        assert_eq!(pinball(2.0, 0.9), 1.8);
        assert!((pinball(-2.0, 0.9) - 0.2).abs() < 1e-15);
    }
}
