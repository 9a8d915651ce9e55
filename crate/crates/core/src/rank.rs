//! Rankings of features by absolute attribution.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim, Result};

/// Feature indices from largest to smallest `|value|`; ties keep ascending
/// index order.
pub fn rank_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

/// How often each feature lands at each rank across test points.
#[derive(Debug, Clone, PartialEq)]
pub struct RankFrequency {
    /// `matrix[i][r]`: fraction of points where feature `i` has rank `r + 1`.
    pub matrix: Vec<Vec<f64>>,
    /// For ranks 1..=min(5, d): the most frequent feature and its frequency.
    pub top: Vec<(usize, f64)>,
}

pub fn rank_frequency(allocations: &[Vec<f64>]) -> Result<RankFrequency> {
    let d = allocations.first().map_or(0, Vec::len);
    if allocations.is_empty() || d == 0 {
        return Err(dim("rank frequencies need at least one non-empty allocation"));
    }
    let mut counts = vec![vec![0usize; d]; d];
    for a in allocations {
        if a.len() != d {
            return Err(dim("allocations differ in length"));
        }
        for (r, &j) in rank_order(a).iter().enumerate() {
            counts[j][r] += 1;
        }
    }
    let n = allocations.len() as f64;
    let matrix: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / n).collect())
        .collect();
    let top = (0..d.min(5))
        .map(|r| {
            // First maximum wins, so ties go to the lower index.
            let mut best = 0;
            for i in 1..d {
                if counts[i][r] > counts[best][r] {
                    best = i;
                }
            }
            (best, matrix[best][r])
        })
        .collect();
    Ok(RankFrequency { matrix, top })
}

/// Kendall's tau-b between two score vectors.
///
/// When either side is constant the statistic is undefined; two constant
/// vectors count as full agreement and otherwise 0 is returned.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(dim("kendall tau needs equal-length inputs"));
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_a, mut tied_b, mut pairs) = (0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            pairs += 1;
            let sa = sign(a[i] - a[j]);
            let sb = sign(b[i] - b[j]);
            if sa == 0 {
                tied_a += 1;
            }
            if sb == 0 {
                tied_b += 1;
            }
            match sa * sb {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let denom = libm::sqrt(((pairs - tied_a) * (pairs - tied_b)) as f64);
    if denom == 0.0 {
        return Ok(if tied_a == pairs && tied_b == pairs { 1.0 } else { 0.0 });
    }
    Ok((concordant - discordant) as f64 / denom)
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Agreement between two allocations over the same test points.
#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    /// Tau-b of the absolute values, per test point.
    pub taus: Vec<f64>,
    pub mean_tau: f64,
    /// Fraction of points whose top-ranked feature coincides.
    pub top1: f64,
}

pub fn compare_allocations(first: &[Vec<f64>], second: &[Vec<f64>]) -> Result<Agreement> {
    if first.len() != second.len() || first.is_empty() {
        return Err(dim("allocations must cover the same, non-empty set of points"));
    }
    let mut taus = Vec::with_capacity(first.len());
    let mut hits = 0usize;
    for (a, b) in first.iter().zip(second) {
        if a.len() != b.len() || a.is_empty() {
            return Err(dim("allocation dimensions differ"));
        }
        let abs_a: Vec<f64> = a.iter().map(|v| v.abs()).collect();
        let abs_b: Vec<f64> = b.iter().map(|v| v.abs()).collect();
        taus.push(kendall_tau(&abs_a, &abs_b)?);
        if rank_order(a)[0] == rank_order(b)[0] {
            hits += 1;
        }
    }
    let n = first.len() as f64;
    Ok(Agreement {
        mean_tau: taus.iter().sum::<f64>() / n,
        top1: hits as f64 / n,
        taus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_uses_absolute_values_and_index_ties() {
        assert_eq!(rank_order(&[1.0, -3.0, 2.0, 3.0]), vec![1, 3, 2, 0]);
    }

    #[test]
    fn single_point_gives_permutation_matrix() {
        let rf = rank_frequency(&[vec![0.1, -0.5, 0.3]]).unwrap();
        assert_eq!(
            rf.matrix,
            vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]
        );
        assert_eq!(rf.top, vec![(1, 1.0), (2, 1.0), (0, 1.0)]);
        let twice = rank_frequency(&[vec![0.1, -0.5, 0.3], vec![1.0, -5.0, 3.0]]).unwrap();
        assert_eq!(twice.matrix, rf.matrix);
    }

    #[test]
    fn rows_are_stochastic() {
        let rf = rank_frequency(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![2.0, 3.0, 1.0]])
            .unwrap();
        for row in &rf.matrix {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(rank_frequency(&[]).is_err());
    }

    #[test]
    fn tau_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // tau-b with one tie in each vector: (C - D) / sqrt((n0-n1)(n0-n2)).
        let t = kendall_tau(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((t - 4.0 / 5.0).abs() < 1e-15);
        let agree = compare_allocations(&[a.to_vec()], &[a.to_vec()]).unwrap();
        assert_eq!((agree.mean_tau, agree.top1), (1.0, 1.0));
        assert!(compare_allocations(&[a.to_vec()], &[]).is_err());
    }
}
