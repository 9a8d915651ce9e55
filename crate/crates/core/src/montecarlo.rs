//! Random-order Monte Carlo estimation of Weber allocations and
//! importance-sampling reweighting between random-order distributions.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::allocation::{AllocationKind, AllocationVector, Estimator};
use crate::error::{dim, param, Error, Result};
use crate::game::Game;
use crate::order::{marginal_contributions, Permutation, RandomOrderDistribution};
use crate::rng::stream;

impl RandomOrderDistribution {
    pub fn allocation_kind(&self) -> AllocationKind {
        match self {
            RandomOrderDistribution::Uniform { .. } => AllocationKind::Shapley,
            RandomOrderDistribution::Proportional { .. } => AllocationKind::ProportionalShapley,
        }
    }
}

/// Permutation `k` is drawn from stream `(seed, k)`.
pub fn sample_permutations(
    dist: &RandomOrderDistribution,
    m: usize,
    seed: u64,
) -> Vec<Permutation> {
    (0..m)
        .map(|k| dist.sample(&mut stream(seed, k as u64)))
        .collect()
}

/// Per-coordinate mean and standard error of the mean.
#[derive(Debug, Clone)]
pub struct MeanAccumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MeanAccumulator {
    pub fn new(d: usize) -> Self {
        MeanAccumulator {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((mu, m2), &xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = xi - *mu;
            *mu += delta / n;
            *m2 += delta * (xi - *mu);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample standard deviation over `sqrt(n)`; zero for fewer than two
    /// observations.
    pub fn std_err(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|&m2| sqrt((m2 / (n - 1.0)).max(0.0) / n))
            .collect()
    }
}

/// Averages marginal contributions over `m` orderings drawn from `dist`.
///
/// Each ordering sums exactly to `v(D) - v(empty)`, so the estimate is
/// efficient for every `m`.
pub fn weber_mc_estimate<G: Game + ?Sized>(
    game: &G,
    dist: &RandomOrderDistribution,
    m: usize,
    seed: u64,
) -> Result<AllocationVector> {
    if m < 1 {
        return Err(param("at least one permutation is required"));
    }
    let d = game.players();
    if dist.players() != d {
        return Err(dim("distribution and game disagree on player count"));
    }
    let mut acc = MeanAccumulator::new(d);
    for pi in sample_permutations(dist, m, seed) {
        acc.push(&marginal_contributions(game, &pi)?);
    }
    Ok(AllocationVector {
        std_err: Some(acc.std_err()),
        values: acc.mean,
        kind: dist.allocation_kind(),
        estimator: Estimator::MonteCarlo,
        m,
        seed: Some(seed),
    })
}

/// How importance weights are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsNormalization {
    /// Divide by the sample count: unbiased, but the coordinates sum to
    /// `(v(D) - v(empty))` times the mean weight rather than exactly to it.
    #[default]
    Unbiased,
    /// Divide by the weight total: exactly efficient, consistent, biased by
    /// `O(1/m)`.
    SelfNormalized,
}

/// Reweights marginal contributions sampled under `from` into an estimate of
/// the allocation induced by `to`.
pub fn importance_reweight(
    samples: &[(Permutation, Vec<f64>)],
    from: &RandomOrderDistribution,
    to: &RandomOrderDistribution,
    normalization: IsNormalization,
) -> Result<AllocationVector> {
    if samples.is_empty() {
        return Err(param("at least one sample is required"));
    }
    let d = from.players();
    if to.players() != d {
        return Err(dim("distributions disagree on player count"));
    }
    let mut weights = Vec::with_capacity(samples.len());
    for (index, (pi, mc)) in samples.iter().enumerate() {
        if mc.len() != d {
            return Err(dim("marginal contribution vector has the wrong length"));
        }
        let p_from = from.pmf(pi)?;
        if p_from <= 0.0 {
            return Err(Error::SupportMismatch { index });
        }
        weights.push(to.pmf(pi)? / p_from);
    }
    let m = samples.len();
    let (values, std_err) = match normalization {
        IsNormalization::Unbiased => {
            let mut acc = MeanAccumulator::new(d);
            let mut scaled = vec![0.0; d];
            for ((_, mc), &w) in samples.iter().zip(&weights) {
                for (s, &x) in scaled.iter_mut().zip(mc) {
                    *s = w * x;
                }
                acc.push(&scaled);
            }
            (acc.mean.clone(), acc.std_err())
        }
        IsNormalization::SelfNormalized => {
            let total: f64 = weights.iter().sum();
            let mut est = vec![0.0; d];
            for ((_, mc), &w) in samples.iter().zip(&weights) {
                for (e, &x) in est.iter_mut().zip(mc) {
                    *e += w * x;
                }
            }
            est.iter_mut().for_each(|e| *e /= total);
            let mut var = vec![0.0; d];
            for ((_, mc), &w) in samples.iter().zip(&weights) {
                for ((v, &x), &e) in var.iter_mut().zip(mc).zip(&est) {
                    *v += w * w * (x - e) * (x - e);
                }
            }
            let se = var.into_iter().map(|v| sqrt(v) / total).collect();
            (est, se)
        }
    };
    Ok(AllocationVector {
        values,
        kind: to.allocation_kind(),
        estimator: Estimator::ImportanceSampling,
        m,
        std_err: Some(std_err),
        seed: None,
    })
}

/// Pairs each permutation with its marginal contributions.
pub fn collect_samples<G: Game + ?Sized>(
    game: &G,
    perms: Vec<Permutation>,
) -> Result<Vec<(Permutation, Vec<f64>)>> {
    perms
        .into_iter()
        .map(|pi| {
            let mc = marginal_contributions(game, &pi)?;
            Ok((pi, mc))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TableGame;

    #[test]
    fn additive_game_single_permutation() {
        let g = TableGame::new(2, vec![0.0, 2.0, 5.0, 7.0]).unwrap();
        for dist in [
            RandomOrderDistribution::uniform(2).unwrap(),
            RandomOrderDistribution::proportional(&[2.0, 5.0]).unwrap(),
        ] {
            let est = weber_mc_estimate(&g, &dist, 1, 3).unwrap();
            assert_eq!(est.values, [2.0, 5.0]);
            assert_eq!(est.std_err.unwrap(), [0.0, 0.0]);
        }
    }

    #[test]
    fn zero_permutations_rejected() {
        let g = TableGame::new(1, vec![0.0, 1.0]).unwrap();
        let dist = RandomOrderDistribution::uniform(1).unwrap();
        assert!(matches!(
            weber_mc_estimate(&g, &dist, 0, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn reweight_to_self_matches_direct() {
        let g = TableGame::new(3, vec![0.0, 1.0, 2.0, 4.0, -1.0, 3.0, 1.0, 9.0]).unwrap();
        let dist = RandomOrderDistribution::uniform(3).unwrap();
        let direct = weber_mc_estimate(&g, &dist, 40, 5).unwrap();
        let samples = collect_samples(&g, sample_permutations(&dist, 40, 5)).unwrap();
        let is = importance_reweight(&samples, &dist, &dist, IsNormalization::Unbiased).unwrap();
        for (a, b) in direct.values.iter().zip(&is.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn support_mismatch() {
        // player 0 has zero weight, so it can never be last
        let from = RandomOrderDistribution::proportional(&[0.0, 1.0]).unwrap();
        let to = RandomOrderDistribution::uniform(2).unwrap();
        let bad = Permutation::new(vec![1, 0]).unwrap();
        let err = importance_reweight(&[(bad, vec![0.0, 0.0])], &from, &to, Default::default())
            .unwrap_err();
        assert_eq!(err, Error::SupportMismatch { index: 0 });
    }
}
