//! Player orderings and random-order distributions over them.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{dim, Error, Result};
use crate::game::Game;

/// An ordering of the players `{0, .., d-1}`; `order[0]` arrives first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let d = order.len();
        if d == 0 || d > MAX_PLAYERS {
            return Err(dim(format!("permutation length {d} outside 1..=64")));
        }
        let mut seen = 0u64;
        for &j in &order {
            if j >= d || seen >> j & 1 == 1 {
                return Err(dim(format!("{order:?} is not a permutation")));
            }
            seen |= 1 << j;
        }
        Ok(Permutation(order))
    }

    pub fn identity(d: usize) -> Self {
        Permutation((0..d).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// The `d + 1` nested coalitions `{}, {o0}, {o0,o1}, .., D`.
    pub fn prefixes(&self) -> impl Iterator<Item = Coalition> + '_ {
        core::iter::once(Coalition::EMPTY).chain(self.0.iter().scan(Coalition::EMPTY, |c, &j| {
            *c = c.with(j);
            Some(*c)
        }))
    }

    /// All `d!` orderings in lexicographic order.
    pub fn all(d: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..d).collect();
        loop {
            out.push(Permutation(cur.clone()));
            // next lexicographic permutation
            let Some(i) = (1..d).rev().find(|&i| cur[i - 1] < cur[i]) else {
                break;
            };
            let j = (i..d).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }
}

/// Marginal contribution `v(pre_j + j) - v(pre_j)` of every player, indexed
/// by player. They telescope to `v(D) - v(empty)`.
pub fn marginal_contributions<G: Game + ?Sized>(game: &G, pi: &Permutation) -> Result<Vec<f64>> {
    if pi.len() != game.players() {
        return Err(dim("permutation length differs from player count"));
    }
    let mut out = alloc::vec![0.0; pi.len()];
    let mut prev = game.value(Coalition::EMPTY)?;
    let mut acc = Coalition::EMPTY;
    for &j in pi.as_slice() {
        acc = acc.with(j);
        let cur = game.value(acc)?;
        out[j] = cur - prev;
        prev = cur;
    }
    Ok(out)
}

/// Probability mass function over orderings parameterizing a Weber
/// allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum RandomOrderDistribution {
    /// Every ordering has mass `1/d!`; yields the Shapley value.
    Uniform { d: usize },
    /// Sequential proportional draws; yields the proportional Shapley value.
    /// Holds the absolute individual values.
    Proportional { weights: Vec<f64> },
}

impl RandomOrderDistribution {
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_PLAYERS {
            return Err(dim(format!("player count {d} outside 1..=64")));
        }
        Ok(RandomOrderDistribution::Uniform { d })
    }

    /// Builds the proportional distribution from individual values
    /// `v({j})`; magnitudes are used.
    pub fn proportional(individual_values: &[f64]) -> Result<Self> {
        let d = individual_values.len();
        if d == 0 || d > MAX_PLAYERS {
            return Err(dim(format!("player count {d} outside 1..=64")));
        }
        if let Some(v) = individual_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateWeights(format!("non-finite individual value {v}")));
        }
        if individual_values.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateWeights(
                "all individual values are zero".into(),
            ));
        }
        Ok(RandomOrderDistribution::Proportional {
            weights: individual_values.iter().map(|v| v.abs()).collect(),
        })
    }

    pub fn players(&self) -> usize {
        match self {
            RandomOrderDistribution::Uniform { d } => *d,
            RandomOrderDistribution::Proportional { weights } => weights.len(),
        }
    }

    pub fn pmf(&self, pi: &Permutation) -> Result<f64> {
        if pi.len() != self.players() {
            return Err(dim("permutation length differs from player count"));
        }
        Ok(match self {
            RandomOrderDistribution::Uniform { d } => 1.0 / factorial(*d),
            RandomOrderDistribution::Proportional { weights } => sequential_pmf(weights, pi),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        match self {
            RandomOrderDistribution::Uniform { d } => {
                let mut order: Vec<usize> = (0..*d).collect();
                order.shuffle(rng);
                Permutation(order)
            }
            RandomOrderDistribution::Proportional { weights } => sequential_sample(weights, rng),
        }
    }
}

pub fn factorial(d: usize) -> f64 {
    (2..=d).map(|k| k as f64).product()
}

/// Draws the last position first: each remaining player is picked with
/// probability proportional to its weight. Scanned in ascending index
/// order, so a given uniform draw maps to one player. Once only zero-weight
/// players remain they are placed uniformly at random.
fn sequential_sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Permutation {
    let d = weights.len();
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order = alloc::vec![0; d];
    for pos in (0..d).rev() {
        let total: f64 = remaining.iter().map(|&j| weights[j]).sum();
        let u: f64 = rng.random();
        let pick = if total > 0.0 {
            let target = u * total;
            let mut cum = 0.0;
            let mut chosen = None;
            for (i, &j) in remaining.iter().enumerate() {
                if weights[j] == 0.0 {
                    continue;
                }
                cum += weights[j];
                chosen = Some(i);
                if target < cum {
                    break;
                }
            }
            chosen.expect("positive total has a positive weight")
        } else {
            ((u * remaining.len() as f64) as usize).min(remaining.len() - 1)
        };
        order[pos] = remaining.remove(pick);
    }
    Permutation(order)
}

fn sequential_pmf(weights: &[f64], pi: &Permutation) -> f64 {
    // Recompute each remaining total the way the sampler does, so that an
    // exhausted positive mass is exactly zero rather than round-off.
    let order = pi.as_slice();
    let mut p = 1.0;
    for k in (0..order.len()).rev() {
        let total: f64 = order[..=k].iter().map(|&j| weights[j]).sum();
        if total > 0.0 {
            p *= weights[order[k]] / total;
        } else {
            p /= (k + 1) as f64;
        }
    }
    p
}

/// Draws an ordering with Algorithm-3 sequential proportional sampling.
pub fn ps_permutation_sample<R: Rng + ?Sized>(
    individual_values: &[f64],
    rng: &mut R,
) -> Result<Permutation> {
    Ok(RandomOrderDistribution::proportional(individual_values)?.sample(rng))
}

/// Exact probability that [`ps_permutation_sample`] returns `pi`.
pub fn ps_permutation_pmf(individual_values: &[f64], pi: &Permutation) -> Result<f64> {
    RandomOrderDistribution::proportional(individual_values)?.pmf(pi)
}
