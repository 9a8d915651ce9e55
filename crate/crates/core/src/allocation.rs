//! Exact Harsanyi-set allocations: Shapley and proportional Shapley.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::harsanyi::{harsanyi_dividends, Dividends};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocationKind {
    Shapley,
    ProportionalShapley,
}

impl AllocationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocationKind::Shapley => "shapley",
            AllocationKind::ProportionalShapley => "proportional_shapley",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Exact,
    MonteCarlo,
    ImportanceSampling,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::MonteCarlo => "monte_carlo",
            Estimator::ImportanceSampling => "importance_sampling",
        }
    }
}

/// Per-player attribution plus estimator diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationVector {
    pub values: Vec<f64>,
    pub kind: AllocationKind,
    pub estimator: Estimator,
    /// Permutations used; 0 for exact allocations.
    pub m: usize,
    pub std_err: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl AllocationVector {
    pub fn exact(values: Vec<f64>, kind: AllocationKind) -> Self {
        AllocationVector {
            values,
            kind,
            estimator: Estimator::Exact,
            m: 0,
            std_err: None,
            seed: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `|sum - target| / max(1, |target|)`.
    pub fn efficiency_gap(&self, target: f64) -> f64 {
        (self.total() - target).abs() / target.abs().max(1.0)
    }
}

/// Options for [`proportional_shapley_exact`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProportionalOptions {
    /// Split the dividend of a coalition whose members all have zero
    /// individual value equally instead of failing.
    pub egalitarian_fallback: bool,
}

/// `Shap(j) = sum over A containing j of dividend(A) / |A|`.
pub fn shapley_exact<G: Game + ?Sized>(game: &G) -> Result<AllocationVector> {
    let h = harsanyi_dividends(game)?;
    Ok(AllocationVector::exact(
        shapley_from_dividends(&h),
        AllocationKind::Shapley,
    ))
}

pub fn shapley_from_dividends(h: &Dividends) -> Vec<f64> {
    let mut out = vec![0.0; h.players()];
    for (m, &phi) in h.as_slice().iter().enumerate().skip(1) {
        let a = Coalition::from_bits(m as u64);
        let share = phi / a.len() as f64;
        for j in a.members() {
            out[j] += share;
        }
    }
    out
}

/// Redistributes each dividend in proportion to `|v({j})|`.
///
/// Players with zero individual value take no share of a coalition that has
/// a nonzero-weight member. A coalition made only of zero-weight players
/// with a nonzero dividend is an error unless the egalitarian fallback is on.
pub fn proportional_shapley_exact<G: Game + ?Sized>(
    game: &G,
    opts: ProportionalOptions,
) -> Result<AllocationVector> {
    let h = harsanyi_dividends(game)?;
    let weights: Vec<f64> = game
        .individual_values()?
        .into_iter()
        .map(f64::abs)
        .collect();
    let values = proportional_from_dividends(&h, &weights, opts)?;
    Ok(AllocationVector::exact(
        values,
        AllocationKind::ProportionalShapley,
    ))
}

pub fn proportional_from_dividends(
    h: &Dividends,
    weights: &[f64],
    opts: ProportionalOptions,
) -> Result<Vec<f64>> {
    let d = h.players();
    if weights.len() != d {
        return Err(crate::error::dim("one weight per player required"));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::DegenerateWeights(format!("non-finite weight {bad}")));
    }
    // Dividends this small relative to the game's scale count as zero.
    let scale = h.as_slice().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let negligible = 1e-12 * scale;
    let mut out = vec![0.0; d];
    for (m, &phi) in h.as_slice().iter().enumerate().skip(1) {
        let a = Coalition::from_bits(m as u64);
        let total: f64 = a.members().map(|j| weights[j]).sum();
        if total > 0.0 {
            for j in a.members() {
                out[j] += weights[j] / total * phi;
            }
        } else if phi.abs() <= negligible {
            continue;
        } else if opts.egalitarian_fallback {
            let share = phi / a.len() as f64;
            for j in a.members() {
                out[j] += share;
            }
        } else {
            return Err(Error::DegenerateWeights(format!(
                "coalition {a:?} has dividend {phi:e} but all members have zero individual value"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{FnGame, TableGame};

    fn two_player() -> TableGame {
        TableGame::new(2, vec![0.0, 1.0, 3.0, 6.0]).unwrap()
    }

    #[test]
    fn shapley_two_player() {
        let s = shapley_exact(&two_player()).unwrap();
        // orderings (1,2): (1, 5); (2,1): (3, 3); average (2, 4)
        assert_eq!(s.values, [2.0, 4.0]);
        assert_eq!(s.efficiency_gap(6.0), 0.0);
    }

    #[test]
    fn additive_game() {
        let g = TableGame::new(2, vec![0.0, 2.0, 5.0, 7.0]).unwrap();
        assert_eq!(shapley_exact(&g).unwrap().values, [2.0, 5.0]);
        let p = proportional_shapley_exact(&g, Default::default()).unwrap();
        assert_eq!(p.values, [2.0, 5.0]);
    }

    #[test]
    fn proportional_two_player() {
        let p = proportional_shapley_exact(&two_player(), Default::default()).unwrap();
        assert!((p.values[0] - 1.5).abs() < 1e-15);
        assert!((p.values[1] - 4.5).abs() < 1e-15);
        assert_eq!(p.kind, AllocationKind::ProportionalShapley);
    }

    #[test]
    fn equal_individual_values_reduce_to_shapley() {
        let g = FnGame::new(4, |c: Coalition| {
            let n = c.len() as f64;
            n * n + if c.contains(0) && c.contains(3) { 2.5 } else { 0.0 }
        })
        .unwrap();
        let s = shapley_exact(&g).unwrap();
        let p = proportional_shapley_exact(&g, Default::default()).unwrap();
        for (a, b) in s.values.iter().zip(&p.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_player_excluded() {
        // v({0}) = 0, v({1}) = 2, pair dividend 4 goes entirely to player 1
        let g = TableGame::new(2, vec![0.0, 0.0, 2.0, 6.0]).unwrap();
        let p = proportional_shapley_exact(&g, Default::default()).unwrap();
        assert_eq!(p.values, [0.0, 6.0]);
    }

    #[test]
    fn degenerate_weights() {
        // both singletons zero, pair dividend 1
        let g = TableGame::new(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let err = proportional_shapley_exact(&g, Default::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeights(_)));
        let p = proportional_shapley_exact(
            &g,
            ProportionalOptions {
                egalitarian_fallback: true,
            },
        )
        .unwrap();
        assert_eq!(p.values, [0.5, 0.5]);
    }

    #[test]
    fn negative_individual_values_use_magnitudes() {
        let g = TableGame::new(2, vec![0.0, -1.0, 3.0, 6.0]).unwrap();
        // dividend of pair: 6 + 1 - 3 = 4; weights 1 and 3
        let p = proportional_shapley_exact(&g, Default::default()).unwrap();
        assert!((p.values[0] - 0.0).abs() < 1e-15);
        assert!((p.values[1] - 6.0).abs() < 1e-15);
    }
}
