//! Harsanyi dividends: the Möbius transform of a set function.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{check_exhaustive, Game, TableGame};

/// Dividends of every coalition of a `d`-player game, indexed by bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dividends {
    d: usize,
    values: Vec<f64>,
}

impl Dividends {
    pub fn players(&self) -> usize {
        self.d
    }

    pub fn get(&self, a: Coalition) -> f64 {
        self.values[a.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// `v(A) = sum of dividends over subsets of A`.
    pub fn reconstruct(&self, a: Coalition) -> f64 {
        a.subsets().map(|b| self.values[b.index()]).sum()
    }

    pub fn to_map(&self) -> BTreeMap<Coalition, f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(m, &v)| (Coalition::from_bits(m as u64), v))
            .collect()
    }
}

/// Computes every dividend with the in-place subset-difference transform,
/// `O(d 2^d)` instead of the `O(3^d)` alternating sum.
pub fn harsanyi_dividends<G: Game + ?Sized>(game: &G) -> Result<Dividends> {
    let d = game.players();
    check_exhaustive(d)?;
    let mut values = TableGame::from_game(game)?.values().to_vec();
    for bit in 0..d {
        let step = 1usize << bit;
        for m in 0..values.len() {
            if m & step != 0 {
                values[m] -= values[m ^ step];
            }
        }
    }
    Ok(Dividends { d, values })
}

/// Rebuilds `v(A)` from a (possibly partial) dividend map.
pub fn mobius_reconstruct(dividends: &BTreeMap<Coalition, f64>, a: Coalition) -> Result<f64> {
    a.subsets()
        .map(|b| {
            dividends
                .get(&b)
                .copied()
                .ok_or(Error::IncompleteDividends {
                    coalition: a.bits(),
                    missing: b.bits(),
                })
        })
        .sum()
}
