//! Cooperative games: a player count plus a value for every coalition.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use crate::coalition::{Coalition, MAX_EXHAUSTIVE, MAX_PLAYERS};
use crate::error::{dim, Result};

/// A transferable-utility game over `players()` players.
///
/// `value` must be deterministic: repeated calls with the same coalition
/// return the identical value.
pub trait Game {
    fn players(&self) -> usize;

    fn value(&self, coalition: Coalition) -> Result<f64>;

    /// Values of the singletons `{0}`, .., `{d-1}`.
    fn individual_values(&self) -> Result<Vec<f64>> {
        (0..self.players())
            .map(|j| self.value(Coalition::singleton(j)))
            .collect()
    }
}

impl<G: Game + ?Sized> Game for &G {
    fn players(&self) -> usize {
        (**self).players()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        (**self).value(coalition)
    }
}

pub(crate) fn check_exhaustive(d: usize) -> Result<()> {
    if d == 0 || d > MAX_EXHAUSTIVE {
        return Err(dim(alloc::format!(
            "exhaustive computation needs 1..={MAX_EXHAUSTIVE} players, got {d}"
        )));
    }
    Ok(())
}

/// A game stored as a dense table indexed by coalition bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    d: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        check_exhaustive(d)?;
        if values.len() != 1 << d {
            return Err(dim(alloc::format!(
                "table has {} entries, expected 2^{d}",
                values.len()
            )));
        }
        Ok(TableGame { d, values })
    }

    /// Evaluates `f` on every coalition of `d` players.
    pub fn tabulate(d: usize, mut f: impl FnMut(Coalition) -> f64) -> Result<Self> {
        check_exhaustive(d)?;
        let values = (0..1u64 << d).map(|m| f(Coalition::from_bits(m))).collect();
        Ok(TableGame { d, values })
    }

    /// Materializes any game with at most 20 players.
    pub fn from_game<G: Game + ?Sized>(game: &G) -> Result<Self> {
        let d = game.players();
        check_exhaustive(d)?;
        let values = (0..1u64 << d)
            .map(|m| game.value(Coalition::from_bits(m)))
            .collect::<Result<_>>()?;
        Ok(TableGame { d, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: Coalition) -> f64 {
        self.values[c.index()]
    }
}

impl Game for TableGame {
    fn players(&self) -> usize {
        self.d
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        if !coalition.fits(self.d) {
            return Err(dim("coalition outside the player set"));
        }
        Ok(self.values[coalition.index()])
    }
}

/// A game backed by a closure.
pub struct FnGame<F> {
    d: usize,
    f: F,
}

impl<F: Fn(Coalition) -> f64> FnGame<F> {
    pub fn new(d: usize, f: F) -> Result<Self> {
        if d == 0 || d > MAX_PLAYERS {
            return Err(dim(alloc::format!("player count {d} outside 1..=64")));
        }
        Ok(FnGame { d, f })
    }
}

impl<F: Fn(Coalition) -> f64> Game for FnGame<F> {
    fn players(&self) -> usize {
        self.d
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        Ok((self.f)(coalition))
    }
}

/// Memoizes an inner game and counts distinct coalitions evaluated.
///
/// Single-threaded; the `cpshap` crate has a shared, single-flight variant
/// for concurrent workers.
pub struct MemoGame<G> {
    inner: G,
    cache: RefCell<BTreeMap<Coalition, f64>>,
    evaluations: Cell<usize>,
}

impl<G: Game> MemoGame<G> {
    pub fn new(inner: G) -> Self {
        MemoGame {
            inner,
            cache: RefCell::new(BTreeMap::new()),
            evaluations: Cell::new(0),
        }
    }

    /// Number of distinct coalitions passed to the inner game.
    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<G: Game> Game for MemoGame<G> {
    fn players(&self) -> usize {
        self.inner.players()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        if let Some(&v) = self.cache.borrow().get(&coalition) {
            return Ok(v);
        }
        let v = self.inner.value(coalition)?;
        self.cache.borrow_mut().insert(coalition, v);
        self.evaluations.set(self.evaluations.get() + 1);
        Ok(v)
    }
}

/// `v(A) - v(empty)`: same dividends except on the empty set, so Shapley
/// values are unchanged while singleton values become individual surpluses.
pub struct Centered<G> {
    inner: G,
    baseline: f64,
}

impl<G: Game> Centered<G> {
    pub fn new(inner: G) -> Result<Self> {
        let baseline = inner.value(Coalition::EMPTY)?;
        Ok(Centered { inner, baseline })
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }
}

impl<G: Game> Game for Centered<G> {
    fn players(&self) -> usize {
        self.inner.players()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        Ok(self.inner.value(coalition)? - self.baseline)
    }
}
