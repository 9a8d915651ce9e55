//! Feature coalitions as 64-bit masks.

use core::fmt;

use crate::error::{dim, Result};

pub const MAX_PLAYERS: usize = 64;
/// Largest player count for procedures that enumerate every coalition.
pub const MAX_EXHAUSTIVE: usize = 20;

/// A subset of the players `{0, .., d-1}`; bit `j` set means player `j` is in.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub const fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// The grand coalition of `d` players.
    pub fn full(d: usize) -> Self {
        debug_assert!(d <= MAX_PLAYERS);
        if d >= 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << d) - 1)
        }
    }

    pub fn singleton(j: usize) -> Self {
        debug_assert!(j < MAX_PLAYERS);
        Coalition(1u64 << j)
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        members
            .into_iter()
            .fold(Coalition::EMPTY, |c, j| c.with(j))
    }

    pub fn contains(self, j: usize) -> bool {
        j < 64 && self.0 >> j & 1 == 1
    }

    #[must_use]
    pub fn with(self, j: usize) -> Self {
        Coalition(self.0 | 1u64 << j)
    }

    #[must_use]
    pub fn without(self, j: usize) -> Self {
        Coalition(self.0 & !(1u64 << j))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    /// True when no bit at or above `d` is set.
    pub fn fits(self, d: usize) -> bool {
        self.is_subset_of(Coalition::full(d))
    }

    /// Members in ascending order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    /// Every subset of `self`, the empty set first and `self` last.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Index of this coalition in a dense `2^d` table.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

#[derive(Clone)]
pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let j = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(j)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

#[derive(Clone)]
pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            Some((cur.wrapping_sub(self.mask)) & self.mask)
        };
        Some(Coalition(cur))
    }
}

/// Lazily enumerates all `2^d` coalitions by increasing cardinality, ties
/// broken by numeric bit value.
pub fn coalitions_all(d: usize) -> Result<AllCoalitions> {
    if d == 0 || d > MAX_PLAYERS {
        return Err(dim(alloc::format!("player count {d} outside 1..=64")));
    }
    Ok(AllCoalitions {
        d,
        size: 0,
        next: Some(0),
    })
}

#[derive(Clone)]
pub struct AllCoalitions {
    d: usize,
    size: usize,
    next: Option<u64>,
}

impl Iterator for AllCoalitions {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        let limit = Coalition::full(self.d).0;
        // Gosper's hack: next larger mask with the same popcount.
        let succ = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur.checked_add(c);
            r.and_then(|r| {
                let n = (((r ^ cur) >> 2) / c) | r;
                (n != 0 && n <= limit && n > cur).then_some(n)
            })
        };
        self.next = match succ {
            Some(n) => Some(n),
            None if self.size < self.d => {
                self.size += 1;
                Some(Coalition::full(self.size).0)
            }
            None => None,
        };
        Some(Coalition(cur))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn c(m: &[usize]) -> Coalition {
        Coalition::from_members(m.iter().copied())
    }

    #[test]
    fn all_two_players() {
        let v: Vec<_> = coalitions_all(2).unwrap().collect();
        assert_eq!(v, [c(&[]), c(&[0]), c(&[1]), c(&[0, 1])]);
        let v: Vec<_> = coalitions_all(1).unwrap().collect();
        assert_eq!(v, [c(&[]), c(&[0])]);
    }

    #[test]
    fn all_three_players_ordered() {
        let v: Vec<_> = coalitions_all(3).unwrap().collect();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], Coalition::EMPTY);
        assert_eq!(v[7], Coalition::full(3));
        for w in v.windows(2) {
            assert!((w[0].len(), w[0].bits()) < (w[1].len(), w[1].bits()));
        }
    }

    #[test]
    fn all_is_exhaustive() {
        for d in 1..=10 {
            let mut v: Vec<u64> = coalitions_all(d).unwrap().map(|c| c.bits()).collect();
            v.sort_unstable();
            assert_eq!(v, (0..1u64 << d).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sixty_four_players_is_lazy() {
        let mut it = coalitions_all(64).unwrap();
        assert_eq!(it.next(), Some(Coalition::EMPTY));
        assert_eq!(it.next(), Some(Coalition::singleton(0)));
        let last_single = it.by_ref().take(63).last().unwrap();
        assert_eq!(last_single, Coalition::singleton(63));
        assert_eq!(it.next(), Some(c(&[0, 1])));
    }

    #[test]
    fn bad_dimension() {
        assert!(coalitions_all(0).is_err());
        assert!(coalitions_all(65).is_err());
    }

    #[test]
    fn subsets_of_mask() {
        let a = c(&[1, 3, 4]);
        let subs: Vec<_> = a.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert_eq!(subs[0], Coalition::EMPTY);
        assert_eq!(*subs.last().unwrap(), a);
        assert!(subs.iter().all(|s| s.is_subset_of(a)));
        assert_eq!(Coalition::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn members_ascending() {
        let a = c(&[5, 0, 63]);
        assert_eq!(a.members().collect::<Vec<_>>(), [0, 5, 63]);
        assert_eq!(a.len(), 3);
        assert!(a.contains(63) && !a.contains(1));
        assert!(Coalition::full(64).fits(64));
        assert!(!Coalition::singleton(3).fits(3));
    }
}
