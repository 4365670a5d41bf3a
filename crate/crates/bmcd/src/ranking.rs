//! Rankings: permutations assigning each item a 1-based rank, rank 1 being
//! the most preferred item.

use crate::error::{BmcdError, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// A full ranking of `n` items. `ranks()[i]` is the rank of item `i`;
/// the vector is always a permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    ranks: Vec<u32>,
}

impl Ranking {
    /// Validates that `ranks` is a permutation of `1..=n`.
    pub fn new(ranks: Vec<u32>) -> Result<Self> {
        let n = ranks.len();
        if n == 0 {
            return Err(BmcdError::EmptyInput("ranking of zero items".into()));
        }
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r < 1 || r as usize > n {
                return Err(BmcdError::invalid(
                    "ranks",
                    format!("rank {r} outside 1..={n}"),
                ));
            }
            if seen[(r - 1) as usize] {
                return Err(BmcdError::invalid("ranks", format!("rank {r} repeated")));
            }
            seen[(r - 1) as usize] = true;
        }
        Ok(Ranking { ranks })
    }

    /// `ranks` must already be a permutation of `1..=n`; checked in debug builds.
    pub(crate) fn from_ranks_unchecked(ranks: Vec<u32>) -> Self {
        debug_assert!(Ranking::new(ranks.clone()).is_ok());
        Ranking { ranks }
    }

    /// Item `i` gets rank `i + 1`.
    pub fn identity(n: usize) -> Self {
        Ranking {
            ranks: (1..=n as u32).collect(),
        }
    }

    /// Item `i` gets rank `n - i`.
    pub fn reversed(n: usize) -> Self {
        Ranking {
            ranks: (1..=n as u32).rev().collect(),
        }
    }

    /// Uniform random permutation.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut ranks: Vec<u32> = (1..=n as u32).collect();
        ranks.shuffle(rng);
        Ranking { ranks }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn rank_of(&self, item: usize) -> u32 {
        self.ranks[item]
    }

    pub(crate) fn ranks_mut(&mut self) -> &mut [u32] {
        &mut self.ranks
    }

    /// Inverse permutation: `items_by_rank()[r - 1]` is the item holding rank `r`.
    pub fn items_by_rank(&self) -> Vec<u32> {
        let mut items = vec![0u32; self.ranks.len()];
        for (item, &r) in self.ranks.iter().enumerate() {
            items[(r - 1) as usize] = item as u32;
        }
        items
    }

    /// True if this is a valid permutation of `1..=n` (used by debug checks).
    pub fn is_permutation(&self) -> bool {
        let n = self.ranks.len();
        let mut seen = vec![false; n];
        for &r in &self.ranks {
            if r < 1 || r as usize > n || seen[(r - 1) as usize] {
                return false;
            }
            seen[(r - 1) as usize] = true;
        }
        true
    }
}

/// Visits every permutation of `1..=n` in place (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut visit: impl FnMut(&[u32])) {
    let mut a: Vec<u32> = (1..=n as u32).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
