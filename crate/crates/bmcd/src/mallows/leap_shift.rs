//! Leap-and-shift proposal: move one item's rank within a window and shift
//! the displaced block by one to restore a permutation.

use crate::error::{BmcdError, Result};
use crate::ranking::Ranking;
use rand::{Rng, RngExt};

/// A proposed move together with the log proposal densities needed for the
/// Metropolis-Hastings ratio and the set of items whose rank changed.
#[derive(Debug, Clone)]
pub struct LeapShift {
    pub proposal: Ranking,
    pub log_forward: f64,
    pub log_backward: f64,
    pub moved_items: Vec<u32>,
}

/// Number of candidate target ranks for an item currently at `rank`.
fn support_size(rank: u32, leap: u32, n: u32) -> u32 {
    rank.saturating_add(leap).min(n) - rank.saturating_sub(leap).max(1)
}

pub fn max_leap_size(n: usize) -> usize {
    ((n.saturating_sub(1)) / 2).max(1)
}

/// Draw a leap-and-shift proposal from `r`.
///
/// An item `u` is chosen uniformly; its new rank is uniform over the ranks
/// within `leap_size` of the old one (old rank excluded); items between the
/// old and new rank shift by one. When the move is an adjacent transposition
/// two (item, rank) draws generate the same proposal, which the returned
/// densities account for.
pub fn leap_and_shift(r: &Ranking, leap_size: usize, rng: &mut impl Rng) -> Result<LeapShift> {
    let n = r.len();
    if n < 2 {
        return Err(BmcdError::invalid("ranking", "need at least 2 items"));
    }
    if leap_size < 1 || leap_size > max_leap_size(n) {
        return Err(BmcdError::invalid(
            "leap_size",
            format!("must be in 1..={}, got {leap_size}", max_leap_size(n)),
        ));
    }
    let n32 = n as u32;
    let leap = leap_size as u32;

    let item = rng.random_range(0..n);
    let old = r.rank_of(item);
    let lo = old.saturating_sub(leap).max(1);
    let hi = old.saturating_add(leap).min(n32);
    let mut new = lo + rng.random_range(0..hi - lo);
    if new >= old {
        new += 1;
    }

    let mut ranks = r.ranks().to_vec();
    let mut moved_items = Vec::with_capacity((hi - lo + 1) as usize);
    if new > old {
        for (i, rk) in ranks.iter_mut().enumerate() {
            if *rk > old && *rk <= new {
                *rk -= 1;
                moved_items.push(i as u32);
            }
        }
    } else {
        for (i, rk) in ranks.iter_mut().enumerate() {
            if *rk >= new && *rk < old {
                *rk += 1;
                moved_items.push(i as u32);
            }
        }
    }
    ranks[item] = new;
    moved_items.push(item as u32);

    let m_old = support_size(old, leap, n32) as f64;
    let m_new = support_size(new, leap, n32) as f64;
    let nf = n as f64;
    let (log_forward, log_backward) = if old.abs_diff(new) == 1 {
        // Adjacent transposition: either endpoint item generates it.
        let p = 1.0 / (nf * m_old) + 1.0 / (nf * m_new);
        (p.ln(), p.ln())
    } else {
        ((1.0 / (nf * m_old)).ln(), (1.0 / (nf * m_new)).ln())
    };

    Ok(LeapShift {
        proposal: Ranking::from_ranks_unchecked(ranks),
        log_forward,
        log_backward,
        moved_items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_items_always_swap_with_symmetric_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Ranking::new(vec![1, 2]).unwrap();
        for _ in 0..50 {
            let mv = leap_and_shift(&r, 1, &mut rng).unwrap();
            assert_eq!(mv.proposal.ranks(), &[2, 1]);
            assert_eq!(mv.log_forward, mv.log_backward);
        }
    }

    #[test]
    fn proposal_is_always_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = Ranking::random(9, &mut rng);
        for _ in 0..100_000 {
            let mv = leap_and_shift(&r, 3, &mut rng).unwrap();
            r = mv.proposal;
        }
        assert!(r.is_permutation());
    }

    #[test]
    fn moved_items_cover_the_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2_000 {
            let r = Ranking::random(8, &mut rng);
            let mv = leap_and_shift(&r, 2, &mut rng).unwrap();
            for i in 0..8 {
                let changed = r.rank_of(i) != mv.proposal.rank_of(i);
                let listed = mv.moved_items.contains(&(i as u32));
                assert!(!changed || listed, "item {i} changed but not listed");
            }
        }
    }

    #[test]
    fn leap_size_bounds_enforced() {
        let r = Ranking::identity(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(leap_and_shift(&r, 0, &mut rng).is_err());
        assert!(leap_and_shift(&r, 3, &mut rng).is_err());
        assert!(leap_and_shift(&r, 2, &mut rng).is_ok());
    }

    #[test]
    fn empirical_forward_density_matches_reported() {
        // For a fixed start, the frequency of each proposal must match
        // exp(log_forward) within Monte-Carlo error.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = Ranking::new(vec![2, 1, 3, 4]).unwrap();
        let trials = 200_000usize;
        let mut freq: std::collections::HashMap<Vec<u32>, (u64, f64)> = Default::default();
        for _ in 0..trials {
            let mv = leap_and_shift(&r, 1, &mut rng).unwrap();
            let e = freq
                .entry(mv.proposal.ranks().to_vec())
                .or_insert((0, mv.log_forward));
            e.0 += 1;
            assert_eq!(e.1, mv.log_forward);
        }
        for (perm, (count, log_p)) in freq {
            let p_hat = count as f64 / trials as f64;
            let p = log_p.exp();
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (p_hat - p).abs() < 5.0 * se + 1e-4,
                "{perm:?}: {p_hat} vs {p}"
            );
        }
    }
}
