//! Footrule distance between rank vectors.

use crate::error::{BmcdError, Result};
use crate::ranking::Ranking;

/// Sum of absolute rank differences, `sum_i |a_i - b_i|`. Always even.
pub fn footrule_distance(a: &Ranking, b: &Ranking) -> Result<u64> {
    if a.len() != b.len() {
        return Err(BmcdError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(footrule_on_ranks(a.ranks(), b.ranks()))
}

pub(crate) fn footrule_on_ranks(a: &[u32], b: &[u32]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as i64 - y as i64).unsigned_abs())
        .sum()
}

/// Largest footrule distance on `n` items: `floor(n^2 / 2)`.
pub fn max_footrule_distance(n: usize) -> u64 {
    (n as u64 * n as u64) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_distance_is_zero() {
        let a = Ranking::new(vec![1, 2, 3]).unwrap();
        assert_eq!(footrule_distance(&a, &a).unwrap(), 0);
    }

    #[test]
    fn reverse_of_three() {
        let a = Ranking::new(vec![1, 2, 3]).unwrap();
        let b = Ranking::new(vec![3, 2, 1]).unwrap();
        assert_eq!(footrule_distance(&a, &b).unwrap(), 4);
    }

    #[test]
    fn adjacent_swaps_of_four() {
        // |1-2| + |2-1| + |3-4| + |4-3|
        let a = Ranking::new(vec![1, 2, 3, 4]).unwrap();
        let b = Ranking::new(vec![2, 1, 4, 3]).unwrap();
        assert_eq!(footrule_distance(&a, &b).unwrap(), 4);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = Ranking::new(vec![1, 2, 3]).unwrap();
        let b = Ranking::new(vec![1, 2, 3, 4]).unwrap();
        assert!(footrule_distance(&a, &b).is_err());
    }

    #[test]
    fn max_distance_attained_by_reversal() {
        for n in 2..=9usize {
            let a = Ranking::identity(n);
            let b = Ranking::reversed(n);
            assert_eq!(footrule_distance(&a, &b).unwrap(), max_footrule_distance(n));
        }
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Ranking> {
        any::<u64>().prop_map(move |seed| {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v: Vec<u32> = (1..=n as u32).collect();
            v.shuffle(&mut rng);
            Ranking::new(v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn symmetric_even_and_triangle(
            (a, b, c) in (2usize..8).prop_flat_map(|n| (arb_perm(n), arb_perm(n), arb_perm(n)))
        ) {
            let dab = footrule_distance(&a, &b).unwrap();
            let dba = footrule_distance(&b, &a).unwrap();
            let dac = footrule_distance(&a, &c).unwrap();
            let dcb = footrule_distance(&c, &b).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(dab % 2, 0);
            prop_assert!(dab <= dac + dcb);
            prop_assert_eq!(dab == 0, a == b);
        }
    }

    #[test]
    fn right_invariance_under_item_relabeling() {
        // Applying one item relabeling to both arguments leaves the distance unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = 7;
            let a = Ranking::random(n, &mut rng);
            let b = Ranking::random(n, &mut rng);
            let sigma = Ranking::random(n, &mut rng);
            let relabel = |r: &Ranking| {
                let mut out = vec![0u32; n];
                for i in 0..n {
                    out[(sigma.rank_of(i) - 1) as usize] = r.rank_of(i);
                }
                Ranking::new(out).unwrap()
            };
            assert_eq!(
                footrule_distance(&a, &b).unwrap(),
                footrule_distance(&relabel(&a), &relabel(&b)).unwrap()
            );
        }
    }
}
