//! Synthetic data: clustered Mallows rankings binarized into click sets by
//! truncated-Poisson click counts, and the train/holdout split used for
//! offline evaluation.

use crate::clicks::{ClickData, ClickSet};
use crate::error::{BmcdError, Result};
use crate::mallows::{default_mallows_burn_in, sample_mallows};
use crate::ranking::Ranking;
use crate::rng::{derive_seed, domain, stream_rng};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// The fixed scattered consensus used as the third cluster default at
/// n = 50; the trailing entry completes the permutation.
pub const SCATTERED_CONSENSUS_50: [u32; 50] = [
    39, 36, 11, 1, 13, 12, 8, 48, 20, 49, 29, 32, 22, 28, 19, 5, 42, 18, 15, 7, 6, 27, 24, 16, 46,
    4, 21, 26, 34, 44, 25, 43, 41, 38, 35, 37, 45, 2, 14, 50, 40, 47, 9, 23, 30, 31, 3, 10, 33, 17,
];

/// A deterministic scattered permutation for any n: the fixed array above
/// at n = 50, otherwise a seeded shuffle (same for every caller).
pub fn scattered_consensus(n: usize) -> Ranking {
    if n == 50 {
        return Ranking::new(SCATTERED_CONSENSUS_50.to_vec()).unwrap();
    }
    let mut rng = stream_rng(0x5ca7_7e2e, domain::SIMULATE, n as u64);
    Ranking::random(n, &mut rng)
}

/// Clustered simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub n_items: usize,
    pub cluster_sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub consensuses: Vec<Ranking>,
    /// Mean parameter of the click-count distribution (truncated to >= 1).
    pub lambda_clicks: f64,
    pub seed: u64,
    /// Burn-in for the direct Mallows sampler; 0 selects the default.
    pub mallows_burn_in: usize,
}

impl SimulationSpec {
    /// Equal-size three-cluster design: identity, reversed, and scattered
    /// consensuses sharing one scale.
    pub fn three_clusters(n_users: usize, n_items: usize, alpha: f64, lambda_clicks: f64, seed: u64) -> Self {
        let base = n_users / 3;
        let sizes = vec![base, base, n_users - 2 * base];
        SimulationSpec {
            n_items,
            cluster_sizes: sizes,
            alphas: vec![alpha; 3],
            consensuses: vec![
                Ranking::identity(n_items),
                Ranking::reversed(n_items),
                scattered_consensus(n_items),
            ],
            lambda_clicks,
            seed,
            mallows_burn_in: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(BmcdError::invalid("n_items", "must be >= 1"));
        }
        let c = self.cluster_sizes.len();
        if c == 0 || self.alphas.len() != c || self.consensuses.len() != c {
            return Err(BmcdError::invalid(
                "cluster_sizes",
                "sizes, alphas and consensuses must have equal nonzero length",
            ));
        }
        if self.n_users() == 0 {
            return Err(BmcdError::invalid("cluster_sizes", "no users"));
        }
        for a in &self.alphas {
            if !(*a >= 0.0) {
                return Err(BmcdError::invalid("alphas", "must be >= 0"));
            }
        }
        for rho in &self.consensuses {
            if rho.len() != self.n_items {
                return Err(BmcdError::invalid(
                    "consensuses",
                    format!("consensus length {} != n_items {}", rho.len(), self.n_items),
                ));
            }
        }
        if !(self.lambda_clicks > 0.0) {
            return Err(BmcdError::invalid("lambda_clicks", "must be > 0"));
        }
        Ok(())
    }
}

/// Draw each cluster's member rankings from its Mallows distribution.
/// Returns rankings and cluster labels, users grouped by cluster.
pub fn simulate_rankings(spec: &SimulationSpec) -> Result<(Vec<Ranking>, Vec<u32>)> {
    spec.validate()?;
    let burn = if spec.mallows_burn_in == 0 {
        default_mallows_burn_in(spec.n_items)
    } else {
        spec.mallows_burn_in
    };
    let mut rankings = Vec::with_capacity(spec.n_users());
    let mut labels = Vec::with_capacity(spec.n_users());
    for (c, (&size, rho)) in spec
        .cluster_sizes
        .iter()
        .zip(&spec.consensuses)
        .enumerate()
    {
        if size == 0 {
            continue;
        }
        let seed = derive_seed(spec.seed, domain::SIMULATE, c as u64);
        let draws = sample_mallows(spec.alphas[c], rho, size, burn, seed)?;
        rankings.extend(draws);
        labels.extend(std::iter::repeat_n(c as u32, size));
    }
    Ok((rankings, labels))
}

/// Poisson draw conditioned on being >= 1, by rejection.
pub fn truncated_poisson(lambda: f64, rng: &mut impl Rng) -> u64 {
    let dist = Poisson::new(lambda).expect("positive lambda");
    loop {
        let x: f64 = dist.sample(rng);
        if x >= 1.0 {
            return x as u64;
        }
    }
}

/// Mean of the truncated distribution: `lambda / (1 - exp(-lambda))`.
pub fn truncated_poisson_mean(lambda: f64) -> f64 {
    lambda / (1.0 - (-lambda).exp())
}

/// Binarize rankings into click sets: user j clicks their `c_j` top-ranked
/// items with `c_j` truncated-Poisson. Counts above n are capped at n; the
/// second return value reports how many draws were capped.
pub fn binarize_top_clicks(rankings: &[Ranking], spec: &SimulationSpec) -> Result<(ClickData, usize)> {
    spec.validate()?;
    if rankings.is_empty() {
        return Err(BmcdError::EmptyInput("no rankings".into()));
    }
    let n = spec.n_items;
    let mut rng = stream_rng(spec.seed, domain::CLICKS, 0);
    let mut capped = 0usize;
    let mut users = Vec::with_capacity(rankings.len());
    for r in rankings {
        let mut c = truncated_poisson(spec.lambda_clicks, &mut rng);
        if c > n as u64 {
            c = n as u64;
            capped += 1;
        }
        let clicked: Vec<u32> = (0..n as u32)
            .filter(|&i| r.rank_of(i as usize) as u64 <= c)
            .collect();
        users.push(ClickSet::new(clicked)?);
    }
    Ok((ClickData::new(n, users)?, capped))
}

/// Holdout settings: remove `k_removed` clicks per user, keep only users
/// retaining at least `min_retained`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub k_removed: usize,
    pub min_retained: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            k_removed: 10,
            min_retained: 3,
            seed: 0,
        }
    }
}

/// Train clicks, per-user held-out items, the surviving users' original
/// indices, and the number excluded for having too few clicks.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: ClickData,
    pub held_out: Vec<Vec<u32>>,
    pub kept_users: Vec<usize>,
    pub excluded: usize,
}

/// Remove exactly `k_removed` random clicks per eligible user into the
/// held-out set; train and held-out partition each user's clicks.
pub fn split_holdout(data: &ClickData, spec: &SplitSpec) -> Result<SplitResult> {
    if spec.k_removed == 0 {
        return Err(BmcdError::invalid("k_removed", "must be >= 1"));
    }
    if spec.min_retained == 0 {
        return Err(BmcdError::invalid("min_retained", "must be >= 1"));
    }
    let mut rng = stream_rng(spec.seed, domain::SPLIT, 0);
    let mut train_users = Vec::new();
    let mut held_out = Vec::new();
    let mut kept_users = Vec::new();
    let mut excluded = 0usize;
    for (j, u) in data.users().iter().enumerate() {
        if u.count() < spec.k_removed + spec.min_retained {
            excluded += 1;
            continue;
        }
        let mut items = u.items().to_vec();
        items.shuffle(&mut rng);
        let (out, kept) = items.split_at(spec.k_removed);
        let mut out = out.to_vec();
        out.sort_unstable();
        held_out.push(out);
        train_users.push(ClickSet::new(kept.to_vec())?);
        kept_users.push(j);
    }
    if train_users.is_empty() {
        return Err(BmcdError::EmptyInput(
            "no user has enough clicks for the requested split".into(),
        ));
    }
    Ok(SplitResult {
        train: ClickData::new(data.n_items(), train_users)?,
        held_out,
        kept_users,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mallows::{footrule_distance, PartitionTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scattered_consensus_is_a_permutation_everywhere() {
        for n in [5, 20, 50, 80] {
            let r = scattered_consensus(n);
            assert_eq!(r.len(), n);
            assert!(r.is_permutation());
        }
        // Fixed at n = 50, reproducible elsewhere.
        assert_eq!(scattered_consensus(50).ranks()[..3], [39, 36, 11]);
        assert_eq!(scattered_consensus(20), scattered_consensus(20));
    }

    #[test]
    fn large_alpha_concentrates_on_consensus() {
        let spec = SimulationSpec {
            n_items: 6,
            cluster_sizes: vec![30],
            alphas: vec![1000.0],
            consensuses: vec![Ranking::new(vec![3, 1, 2, 6, 5, 4]).unwrap()],
            lambda_clicks: 2.0,
            seed: 1,
            mallows_burn_in: 0,
        };
        let (rankings, labels) = simulate_rankings(&spec).unwrap();
        assert_eq!(labels, vec![0; 30]);
        for r in &rankings {
            assert_eq!(r, &spec.consensuses[0]);
        }
    }

    #[test]
    fn alpha_zero_is_uniform_over_permutations() {
        let spec = SimulationSpec {
            n_items: 3,
            cluster_sizes: vec![3000],
            alphas: vec![0.0],
            consensuses: vec![Ranking::identity(3)],
            lambda_clicks: 1.0,
            seed: 2,
            mallows_burn_in: 0,
        };
        let (rankings, _) = simulate_rankings(&spec).unwrap();
        let mut counts = std::collections::HashMap::new();
        for r in &rankings {
            *counts.entry(r.ranks().to_vec()).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 6);
        for &c in counts.values() {
            let f = c as f64 / 3000.0;
            assert!((f - 1.0 / 6.0).abs() < 0.04, "freq {f}");
        }
    }

    #[test]
    fn per_cluster_mean_distance_matches_enumeration() {
        // Exact Mallows moments by enumeration at small n; the sampled
        // mean distance to the consensus must sit within 3 SE.
        let n = 5;
        let alpha = 2.0;
        let size = 4000;
        let spec = SimulationSpec {
            n_items: n,
            cluster_sizes: vec![size],
            alphas: vec![alpha],
            consensuses: vec![Ranking::new(vec![2, 5, 1, 3, 4]).unwrap()],
            lambda_clicks: 2.0,
            seed: 3,
            mallows_burn_in: 0,
        };
        let (rankings, _) = simulate_rankings(&spec).unwrap();

        let table = PartitionTable::exact(n).unwrap();
        let z = table.log_partition(alpha).unwrap().exp();
        // E[d] and E[d^2] from the exact distance histogram.
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        crate::ranking::for_each_permutation(n, |p| {
            let d: i64 = p
                .iter()
                .zip(spec.consensuses[0].ranks())
                .map(|(&a, &b)| (a as i64 - b as i64).abs())
                .sum();
            let w = (-alpha * d as f64 / n as f64).exp() / z;
            e1 += d as f64 * w;
            e2 += (d * d) as f64 * w;
        });
        let var = e2 - e1 * e1;
        let se = (var / size as f64).sqrt();

        let mean: f64 = rankings
            .iter()
            .map(|r| footrule_distance(r, &spec.consensuses[0]).unwrap() as f64)
            .sum::<f64>()
            / size as f64;
        assert!(
            (mean - e1).abs() < 3.0 * se,
            "mean {mean} vs expected {e1} (se {se})"
        );
    }

    #[test]
    fn truncated_poisson_never_zero_and_mean_matches() {
        let lambda = 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 100_000;
        let mut sum = 0u64;
        for _ in 0..reps {
            let x = truncated_poisson(lambda, &mut rng);
            assert!(x >= 1);
            sum += x;
        }
        let mean = sum as f64 / reps as f64;
        let expected = truncated_poisson_mean(lambda);
        assert!((expected - 5.0339).abs() < 1e-3);
        // SE of the truncated mean; variance close to lambda here.
        let se = (lambda / reps as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn binarize_clicks_top_ranked_items() {
        let spec = SimulationSpec {
            n_items: 6,
            cluster_sizes: vec![200],
            alphas: vec![2.0],
            consensuses: vec![Ranking::identity(6)],
            lambda_clicks: 2.0,
            seed: 5,
            mallows_burn_in: 200,
        };
        let (rankings, _) = simulate_rankings(&spec).unwrap();
        let (data, capped) = binarize_top_clicks(&rankings, &spec).unwrap();
        assert_eq!(data.n_users(), 200);
        for (j, u) in data.users().iter().enumerate() {
            let c = u.count() as u32;
            assert!(c >= 1);
            for &i in u.items() {
                assert!(rankings[j].rank_of(i as usize) <= c);
            }
        }
        // Poisson(2) rarely exceeds 6; capping is possible but uncommon.
        assert!(capped <= 5, "capped {capped}");
    }

    #[test]
    fn click_counts_cap_at_n() {
        let spec = SimulationSpec {
            n_items: 2,
            cluster_sizes: vec![300],
            alphas: vec![1.0],
            consensuses: vec![Ranking::identity(2)],
            lambda_clicks: 6.0,
            seed: 6,
            mallows_burn_in: 100,
        };
        let (rankings, _) = simulate_rankings(&spec).unwrap();
        let (data, capped) = binarize_top_clicks(&rankings, &spec).unwrap();
        assert!(capped > 0);
        for u in data.users() {
            assert!(u.count() <= 2);
        }
    }

    #[test]
    fn split_partitions_each_users_clicks() {
        let users: Vec<ClickSet> = (0..40)
            .map(|j| {
                let start = j % 3;
                ClickSet::new((start..start + 7).map(|i| i as u32).collect()).unwrap()
            })
            .collect();
        let data = ClickData::new(12, users).unwrap();
        let spec = SplitSpec {
            k_removed: 4,
            min_retained: 3,
            seed: 7,
        };
        let split = split_holdout(&data, &spec).unwrap();
        assert_eq!(split.excluded, 0);
        for (idx, &j) in split.kept_users.iter().enumerate() {
            let train = split.train.user(idx);
            let held = &split.held_out[idx];
            assert_eq!(held.len(), 4);
            assert_eq!(train.count(), 3);
            // Disjoint and jointly equal to the original clicks.
            let mut union: Vec<u32> = train.items().to_vec();
            union.extend_from_slice(held);
            union.sort_unstable();
            assert_eq!(union, data.user(j).items());
        }
    }

    #[test]
    fn split_excludes_small_users_with_count() {
        let users = vec![
            ClickSet::new(vec![0, 1]).unwrap(),
            ClickSet::new((0..8).collect()).unwrap(),
        ];
        let data = ClickData::new(8, users).unwrap();
        let spec = SplitSpec {
            k_removed: 3,
            min_retained: 3,
            seed: 8,
        };
        let split = split_holdout(&data, &spec).unwrap();
        assert_eq!(split.excluded, 1);
        assert_eq!(split.kept_users, vec![1]);
        // Exactly min retained when count == k + min.
        assert_eq!(split.train.user(0).count(), 5);
    }

    #[test]
    fn default_split_needs_thirteen_clicks() {
        // Default thresholds: remove 10, retain at least 3. A 13-click
        // user is the smallest eligible one.
        let users = vec![
            ClickSet::new((0..12).collect()).unwrap(),
            ClickSet::new((0..13).collect()).unwrap(),
        ];
        let data = ClickData::new(20, users).unwrap();
        let split = split_holdout(&data, &SplitSpec::default()).unwrap();
        assert_eq!(split.kept_users, vec![1]);
        assert_eq!(split.excluded, 1);
        assert_eq!(split.train.user(0).count(), 3);
        assert_eq!(split.held_out[0].len(), 10);
    }

    #[test]
    fn split_is_reproducible() {
        let users: Vec<ClickSet> = (0..10)
            .map(|_| ClickSet::new((0..9).collect()).unwrap())
            .collect();
        let data = ClickData::new(9, users).unwrap();
        let spec = SplitSpec {
            k_removed: 3,
            min_retained: 3,
            seed: 11,
        };
        assert_eq!(
            split_holdout(&data, &spec).unwrap(),
            split_holdout(&data, &spec).unwrap()
        );
    }
}
