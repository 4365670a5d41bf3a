//! Turning posterior draws into recommendations: next-top-k rank
//! probabilities per (user, item), top-k selection, cutoff filtering, and
//! calibration tables.

use crate::clicks::ClickData;
use crate::error::{BmcdError, Result};
use crate::metrics::GroundTruth;
use crate::sampler::PosteriorSamples;

/// Posterior probability that each item sits in each user's next top-k
/// window. Backed by integer sample counts so the row-sum identity
/// `sum_i P_ij = c_j + k` and clicked-item probabilities of exactly 1 hold
/// without floating-point drift.
#[derive(Debug, Clone, PartialEq)]
pub struct TppMatrix {
    n_users: usize,
    n_items: usize,
    k: usize,
    n_samples: u64,
    /// Row-major `n_users x n_items` counts of samples with rank <= c_j + k.
    counts: Vec<u64>,
    clicked: Vec<Vec<u32>>,
}

impl TppMatrix {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn count(&self, user: usize, item: usize) -> u64 {
        self.counts[user * self.n_items + item]
    }

    /// The probability `count / n_samples`.
    pub fn value(&self, user: usize, item: usize) -> f64 {
        self.count(user, item) as f64 / self.n_samples as f64
    }

    pub fn clicked_items(&self, user: usize) -> &[u32] {
        &self.clicked[user]
    }

    pub fn clicked_count(&self, user: usize) -> usize {
        self.clicked[user].len()
    }

    /// Integer row sum; equals `n_samples * (c_j + k)` whenever
    /// `c_j + k <= n`.
    pub fn row_count_sum(&self, user: usize) -> u64 {
        self.counts[user * self.n_items..(user + 1) * self.n_items]
            .iter()
            .sum()
    }

    pub fn from_parts(
        n_users: usize,
        n_items: usize,
        k: usize,
        n_samples: u64,
        counts: Vec<u64>,
        clicked: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if counts.len() != n_users * n_items || clicked.len() != n_users {
            return Err(BmcdError::DimensionMismatch {
                expected: n_users * n_items,
                got: counts.len(),
            });
        }
        if n_samples == 0 {
            return Err(BmcdError::EmptyInput("zero posterior samples".into()));
        }
        Ok(TppMatrix {
            n_users,
            n_items,
            k,
            n_samples,
            counts,
            clicked,
        })
    }
}

/// Count, over stored posterior draws, how often each item ranks within
/// each user's next top-k window.
pub fn compute_tpp(samples: &PosteriorSamples, data: &ClickData, k: usize) -> Result<TppMatrix> {
    if k == 0 {
        return Err(BmcdError::invalid("k", "must be >= 1"));
    }
    if samples.n_samples() == 0 {
        return Err(BmcdError::EmptyInput("no stored samples".into()));
    }
    if samples.n_users != data.n_users() || samples.n_items != data.n_items() {
        return Err(BmcdError::DimensionMismatch {
            expected: data.n_users(),
            got: samples.n_users,
        });
    }
    let n_users = data.n_users();
    let n_items = data.n_items();
    let clicked: Vec<Vec<u32>> = data.users().iter().map(|u| u.items().to_vec()).collect();

    if let Some(acc) = samples.tpp_counts_for(k) {
        return TppMatrix::from_parts(
            n_users,
            n_items,
            k,
            acc.n_samples,
            acc.counts.clone(),
            clicked,
        );
    }

    let draws = samples.r_tilde.as_ref().ok_or_else(|| {
        BmcdError::invalid(
            "k",
            format!("horizon {k} was not accumulated and latent rankings were not stored"),
        )
    })?;
    let mut counts = vec![0u64; n_users * n_items];
    for draw in draws {
        for (j, r) in draw.iter().enumerate() {
            let threshold = (data.user(j).count() + k).min(n_items) as u32;
            let row = &mut counts[j * n_items..(j + 1) * n_items];
            for (i, cell) in row.iter_mut().enumerate() {
                *cell += (r.rank_of(i) <= threshold) as u64;
            }
        }
    }
    TppMatrix::from_parts(n_users, n_items, k, draws.len() as u64, counts, clicked)
}

/// One recommended item with its score (a posterior probability for the
/// Mallows model, a predicted preference for the factor baseline).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    pub item: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecommendations {
    pub clicked_count: usize,
    /// Scores descending; ties broken by the smaller item index.
    pub items: Vec<ScoredItem>,
}

/// Per-user recommendation lists at a fixed horizon `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub k: usize,
    pub users: Vec<UserRecommendations>,
}

impl RecommendationList {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Total recommendations across users.
    pub fn total(&self) -> usize {
        self.users.iter().map(|u| u.items.len()).sum()
    }
}

/// The k unclicked items of highest posterior probability per user, ties
/// broken deterministically by item index. Users with fewer than k
/// unclicked items get short lists (the count is visible in the output).
pub fn recommend_top_k(tpp: &TppMatrix) -> RecommendationList {
    let k = tpp.k();
    let n_items = tpp.n_items();
    let users = (0..tpp.n_users())
        .map(|j| {
            let clicked = tpp.clicked_items(j);
            let mut candidates: Vec<(u64, u32)> = (0..n_items as u32)
                .filter(|i| clicked.binary_search(i).is_err())
                .map(|i| (tpp.count(j, i as usize), i))
                .collect();
            // Integer counts compare exactly; no float ties.
            candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            candidates.truncate(k);
            UserRecommendations {
                clicked_count: tpp.clicked_count(j),
                items: candidates
                    .into_iter()
                    .map(|(count, item)| ScoredItem {
                        item,
                        score: count as f64 / tpp.n_samples() as f64,
                    })
                    .collect(),
            }
        })
        .collect();
    RecommendationList { k, users }
}

/// Survivor counts reported by [`apply_cutoff`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutoffReport {
    pub threshold_kept: usize,
    pub per_user_kept: Vec<usize>,
}

/// Drop recommendations scoring below `threshold`. Scores equal to the
/// threshold survive.
pub fn apply_cutoff(recs: &RecommendationList, threshold: f64) -> (RecommendationList, CutoffReport) {
    let users: Vec<UserRecommendations> = recs
        .users
        .iter()
        .map(|u| UserRecommendations {
            clicked_count: u.clicked_count,
            items: u
                .items
                .iter()
                .copied()
                .filter(|s| s.score >= threshold)
                .collect(),
        })
        .collect();
    let per_user_kept: Vec<usize> = users.iter().map(|u| u.items.len()).collect();
    let kept = per_user_kept.iter().sum();
    (
        RecommendationList {
            k: recs.k,
            users,
        },
        CutoffReport {
            threshold_kept: kept,
            per_user_kept,
        },
    )
}

/// One calibration bin: recommendations whose score fell in
/// `[low, high)` (the last bin is closed at 1).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub low: f64,
    pub high: f64,
    pub mean_score: f64,
    /// Fraction of the bin's recommendations confirmed by the truth.
    pub hit_rate: f64,
    pub count: usize,
}

/// Bin recommendation scores into intervals of `bin_width` and report the
/// empirical hit rate per nonempty bin.
pub fn calibration_bins(
    recs: &RecommendationList,
    truth: &GroundTruth,
    bin_width: f64,
) -> Result<Vec<CalibrationBin>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(BmcdError::invalid("bin_width", "must be in (0, 1]"));
    }
    let n_bins = (1.0 / bin_width).ceil() as usize;
    let mut sums = vec![0.0f64; n_bins];
    let mut hits = vec![0u64; n_bins];
    let mut counts = vec![0u64; n_bins];
    for (j, u) in recs.users.iter().enumerate() {
        for s in &u.items {
            let mut bin = (s.score / bin_width).floor() as usize;
            if bin >= n_bins {
                bin = n_bins - 1; // score == 1 joins the closed last bin
            }
            sums[bin] += s.score;
            counts[bin] += 1;
            if truth.is_hit(j, s.item, u.clicked_count, recs.k)? {
                hits[bin] += 1;
            }
        }
    }
    Ok((0..n_bins)
        .filter(|&m| counts[m] > 0)
        .map(|m| CalibrationBin {
            low: m as f64 * bin_width,
            high: ((m + 1) as f64 * bin_width).min(1.0),
            mean_score: sums[m] / counts[m] as f64,
            hit_rate: hits[m] as f64 / counts[m] as f64,
            count: counts[m] as usize,
        })
        .collect())
}
