//! Recommendation accuracy and the four diversity metrics: coverage,
//! correct coverage, intra-list similarity, novelty — plus rare-item
//! statistics. All metrics read a [`RecommendationList`] so the model and
//! the baseline are scored identically.

use crate::clicks::ClickData;
use crate::error::{BmcdError, Result};
use crate::ranking::Ranking;
use crate::recommend::RecommendationList;
use std::collections::{HashMap, HashSet};

/// What actually happened: full true rankings (simulation) or held-out
/// click sets (offline split), indexed like the recommendation users.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Rankings(Vec<Ranking>),
    HeldOut(Vec<Vec<u32>>),
}

impl GroundTruth {
    pub fn n_users(&self) -> usize {
        match self {
            GroundTruth::Rankings(r) => r.len(),
            GroundTruth::HeldOut(h) => h.len(),
        }
    }

    /// A recommendation counts as a hit when the item's true rank falls in
    /// the user's next top-k window (simulation) or the item was held out
    /// (offline split).
    pub fn is_hit(&self, user: usize, item: u32, clicked_count: usize, k: usize) -> Result<bool> {
        match self {
            GroundTruth::Rankings(ranks) => {
                let r = ranks.get(user).ok_or_else(|| {
                    BmcdError::invalid("truth", format!("user {user} missing from truth"))
                })?;
                let rank = r.rank_of(item as usize) as usize;
                Ok(rank > clicked_count && rank <= clicked_count + k)
            }
            GroundTruth::HeldOut(sets) => {
                let s = sets.get(user).ok_or_else(|| {
                    BmcdError::invalid("truth", format!("user {user} missing from truth"))
                })?;
                Ok(s.contains(&item))
            }
        }
    }
}

/// Fraction of recommendations confirmed by the truth. The denominator is
/// the recommendations actually present (after any cutoff).
pub fn accuracy(recs: &RecommendationList, truth: &GroundTruth) -> Result<f64> {
    if truth.n_users() < recs.n_users() {
        return Err(BmcdError::invalid(
            "truth",
            "fewer truth users than recommendation users",
        ));
    }
    let mut hits = 0u64;
    let mut total = 0u64;
    for (j, u) in recs.users.iter().enumerate() {
        for s in &u.items {
            total += 1;
            if truth.is_hit(j, s.item, u.clicked_count, recs.k)? {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(BmcdError::EmptyInput("no recommendations to score".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Distinct items ever recommended over the items eligible for
/// recommendation.
pub fn coverage(recs: &RecommendationList, n_eligible: usize) -> Result<f64> {
    if n_eligible == 0 {
        return Err(BmcdError::invalid("n_eligible", "must be >= 1"));
    }
    let distinct: HashSet<u32> = recs
        .users
        .iter()
        .flat_map(|u| u.items.iter().map(|s| s.item))
        .collect();
    Ok(distinct.len() as f64 / n_eligible as f64)
}

/// Distinct items recommended to at least one user for whom they were a
/// hit, over the eligible items.
pub fn correct_coverage(
    recs: &RecommendationList,
    truth: &GroundTruth,
    n_eligible: usize,
) -> Result<f64> {
    if n_eligible == 0 {
        return Err(BmcdError::invalid("n_eligible", "must be >= 1"));
    }
    let mut confirmed: HashSet<u32> = HashSet::new();
    for (j, u) in recs.users.iter().enumerate() {
        for s in &u.items {
            if truth.is_hit(j, s.item, u.clicked_count, recs.k)? {
                confirmed.insert(s.item);
            }
        }
    }
    Ok(confirmed.len() as f64 / n_eligible as f64)
}

/// Mean over users of the summed pairwise binary cosine similarity inside
/// each list, computed from training co-clicks. Items never clicked in
/// training contribute zero similarity.
pub fn intra_list_similarity(recs: &RecommendationList, training: &ClickData) -> f64 {
    if recs.users.is_empty() {
        return 0.0;
    }
    // Clicker sets per item, for intersection counting.
    let mut clickers: Vec<Vec<u32>> = vec![Vec::new(); training.n_items()];
    for (j, u) in training.users().iter().enumerate() {
        for &i in u.items() {
            clickers[i as usize].push(j as u32);
        }
    }
    let mut memo: HashMap<(u32, u32), f64> = HashMap::new();
    let mut total = 0.0;
    for u in &recs.users {
        for (a_idx, a) in u.items.iter().enumerate() {
            for b in &u.items[..a_idx] {
                let key = if a.item < b.item {
                    (a.item, b.item)
                } else {
                    (b.item, a.item)
                };
                let sim = *memo.entry(key).or_insert_with(|| {
                    cosine(&clickers[key.0 as usize], &clickers[key.1 as usize])
                });
                total += sim;
            }
        }
    }
    total / recs.users.len() as f64
}

fn cosine(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    // Sorted by construction: users are visited in index order.
    let mut both = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                both += 1;
                i += 1;
                j += 1;
            }
        }
    }
    both as f64 / ((a.len() as f64).sqrt() * (b.len() as f64).sqrt())
}

/// Item popularity in the training data: the fraction of all clicks each
/// item received.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile {
    counts: Vec<u64>,
    total: u64,
}

impl PopularityProfile {
    pub fn from_training(training: &ClickData) -> Self {
        let counts = training.item_click_counts();
        let total = counts.iter().sum();
        PopularityProfile { counts, total }
    }

    pub fn n_items(&self) -> usize {
        self.counts.len()
    }

    pub fn clicks(&self, item: u32) -> u64 {
        self.counts[item as usize]
    }

    /// `pop_i`: fraction of all training clicks attributed to the item.
    pub fn popularity(&self, item: u32) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[item as usize] as f64 / self.total as f64
        }
    }

    /// Items sorted by descending click count, ties broken by item index.
    pub fn by_popularity(&self) -> Vec<u32> {
        let mut items: Vec<u32> = (0..self.counts.len() as u32).collect();
        items.sort_by(|&a, &b| {
            self.counts[b as usize]
                .cmp(&self.counts[a as usize])
                .then(a.cmp(&b))
        });
        items
    }
}

/// Mean over users of `sum_{i in list} |log2 pop_i| / k`. Items with zero
/// training popularity are excluded and counted in the second return value.
pub fn novelty(recs: &RecommendationList, pop: &PopularityProfile, k: usize) -> (f64, usize) {
    if recs.users.is_empty() || k == 0 {
        return (0.0, 0);
    }
    let mut excluded = 0usize;
    let mut total = 0.0;
    for u in &recs.users {
        let mut user_sum = 0.0;
        for s in &u.items {
            let p = pop.popularity(s.item);
            if p > 0.0 {
                user_sum += p.log2().abs();
            } else {
                excluded += 1;
            }
        }
        total += user_sum / k as f64;
    }
    (total / recs.users.len() as f64, excluded)
}

/// With the `popular_cutoff` most-clicked items called popular and the rest
/// rare: the number of rare recommendations made and the number of users
/// who received at least one.
pub fn rare_item_stats(
    recs: &RecommendationList,
    pop: &PopularityProfile,
    popular_cutoff: usize,
) -> Result<(u64, u64)> {
    if popular_cutoff >= pop.n_items() {
        return Err(BmcdError::invalid(
            "popular_cutoff",
            format!("must be < n_items = {}", pop.n_items()),
        ));
    }
    let ranked = pop.by_popularity();
    let rare: HashSet<u32> = ranked[popular_cutoff..].iter().copied().collect();
    let mut n_rare = 0u64;
    let mut users_with_rare = 0u64;
    for u in &recs.users {
        let before = n_rare;
        for s in &u.items {
            if rare.contains(&s.item) {
                n_rare += 1;
            }
        }
        if n_rare > before {
            users_with_rare += 1;
        }
    }
    Ok((n_rare, users_with_rare))
}
