//! Chain initialization: fully random, or popularity-seeded for faster
//! convergence.

use crate::clicks::{ClickData, ClickSet};
use crate::error::{BmcdError, Result};
use crate::ranking::Ranking;
use crate::sampler::{sample_dirichlet, ChainConfig, ChainState};
use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp};

fn validate_input(data: &ClickData, config: &ChainConfig) -> Result<()> {
    config.validate()?;
    if data.n_users() == 0 {
        return Err(BmcdError::EmptyInput("no users in click data".into()));
    }
    Ok(())
}

/// Latent ranking with the clicked block and unclicked block each permuted
/// uniformly at random.
fn random_compatible_ranking(n: usize, clicks: &ClickSet, rng: &mut impl Rng) -> Ranking {
    let c = clicks.count();
    let mut top: Vec<u32> = (1..=c as u32).collect();
    let mut bottom: Vec<u32> = (c as u32 + 1..=n as u32).collect();
    top.shuffle(rng);
    bottom.shuffle(rng);
    let mut ranks = vec![0u32; n];
    let mut t = 0;
    let mut b = 0;
    for (i, r) in ranks.iter_mut().enumerate() {
        if clicks.contains(i as u32) {
            *r = top[t];
            t += 1;
        } else {
            *r = bottom[b];
            b += 1;
        }
    }
    Ranking::from_ranks_unchecked(ranks)
}

/// Rank items by descending click count, randomizing ties.
fn popularity_ranking(counts: &[u64], rng: &mut impl Rng) -> Ranking {
    let mut order: Vec<(u64, u64, usize)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, rng.random::<u64>(), i))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut ranks = vec![0u32; counts.len()];
    for (pos, &(_, _, item)) in order.iter().enumerate() {
        ranks[item] = pos as u32 + 1;
    }
    Ranking::from_ranks_unchecked(ranks)
}

/// Compatible ranking inheriting the pairwise order of a reference
/// consensus within each block: clicked items take ranks `1..=c` in
/// consensus order, unclicked items take the rest in consensus order.
pub(crate) fn consensus_ordered_ranking(n: usize, clicks: &ClickSet, consensus: &Ranking) -> Ranking {
    let c = clicks.count();
    let mut clicked: Vec<u32> = clicks.items().to_vec();
    clicked.sort_by_key(|&i| consensus.rank_of(i as usize));
    let mut unclicked: Vec<u32> = (0..n as u32).filter(|&i| !clicks.contains(i)).collect();
    unclicked.sort_by_key(|&i| consensus.rank_of(i as usize));
    let mut ranks = vec![0u32; n];
    for (pos, &i) in clicked.iter().enumerate() {
        ranks[i as usize] = pos as u32 + 1;
    }
    for (pos, &i) in unclicked.iter().enumerate() {
        ranks[i as usize] = (c + pos) as u32 + 1;
    }
    Ranking::from_ranks_unchecked(ranks)
}

/// Random initialization: labels uniform, scales from the exponential
/// prior, consensuses uniform, latent rankings with independently permuted
/// blocks, weights from the Dirichlet prior.
pub fn init_random(data: &ClickData, config: &ChainConfig, rng: &mut impl Rng) -> Result<ChainState> {
    validate_input(data, config)?;
    let n = data.n_items();
    let c = config.n_clusters;
    let exp = Exp::new(config.lambda).expect("validated lambda");
    let alphas: Vec<f64> = (0..c).map(|_| exp.sample(rng).max(1e-6)).collect();
    let rhos: Vec<Ranking> = (0..c).map(|_| Ranking::random(n, rng)).collect();
    let tau = sample_dirichlet(&vec![config.psi; c], rng);
    let z: Vec<u32> = (0..data.n_users())
        .map(|_| rng.random_range(0..c as u32))
        .collect();
    let r_tilde: Vec<Ranking> = data
        .users()
        .iter()
        .map(|u| random_compatible_ranking(n, u, rng))
        .collect();
    Ok(ChainState {
        alphas,
        rhos,
        tau,
        z,
        r_tilde,
    })
}

/// Popularity initialization: a global popularity consensus seeds each
/// latent ranking, labels are uniform, per-cluster consensuses are rebuilt
/// from each cluster's own click frequencies, and every scale starts at
/// `alpha_init`.
pub fn init_popularity(
    data: &ClickData,
    config: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<ChainState> {
    validate_input(data, config)?;
    let n = data.n_items();
    let c = config.n_clusters;
    let rho0 = popularity_ranking(&data.item_click_counts(), rng);
    let r_tilde: Vec<Ranking> = data
        .users()
        .iter()
        .map(|u| consensus_ordered_ranking(n, u, &rho0))
        .collect();
    let z: Vec<u32> = (0..data.n_users())
        .map(|_| rng.random_range(0..c as u32))
        .collect();
    let mut rhos = Vec::with_capacity(c);
    for cluster in 0..c as u32 {
        let mut counts = vec![0u64; n];
        for (j, u) in data.users().iter().enumerate() {
            if z[j] == cluster {
                for &i in u.items() {
                    counts[i as usize] += 1;
                }
            }
        }
        rhos.push(popularity_ranking(&counts, rng));
    }
    let alphas = vec![config.alpha_init; c];
    let tau = sample_dirichlet(&vec![config.psi; c], rng);
    Ok(ChainState {
        alphas,
        rhos,
        tau,
        z,
        r_tilde,
    })
}
