//! Single-site conditional updates. Each public function updates one
//! coordinate of the chain state in place and reports what happened; the
//! chain loop calls the same kernels through thin wrappers that reuse
//! per-iteration caches.

use crate::clicks::ClickSet;
use crate::error::Result;
use crate::mallows::{footrule_distance, leap_and_shift, max_leap_size, PartitionTable};
use crate::ranking::Ranking;
use crate::sampler::{sample_dirichlet, AugmentationProposal, ChainConfig, ChainState};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

/// Gibbs draw of the cluster weights from Dirichlet(psi + n_1, ..., psi + n_C).
pub fn update_tau(state: &mut ChainState, config: &ChainConfig, rng: &mut impl Rng) {
    let sizes = state.cluster_sizes();
    let params: Vec<f64> = sizes.iter().map(|&s| config.psi + s as f64).collect();
    state.tau = sample_dirichlet(&params, rng);
}

/// M-H update of one cluster consensus with a leap-and-shift proposal.
/// The partition function cancels: it does not depend on the consensus.
pub fn update_rho(
    state: &mut ChainState,
    cluster: usize,
    config: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<bool> {
    let members: Vec<u32> = state
        .z
        .iter()
        .enumerate()
        .filter(|(_, &zj)| zj as usize == cluster)
        .map(|(j, _)| j as u32)
        .collect();
    let leap = config.effective_leap_size(state.rhos[cluster].len());
    rho_kernel(
        &mut state.rhos[cluster],
        state.alphas[cluster],
        &members,
        &state.r_tilde,
        leap,
        rng,
    )
}

pub(crate) fn rho_kernel(
    rho: &mut Ranking,
    alpha: f64,
    members: &[u32],
    r_tilde: &[Ranking],
    leap: usize,
    rng: &mut impl Rng,
) -> Result<bool> {
    let n = rho.len() as f64;
    let mv = leap_and_shift(rho, leap, rng)?;
    let mut delta = 0i64;
    for &j in members {
        let r = &r_tilde[j as usize];
        for &i in &mv.moved_items {
            let i = i as usize;
            let rank = r.rank_of(i) as i64;
            delta += (rank - mv.proposal.rank_of(i) as i64).abs()
                - (rank - rho.rank_of(i) as i64).abs();
        }
    }
    let log_accept = (mv.log_backward - mv.log_forward) - alpha * delta as f64 / n;
    let accepted = log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept;
    if accepted {
        *rho = mv.proposal;
    }
    Ok(accepted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaOutcome {
    pub accepted: bool,
    /// Proposal fell outside the table grid and was evaluated at the edge.
    pub clamped: bool,
}

/// M-H update of one cluster scale with a log-normal random walk.
///
/// Acceptance combines the likelihood of the cluster members, the
/// partition-function ratio, the exponential prior, and the log-walk
/// Jacobian `alpha' / alpha`.
pub fn update_alpha(
    state: &mut ChainState,
    cluster: usize,
    config: &ChainConfig,
    table: &PartitionTable,
    rng: &mut impl Rng,
) -> Result<AlphaOutcome> {
    let (sum_d, n_c) = cluster_distance_sum(state, cluster);
    alpha_kernel(
        &mut state.alphas[cluster],
        sum_d,
        n_c,
        config,
        table,
        rng,
    )
}

pub(crate) fn cluster_distance_sum(state: &ChainState, cluster: usize) -> (u64, u64) {
    let mut sum = 0u64;
    let mut count = 0u64;
    for (j, &zj) in state.z.iter().enumerate() {
        if zj as usize == cluster {
            sum += footrule_distance(&state.r_tilde[j], &state.rhos[cluster]).unwrap();
            count += 1;
        }
    }
    (sum, count)
}

pub(crate) fn alpha_kernel(
    alpha: &mut f64,
    sum_d: u64,
    n_c: u64,
    config: &ChainConfig,
    table: &PartitionTable,
    rng: &mut impl Rng,
) -> Result<AlphaOutcome> {
    let n = table.n() as f64;
    let xi: f64 = StandardNormal.sample(rng);
    let raw = *alpha * (config.alpha_proposal_sd * xi).exp();
    let (proposal, clamped) = table.clamp_alpha(raw);
    let log_accept = -(proposal - *alpha) / n * sum_d as f64
        + n_c as f64 * (table.log_partition(*alpha)? - table.log_partition(proposal)?)
        - config.lambda * (proposal - *alpha)
        + (proposal / *alpha).ln();
    let accepted = log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept;
    if accepted {
        *alpha = proposal;
    }
    Ok(AlphaOutcome { accepted, clamped })
}

/// Gibbs draw of one user's cluster label:
/// `P(z_j = c) ∝ tau_c exp(-alpha_c d(r_j, rho_c) / n) / Z_n(alpha_c)`.
pub fn update_z(
    state: &mut ChainState,
    user: usize,
    table: &PartitionTable,
    rng: &mut impl Rng,
) -> Result<()> {
    let log_z: Vec<f64> = state
        .alphas
        .iter()
        .map(|&a| table.log_partition(a))
        .collect::<Result<_>>()?;
    let mut z = state.z[user];
    z_kernel(
        &mut z,
        &state.r_tilde[user],
        &state.alphas,
        &state.rhos,
        &state.tau,
        &log_z,
        rng,
    );
    state.z[user] = z;
    Ok(())
}

pub(crate) fn z_kernel(
    z: &mut u32,
    r: &Ranking,
    alphas: &[f64],
    rhos: &[Ranking],
    tau: &[f64],
    log_z: &[f64],
    rng: &mut impl Rng,
) {
    let n_clusters = alphas.len();
    if n_clusters == 1 {
        *z = 0;
        return;
    }
    let n = r.len() as f64;
    let mut logw = Vec::with_capacity(n_clusters);
    let mut max = f64::NEG_INFINITY;
    for c in 0..n_clusters {
        let d = footrule_distance(r, &rhos[c]).unwrap() as f64;
        let w = tau[c].ln() - alphas[c] * d / n - log_z[c];
        if w > max {
            max = w;
        }
        logw.push(w);
    }
    let mut total = 0.0;
    for w in &mut logw {
        *w = (*w - max).exp();
        total += *w;
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (c, &w) in logw.iter().enumerate() {
        acc += w;
        if u < acc {
            *z = c as u32;
            return;
        }
    }
    *z = (n_clusters - 1) as u32;
}

/// Exact categorical probabilities of the label draw, for verification.
pub fn z_probabilities(
    state: &ChainState,
    user: usize,
    table: &PartitionTable,
) -> Result<Vec<f64>> {
    let r = &state.r_tilde[user];
    let n = r.len() as f64;
    let mut w = Vec::with_capacity(state.alphas.len());
    for c in 0..state.alphas.len() {
        let d = footrule_distance(r, &state.rhos[c])? as f64;
        w.push(
            state.tau[c].ln() - state.alphas[c] * d / n - table.log_partition(state.alphas[c])?,
        );
    }
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = w.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RTildeOutcome {
    pub accepted: bool,
    /// No legal proposal existed (every block smaller than 2 items).
    pub skipped: bool,
}

/// M-H update of one user's latent ranking, constrained to the compatible
/// set: proposals never move an item across the clicked/unclicked boundary.
pub fn update_r_tilde(
    state: &mut ChainState,
    user: usize,
    clicks: &ClickSet,
    config: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<RTildeOutcome> {
    let n = state.r_tilde[user].len();
    let unclicked: Vec<u32> = (0..n as u32).filter(|&i| !clicks.contains(i)).collect();
    let zj = state.z[user] as usize;
    let alpha = state.alphas[zj];
    let rho = state.rhos[zj].clone();
    r_tilde_kernel(
        &mut state.r_tilde[user],
        clicks.items(),
        &unclicked,
        alpha,
        &rho,
        config,
        rng,
    )
}

pub(crate) fn r_tilde_kernel(
    r: &mut Ranking,
    clicked: &[u32],
    unclicked: &[u32],
    alpha: f64,
    rho: &Ranking,
    config: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<RTildeOutcome> {
    match config.augmentation {
        AugmentationProposal::Swap => swap_kernel(r, clicked, unclicked, alpha, rho, rng),
        AugmentationProposal::TwoPartLeapShift => {
            two_part_kernel(r, clicked, unclicked, alpha, rho, config, rng)
        }
    }
}

fn swap_kernel(
    r: &mut Ranking,
    clicked: &[u32],
    unclicked: &[u32],
    alpha: f64,
    rho: &Ranking,
    rng: &mut impl Rng,
) -> Result<RTildeOutcome> {
    let pairs = |len: usize| (len * len.saturating_sub(1) / 2) as u64;
    let pc = pairs(clicked.len());
    let pu = pairs(unclicked.len());
    let total = pc + pu;
    if total == 0 {
        return Ok(RTildeOutcome {
            accepted: false,
            skipped: true,
        });
    }
    // Block chosen with probability proportional to its pair count, then a
    // uniform unordered pair inside it: uniform over all legal pairs.
    let block = if rng.random_range(0..total) < pc {
        clicked
    } else {
        unclicked
    };
    let a = block[rng.random_range(0..block.len())] as usize;
    let mut b = block[rng.random_range(0..block.len() - 1)] as usize;
    if b == a {
        b = block[block.len() - 1] as usize;
    }

    let (ra, rb) = (r.rank_of(a) as i64, r.rank_of(b) as i64);
    let (pa, pb) = (rho.rank_of(a) as i64, rho.rank_of(b) as i64);
    let delta = (rb - pa).abs() + (ra - pb).abs() - (ra - pa).abs() - (rb - pb).abs();
    let log_accept = -alpha * delta as f64 / rho.len() as f64;
    let accepted = log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept;
    if accepted {
        let ranks = r.ranks_mut();
        ranks.swap(a, b);
    }
    Ok(RTildeOutcome {
        accepted,
        skipped: false,
    })
}

fn two_part_kernel(
    r: &mut Ranking,
    clicked: &[u32],
    unclicked: &[u32],
    alpha: f64,
    rho: &Ranking,
    config: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<RTildeOutcome> {
    let n = rho.len();
    let c = clicked.len() as u32;

    // One block per proposal, chosen uniformly among blocks with at least
    // two items. Moving both blocks at once would flip the parity of both
    // block permutations on every accepted step and leave half the
    // compatible set unreachable. The fixed block choice cancels in the
    // acceptance ratio.
    let mut eligible: [Option<(&[u32], u32)>; 2] = [None, None];
    let mut n_eligible = 0;
    if clicked.len() >= 2 {
        eligible[n_eligible] = Some((clicked, 0u32));
        n_eligible += 1;
    }
    if unclicked.len() >= 2 {
        eligible[n_eligible] = Some((unclicked, c));
        n_eligible += 1;
    }
    if n_eligible == 0 {
        return Ok(RTildeOutcome {
            accepted: false,
            skipped: true,
        });
    }
    let (block, offset) = eligible[rng.random_range(0..n_eligible)].unwrap();

    // Leap-and-shift on the within-block rank permutation; offset maps
    // block positions back to global ranks.
    let leap = config
        .effective_leap_size(n)
        .min(max_leap_size(block.len()));
    let ranks: Vec<u32> = block
        .iter()
        .map(|&i| r.rank_of(i as usize) - offset)
        .collect();
    let mini = Ranking::from_ranks_unchecked(ranks);
    let mv = leap_and_shift(&mini, leap, rng)?;

    let mut delta = 0i64;
    for &pos in &mv.moved_items {
        let item = block[pos as usize] as usize;
        let target = rho.rank_of(item) as i64;
        let new_rank = (mv.proposal.rank_of(pos as usize) + offset) as i64;
        delta += (new_rank - target).abs() - (r.rank_of(item) as i64 - target).abs();
    }
    let log_accept = (mv.log_backward - mv.log_forward) - alpha * delta as f64 / n as f64;
    let accepted = log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept;
    if accepted {
        for &pos in &mv.moved_items {
            let item = block[pos as usize] as usize;
            r.ranks_mut()[item] = mv.proposal.rank_of(pos as usize) + offset;
        }
    }
    Ok(RTildeOutcome {
        accepted,
        skipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clicks::{ClickData, ClickSet};
    use crate::sampler::{compatible, init_random, InitStrategy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_config(c: usize) -> ChainConfig {
        ChainConfig {
            n_clusters: c,
            init: InitStrategy::Random,
            ..ChainConfig::default()
        }
    }

    #[test]
    fn tau_single_cluster_is_always_one() {
        let data = ClickData::new(3, vec![ClickSet::new(vec![0]).unwrap()]).unwrap();
        let config = base_config(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        for _ in 0..10 {
            update_tau(&mut state, &config, &mut rng);
            assert_eq!(state.tau, vec![1.0]);
        }
    }

    #[test]
    fn tau_concentrates_when_all_users_in_one_cluster() {
        let users: Vec<ClickSet> = (0..200).map(|_| ClickSet::new(vec![0]).unwrap()).collect();
        let data = ClickData::new(3, users).unwrap();
        let mut config = base_config(2);
        config.psi = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        state.z = vec![0; 200];
        let mut mean = 0.0;
        let reps = 2_000;
        for _ in 0..reps {
            update_tau(&mut state, &config, &mut rng);
            mean += state.tau[0];
        }
        mean /= reps as f64;
        // Dirichlet mean with psi -> 0 and all mass in cluster 0.
        assert!(mean > 0.99, "mean tau_0 = {mean}");
    }

    #[test]
    fn tau_prior_recovery_with_no_users() {
        // With an empty membership vector the Gibbs draw is the prior
        // Dirichlet(psi, ..., psi): empirical means 1/C within 3 SE.
        let config = base_config(4);
        let mut state = ChainState {
            alphas: vec![1.0; 4],
            rhos: (0..4).map(|_| Ranking::identity(3)).collect(),
            tau: vec![0.25; 4],
            z: vec![],
            r_tilde: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reps = 100_000;
        let mut means = vec![0.0; 4];
        for _ in 0..reps {
            update_tau(&mut state, &config, &mut rng);
            for (m, &t) in means.iter_mut().zip(&state.tau) {
                *m += t;
            }
        }
        // Var of one Dirichlet coordinate: (1/C)(1-1/C)/(C psi + 1).
        let var = 0.25 * 0.75 / (4.0 * config.psi + 1.0);
        let se = (var / reps as f64).sqrt();
        for m in &means {
            let mean = m / reps as f64;
            assert!((mean - 0.25).abs() < 3.0 * se, "mean {mean}");
        }
    }

    #[test]
    fn rho_mode_matches_single_user_ranking() {
        // One user with a frozen latent ranking: the consensus posterior is
        // maximized at that ranking.
        let data = ClickData::new(4, vec![ClickSet::new(vec![0, 1, 2, 3]).unwrap()]).unwrap();
        let config = base_config(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        let target = Ranking::new(vec![2, 4, 3, 1]).unwrap();
        state.r_tilde[0] = target.clone();
        state.alphas[0] = 6.0;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..20_000 {
            update_rho(&mut state, 0, &config, &mut rng).unwrap();
            *counts.entry(state.rhos[0].ranks().to_vec()).or_insert(0u64) += 1;
        }
        let mode = counts.iter().max_by_key(|(_, &c)| c).unwrap().0.clone();
        assert_eq!(mode, target.ranks().to_vec());
    }

    #[test]
    fn rho_chain_matches_enumerated_conditional() {
        // Three frozen users on four items: the consensus conditional is
        // proportional to exp(-alpha/n sum_j d(r_j, rho)) over all 24
        // candidates (the normalizer cancels, the prior is uniform).
        let r_tilde = vec![
            Ranking::new(vec![1, 2, 3, 4]).unwrap(),
            Ranking::new(vec![2, 1, 3, 4]).unwrap(),
            Ranking::new(vec![1, 3, 2, 4]).unwrap(),
        ];
        let alpha = 2.0;
        let members = [0u32, 1, 2];

        let mut exact: std::collections::HashMap<Vec<u32>, f64> = Default::default();
        let mut total = 0.0;
        crate::ranking::for_each_permutation(4, |p| {
            let rho = Ranking::new(p.to_vec()).unwrap();
            let sum: u64 = r_tilde
                .iter()
                .map(|r| footrule_distance(r, &rho).unwrap())
                .sum();
            let w = (-alpha * sum as f64 / 4.0).exp();
            exact.insert(p.to_vec(), w);
            total += w;
        });
        for w in exact.values_mut() {
            *w /= total;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut rho = Ranking::identity(4);
        let steps = 400_000;
        let mut counts: std::collections::HashMap<Vec<u32>, u64> = Default::default();
        for _ in 0..steps {
            rho_kernel(&mut rho, alpha, &members, &r_tilde, 1, &mut rng).unwrap();
            *counts.entry(rho.ranks().to_vec()).or_insert(0) += 1;
        }
        let mut tv = 0.0;
        for (perm, &p) in &exact {
            let q = counts.get(perm).copied().unwrap_or(0) as f64 / steps as f64;
            tv += (p - q).abs();
        }
        tv /= 2.0;
        assert!(tv < 0.03, "tv = {tv}");
    }

    #[test]
    fn empty_cluster_rho_explores_uniformly() {
        // No members: acceptance reduces to the proposal ratio and the
        // consensus wanders under the uniform prior. Check all 6 states of
        // P_3 are visited about equally.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rho = Ranking::identity(3);
        let mut counts = std::collections::HashMap::new();
        let steps = 60_000;
        for _ in 0..steps {
            rho_kernel(&mut rho, 2.0, &[], &[], 1, &mut rng).unwrap();
            *counts.entry(rho.ranks().to_vec()).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 6);
        for &c in counts.values() {
            let f = c as f64 / steps as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.02, "freq {f}");
        }
    }

    #[test]
    fn alpha_never_moves_with_zero_step() {
        let table = PartitionTable::exact(4).unwrap();
        let mut config = base_config(1);
        config.alpha_proposal_sd = 0.0;
        let mut alpha = 2.5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            alpha_kernel(&mut alpha, 10, 3, &config, &table, &mut rng).unwrap();
            assert_eq!(alpha, 2.5);
        }
    }

    #[test]
    fn alpha_prior_recovery_with_empty_cluster() {
        // No members: the stationary law is the exponential prior, mean
        // 1/lambda. Exact table evaluates any alpha, so no clamping bias.
        let table = PartitionTable::exact(4).unwrap();
        let mut config = base_config(1);
        config.lambda = 0.5;
        config.alpha_proposal_sd = 0.5;
        let mut alpha = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sum = 0.0;
        let burn = 20_000;
        let reps = 400_000;
        for i in 0..burn + reps {
            alpha_kernel(&mut alpha, 0, 0, &config, &table, &mut rng).unwrap();
            if i >= burn {
                sum += alpha;
            }
        }
        let mean = sum / reps as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.05, "mean alpha = {mean}");
    }

    #[test]
    fn z_single_cluster_is_constant() {
        let data = ClickData::new(3, vec![ClickSet::new(vec![0]).unwrap()]).unwrap();
        let config = base_config(1);
        let table = PartitionTable::exact(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        for _ in 0..10 {
            update_z(&mut state, 0, &table, &mut rng).unwrap();
            assert_eq!(state.z[0], 0);
        }
    }

    #[test]
    fn z_symmetric_clusters_are_uniform() {
        let data = ClickData::new(4, vec![ClickSet::new(vec![1, 2]).unwrap()]).unwrap();
        let config = base_config(2);
        let table = PartitionTable::exact(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        state.alphas = vec![2.0, 2.0];
        state.rhos = vec![Ranking::identity(4), Ranking::identity(4)];
        state.tau = vec![0.5, 0.5];
        let reps = 100_000;
        let mut ones = 0u64;
        for _ in 0..reps {
            update_z(&mut state, 0, &table, &mut rng).unwrap();
            ones += state.z[0] as u64;
        }
        let f = ones as f64 / reps as f64;
        let se = (0.25f64 / reps as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * se, "freq {f}");
    }

    #[test]
    fn z_probabilities_match_direct_formula() {
        let data = ClickData::new(4, vec![ClickSet::new(vec![0, 3]).unwrap()]).unwrap();
        let config = base_config(2);
        let table = PartitionTable::exact(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        state.alphas = vec![1.0, 4.0];
        state.rhos = vec![
            Ranking::new(vec![1, 2, 3, 4]).unwrap(),
            Ranking::new(vec![4, 3, 2, 1]).unwrap(),
        ];
        state.tau = vec![0.3, 0.7];
        state.r_tilde[0] = Ranking::new(vec![1, 3, 4, 2]).unwrap();

        let probs = z_probabilities(&state, 0, &table).unwrap();
        // Direct evaluation with exact Z.
        let n = 4.0;
        let d0 = footrule_distance(&state.r_tilde[0], &state.rhos[0]).unwrap() as f64;
        let d1 = footrule_distance(&state.r_tilde[0], &state.rhos[1]).unwrap() as f64;
        let w0 = 0.3 * (-1.0 * d0 / n).exp() / table.log_partition(1.0).unwrap().exp();
        let w1 = 0.7 * (-4.0 * d1 / n).exp() / table.log_partition(4.0).unwrap().exp();
        assert!((probs[0] - w0 / (w0 + w1)).abs() < 1e-12);
        assert!((probs[1] - w1 / (w0 + w1)).abs() < 1e-12);
    }

    #[test]
    fn swap_proposal_preserves_compatibility() {
        let clicks = ClickSet::new(vec![1, 3]).unwrap();
        let data = ClickData::new(6, vec![clicks.clone()]).unwrap();
        let config = base_config(1);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        for _ in 0..1_000_000 {
            update_r_tilde(&mut state, 0, &clicks, &config, &mut rng).unwrap();
            debug_assert!(compatible(&state.r_tilde[0], &clicks));
        }
        assert!(compatible(&state.r_tilde[0], &clicks));
        assert!(state.r_tilde[0].is_permutation());
    }

    #[test]
    fn two_part_proposal_preserves_compatibility() {
        let clicks = ClickSet::new(vec![0, 2, 4]).unwrap();
        let data = ClickData::new(8, vec![clicks.clone()]).unwrap();
        let mut config = base_config(1);
        config.augmentation = AugmentationProposal::TwoPartLeapShift;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        for _ in 0..200_000 {
            update_r_tilde(&mut state, 0, &clicks, &config, &mut rng).unwrap();
        }
        assert!(compatible(&state.r_tilde[0], &clicks));
        assert!(state.r_tilde[0].is_permutation());
    }

    #[test]
    fn degenerate_blocks_are_skipped() {
        // Two items, one clicked: both blocks have a single item, no move.
        let clicks = ClickSet::new(vec![0]).unwrap();
        let data = ClickData::new(2, vec![clicks.clone()]).unwrap();
        for augmentation in [AugmentationProposal::Swap, AugmentationProposal::TwoPartLeapShift] {
            let mut config = base_config(1);
            config.augmentation = augmentation;
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            let mut state = init_random(&data, &config, &mut rng).unwrap();
            let out = update_r_tilde(&mut state, 0, &clicks, &config, &mut rng).unwrap();
            assert!(out.skipped);
        }
    }

    /// Exact restricted Mallows conditional over the compatible set,
    /// enumerated brute force; both augmentation proposals must match it.
    fn augmentation_tv(augmentation: AugmentationProposal, seed: u64) -> f64 {
        use std::collections::HashMap;
        let n = 5;
        let clicks = ClickSet::new(vec![1, 3]).unwrap();
        let rho = Ranking::new(vec![2, 1, 4, 3, 5]).unwrap();
        let alpha = 2.0;

        // All 2! * 3! = 12 compatible rankings.
        let mut exact: HashMap<Vec<u32>, f64> = HashMap::new();
        let clicked = [1usize, 3];
        let unclicked = [0usize, 2, 4];
        let mut total = 0.0;
        let top_perms = [[1u32, 2], [2, 1]];
        let bottom_perms = [
            [3u32, 4, 5],
            [3, 5, 4],
            [4, 3, 5],
            [4, 5, 3],
            [5, 3, 4],
            [5, 4, 3],
        ];
        for top in &top_perms {
            for bottom in &bottom_perms {
                let mut ranks = vec![0u32; n];
                for (t, &i) in top.iter().zip(&clicked) {
                    ranks[i] = *t;
                }
                for (b, &i) in bottom.iter().zip(&unclicked) {
                    ranks[i] = *b;
                }
                let r = Ranking::new(ranks.clone()).unwrap();
                let d = footrule_distance(&r, &rho).unwrap() as f64;
                let w = (-alpha * d / n as f64).exp();
                exact.insert(ranks, w);
                total += w;
            }
        }
        for w in exact.values_mut() {
            *w /= total;
        }

        let mut config = base_config(1);
        config.augmentation = augmentation;
        config.leap_size = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unclicked_v: Vec<u32> = vec![0, 2, 4];
        let mut r = Ranking::new(vec![3, 1, 4, 2, 5]).unwrap();
        let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
        let steps = 600_000;
        for _ in 0..steps {
            r_tilde_kernel(
                &mut r,
                clicks.items(),
                &unclicked_v,
                alpha,
                &rho,
                &config,
                &mut rng,
            )
            .unwrap();
            *counts.entry(r.ranks().to_vec()).or_insert(0) += 1;
        }
        let mut tv = 0.0;
        for (ranks, &p) in &exact {
            let q = counts.get(ranks).copied().unwrap_or(0) as f64 / steps as f64;
            tv += (p - q).abs();
        }
        tv / 2.0
    }

    #[test]
    fn swap_chain_matches_exact_conditional() {
        let tv = augmentation_tv(AugmentationProposal::Swap, 13);
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn two_part_chain_matches_exact_conditional() {
        let tv = augmentation_tv(AugmentationProposal::TwoPartLeapShift, 14);
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn all_clicked_swaps_reach_every_permutation() {
        // With every item clicked the proposal space is all transpositions.
        let clicks = ClickSet::new(vec![0, 1, 2]).unwrap();
        let data = ClickData::new(3, vec![clicks.clone()]).unwrap();
        let config = base_config(1);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut state = init_random(&data, &config, &mut rng).unwrap();
        state.alphas[0] = 0.1;
        let mut seen = std::collections::HashSet::new();
        for _ in 0..5_000 {
            update_r_tilde(&mut state, 0, &clicks, &config, &mut rng).unwrap();
            seen.insert(state.r_tilde[0].ranks().to_vec());
        }
        assert_eq!(seen.len(), 6);
    }
}
