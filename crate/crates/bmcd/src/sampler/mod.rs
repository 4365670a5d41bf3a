//! Metropolis-within-Gibbs inference for the clustered Mallows model on
//! click data. Each iteration updates the cluster weights (Gibbs), the
//! per-cluster consensus and scale (M-H), and per user the cluster
//! assignment (Gibbs) and the latent augmented ranking (M-H constrained to
//! keep clicked items top-ranked).

mod chain;
mod init;
mod kmeans;
mod updates;

pub use chain::{mwcd, run_chain, run_chain_from};
pub use init::{init_popularity, init_random};
pub use kmeans::{kmeans_select, KmeansCell};
pub use updates::{
    update_alpha, update_r_tilde, update_rho, update_tau, update_z, z_probabilities, AlphaOutcome,
    RTildeOutcome,
};

use crate::clicks::ClickData;
use crate::error::{BmcdError, Result};
use crate::mallows::footrule_distance;
use crate::ranking::Ranking;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Proposal used for the latent augmented rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentationProposal {
    /// Swap the ranks of two items drawn from the same (clicked or
    /// unclicked) block, uniformly over all within-block pairs.
    Swap,
    /// Leap-and-shift applied independently within the clicked and
    /// unclicked rank blocks.
    TwoPartLeapShift,
}

/// How the chain is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    Random,
    Popularity,
}

/// Which conditional updates run each iteration. All on by default;
/// freezing subsets isolates single kernels for stationarity checks and
/// reduces the sampler to the plain Mallows model on fully observed
/// rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateFlags {
    pub tau: bool,
    pub rho: bool,
    pub alpha: bool,
    pub z: bool,
    pub r_tilde: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        UpdateFlags {
            tau: true,
            rho: true,
            alpha: true,
            z: true,
            r_tilde: true,
        }
    }
}

/// Chain settings. Defaults follow the long-run schedule: 1e6 iterations,
/// half discarded as burn-in, thinning 100, scale parameters proposed every
/// 10 iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_clusters: usize,
    /// Rate of the exponential prior on each cluster scale.
    pub lambda: f64,
    /// Dirichlet concentration of the cluster-weight prior.
    pub psi: f64,
    pub iter_max: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// Propose each cluster scale only when `t % alpha_update == 0`.
    pub alpha_update: u64,
    /// Leap-and-shift window; 0 selects `max(1, n/20)`.
    pub leap_size: usize,
    /// Standard deviation of the log-normal random walk on the scales.
    pub alpha_proposal_sd: f64,
    pub augmentation: AugmentationProposal,
    pub init: InitStrategy,
    /// Initial scale for popularity initialization.
    pub alpha_init: f64,
    pub seed: u64,
    /// Keep every stored latent ranking (memory-heavy; small runs only).
    pub store_r_tilde: bool,
    /// Accumulate next-top-k rank counts for these horizons while sampling.
    pub tpp_horizons: Vec<usize>,
    /// Worker threads for the per-user phase; 0 or 1 runs sequentially.
    /// Results are identical either way: every user owns an RNG stream.
    pub threads: usize,
    pub updates: UpdateFlags,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_clusters: 1,
            lambda: 0.1,
            psi: 10.0,
            iter_max: 1_000_000,
            burn_in: 500_000,
            thinning: 100,
            alpha_update: 10,
            leap_size: 0,
            alpha_proposal_sd: 0.1,
            augmentation: AugmentationProposal::Swap,
            init: InitStrategy::Popularity,
            alpha_init: 3.0,
            seed: 0,
            store_r_tilde: false,
            tpp_horizons: Vec::new(),
            threads: 1,
            updates: UpdateFlags::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(BmcdError::invalid("n_clusters", "must be >= 1"));
        }
        if !(self.lambda > 0.0) {
            return Err(BmcdError::invalid("lambda", "must be > 0"));
        }
        if !(self.psi > 0.0) {
            return Err(BmcdError::invalid("psi", "must be > 0"));
        }
        if self.iter_max == 0 {
            return Err(BmcdError::invalid("iter_max", "must be >= 1"));
        }
        if self.burn_in > self.iter_max {
            return Err(BmcdError::invalid("burn_in", "must be <= iter_max"));
        }
        if self.thinning == 0 {
            return Err(BmcdError::invalid("thinning", "must be >= 1"));
        }
        if self.alpha_update == 0 {
            return Err(BmcdError::invalid("alpha_update", "must be >= 1"));
        }
        if !(self.alpha_proposal_sd >= 0.0) {
            return Err(BmcdError::invalid("alpha_proposal_sd", "must be >= 0"));
        }
        if !(self.alpha_init > 0.0) {
            return Err(BmcdError::invalid("alpha_init", "must be > 0"));
        }
        for &k in &self.tpp_horizons {
            if k == 0 {
                return Err(BmcdError::invalid("tpp_horizons", "horizons must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn effective_leap_size(&self, n: usize) -> usize {
        if self.leap_size == 0 {
            (n / 20).max(1).min(crate::mallows::max_leap_size(n))
        } else {
            self.leap_size
        }
    }
}

/// All latent variables of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub alphas: Vec<f64>,
    pub rhos: Vec<Ranking>,
    pub tau: Vec<f64>,
    /// Cluster label per user, `0..n_clusters`.
    pub z: Vec<u32>,
    pub r_tilde: Vec<Ranking>,
}

impl ChainState {
    /// Check every structural invariant against the data.
    pub fn validate(&self, data: &ClickData) -> Result<()> {
        let c = self.alphas.len();
        let n = data.n_items();
        if self.rhos.len() != c || self.tau.len() != c {
            return Err(BmcdError::invalid("state", "cluster field lengths differ"));
        }
        if self.z.len() != data.n_users() || self.r_tilde.len() != data.n_users() {
            return Err(BmcdError::invalid("state", "user field lengths differ"));
        }
        for &a in &self.alphas {
            if !(a > 0.0) {
                return Err(BmcdError::invalid("alphas", "must be > 0"));
            }
        }
        let tau_sum: f64 = self.tau.iter().sum();
        if (tau_sum - 1.0).abs() > 1e-12 || self.tau.iter().any(|&t| !(t > 0.0)) {
            return Err(BmcdError::invalid("tau", "not a strictly positive simplex"));
        }
        for rho in &self.rhos {
            if rho.len() != n || !rho.is_permutation() {
                return Err(BmcdError::invalid("rhos", "not a permutation of the items"));
            }
        }
        for (j, &zj) in self.z.iter().enumerate() {
            if zj as usize >= c {
                return Err(BmcdError::invalid("z", format!("user {j} label out of range")));
            }
        }
        for (j, r) in self.r_tilde.iter().enumerate() {
            if r.len() != n || !r.is_permutation() {
                return Err(BmcdError::invalid(
                    "r_tilde",
                    format!("user {j} ranking invalid"),
                ));
            }
            if !compatible(r, data.user(j)) {
                return Err(BmcdError::invalid(
                    "r_tilde",
                    format!("user {j} ranking not click-compatible"),
                ));
            }
        }
        Ok(())
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.alphas.len()];
        for &zj in &self.z {
            sizes[zj as usize] += 1;
        }
        sizes
    }

    /// Sum of footrule distances between each latent ranking and its
    /// cluster consensus.
    pub fn within_cluster_distance(&self) -> u64 {
        self.r_tilde
            .iter()
            .zip(&self.z)
            .map(|(r, &zj)| footrule_distance(r, &self.rhos[zj as usize]).unwrap())
            .sum()
    }
}

/// True when every clicked item ranks above every unclicked item.
pub fn compatible(r: &Ranking, clicks: &crate::clicks::ClickSet) -> bool {
    let c = clicks.count() as u32;
    clicks.items().iter().all(|&i| r.rank_of(i as usize) <= c)
}

/// Integer next-top-k rank counts accumulated over stored samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TppCounts {
    pub k: usize,
    /// Row-major `n_users x n_items`: number of stored samples placing the
    /// item within the user's next top-k window.
    pub counts: Vec<u64>,
    pub n_samples: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AcceptanceStats {
    pub rho_proposed: u64,
    pub rho_accepted: u64,
    pub alpha_proposed: u64,
    pub alpha_accepted: u64,
    /// Scale proposals pushed back inside the partition-table grid.
    pub alpha_clamped: u64,
    pub r_tilde_proposed: u64,
    pub r_tilde_accepted: u64,
    /// Users whose augmentation step had no legal proposal.
    pub r_tilde_skipped: u64,
}

impl AcceptanceStats {
    fn rate(accepted: u64, proposed: u64) -> f64 {
        if proposed == 0 {
            f64::NAN
        } else {
            accepted as f64 / proposed as f64
        }
    }

    pub fn rho_rate(&self) -> f64 {
        Self::rate(self.rho_accepted, self.rho_proposed)
    }

    pub fn alpha_rate(&self) -> f64 {
        Self::rate(self.alpha_accepted, self.alpha_proposed)
    }

    pub fn r_tilde_rate(&self) -> f64 {
        Self::rate(self.r_tilde_accepted, self.r_tilde_proposed)
    }
}

/// Thinned post-burn-in draws and chain diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub iterations: Vec<u64>,
    /// Per stored sample, per cluster.
    pub alphas: Vec<Vec<f64>>,
    pub taus: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<Vec<usize>>,
    pub rhos: Vec<Vec<Ranking>>,
    /// Within-cluster distance sum per stored sample.
    pub wcd: Vec<u64>,
    /// Full latent rankings per stored sample when requested.
    pub r_tilde: Option<Vec<Vec<Ranking>>>,
    pub tpp: Vec<TppCounts>,
    pub acceptance: AcceptanceStats,
    pub warnings: Vec<String>,
}

impl PosteriorSamples {
    pub fn n_samples(&self) -> usize {
        self.iterations.len()
    }

    pub fn tpp_counts_for(&self, k: usize) -> Option<&TppCounts> {
        self.tpp.iter().find(|t| t.k == k)
    }

    /// Posterior mean of each cluster scale.
    pub fn alpha_means(&self) -> Vec<f64> {
        let s = self.n_samples();
        let mut means = vec![0.0; self.n_clusters];
        for draw in &self.alphas {
            for (m, &a) in means.iter_mut().zip(draw) {
                *m += a;
            }
        }
        for m in &mut means {
            *m /= s as f64;
        }
        means
    }

    /// Undo label switching for per-cluster reporting: match every stored
    /// draw's consensuses to the most frequently visited consensus set by
    /// minimal footrule distance, permuting the per-cluster fields
    /// consistently. Recommendation quantities never look at labels and
    /// are unaffected.
    pub fn relabel_clusters(&mut self) {
        let c = self.n_clusters;
        if c <= 1 || self.n_samples() == 0 {
            return;
        }
        // Reference set: the C most frequent distinct consensus draws.
        let mut freq: std::collections::HashMap<&Ranking, u64> = Default::default();
        for draw in &self.rhos {
            for rho in draw {
                *freq.entry(rho).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&Ranking, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.ranks().cmp(b.0.ranks())));
        let reference: Vec<Ranking> = ranked.into_iter().take(c).map(|(r, _)| r.clone()).collect();
        if reference.len() < c {
            return; // fewer distinct draws than clusters; nothing to align
        }

        for s in 0..self.n_samples() {
            // Greedy minimal-distance assignment of draw clusters to
            // reference slots; cluster counts are small.
            let mut pairs: Vec<(u64, usize, usize)> = Vec::with_capacity(c * c);
            for (slot, reference_rho) in reference.iter().enumerate() {
                for (cluster, rho) in self.rhos[s].iter().enumerate() {
                    pairs.push((
                        footrule_distance(rho, reference_rho).unwrap(),
                        slot,
                        cluster,
                    ));
                }
            }
            pairs.sort_unstable();
            let mut slot_of = vec![usize::MAX; c];
            let mut slot_used = vec![false; c];
            let mut cluster_used = vec![false; c];
            for (_, slot, cluster) in pairs {
                if !slot_used[slot] && !cluster_used[cluster] {
                    slot_of[cluster] = slot;
                    slot_used[slot] = true;
                    cluster_used[cluster] = true;
                }
            }
            let permute_f64 = |v: &[f64]| {
                let mut out = vec![0.0; c];
                for (cluster, &x) in v.iter().enumerate() {
                    out[slot_of[cluster]] = x;
                }
                out
            };
            self.alphas[s] = permute_f64(&self.alphas[s]);
            self.taus[s] = permute_f64(&self.taus[s]);
            let mut sizes = vec![0usize; c];
            for (cluster, &n) in self.cluster_sizes[s].iter().enumerate() {
                sizes[slot_of[cluster]] = n;
            }
            self.cluster_sizes[s] = sizes;
            let mut rhos = self.rhos[s].clone();
            for (cluster, rho) in self.rhos[s].iter().enumerate() {
                rhos[slot_of[cluster]] = rho.clone();
            }
            self.rhos[s] = rhos;
        }
    }
}

/// Dirichlet draw by normalized Gamma variates.
pub(crate) fn sample_dirichlet(params: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    if params.len() == 1 {
        return vec![1.0];
    }
    let mut out: Vec<f64> = params
        .iter()
        .map(|&a| {
            let g = Gamma::new(a, 1.0).expect("positive Dirichlet parameter");
            let x: f64 = g.sample(rng);
            // Guard against underflow at tiny concentrations.
            x.max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}
