//! The Mallows model over permutations: probability decays exponentially in
//! the footrule distance from a consensus ranking.

mod distance;
mod leap_shift;
mod partition;

pub use distance::{footrule_distance, max_footrule_distance};
pub use leap_shift::{leap_and_shift, max_leap_size, LeapShift};
pub use partition::{default_alpha_grid, PartitionMethod, PartitionTable, EXACT_N_MAX};


use crate::error::{BmcdError, Result};
use crate::ranking::Ranking;
use crate::rng::{domain, stream_rng};
use rand::{Rng, RngExt};

/// Scale and consensus of a single Mallows distribution.
#[derive(Debug, Clone)]
pub struct MallowsParams {
    pub alpha: f64,
    pub rho: Ranking,
}

impl MallowsParams {
    pub fn new(alpha: f64, rho: Ranking) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(BmcdError::invalid("alpha", "must be positive and finite"));
        }
        Ok(MallowsParams { alpha, rho })
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }
}

/// Log probability `-(alpha/n) d(r, rho) - log Z_n(alpha)`.
pub fn mallows_log_pmf(r: &Ranking, params: &MallowsParams, table: &PartitionTable) -> Result<f64> {
    if r.len() != params.n() {
        return Err(BmcdError::DimensionMismatch {
            expected: params.n(),
            got: r.len(),
        });
    }
    let d = footrule_distance(r, &params.rho)? as f64;
    Ok(-params.alpha * d / params.n() as f64 - table.log_partition(params.alpha)?)
}

/// Default burn-in for the direct sampler.
pub fn default_mallows_burn_in(n: usize) -> usize {
    1000 * n
}

/// Draw `count` approximately independent rankings from a Mallows
/// distribution via a thinned Metropolis-Hastings chain with leap-and-shift
/// proposals (thinning 10n, leap size max(1, n/20)).
///
/// The normalizing constant cancels in the acceptance ratio, so no partition
/// table is needed and `alpha = 0` (the uniform distribution) is allowed.
pub fn sample_mallows(
    alpha: f64,
    rho: &Ranking,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<Ranking>> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(BmcdError::invalid("alpha", "must be >= 0"));
    }
    if count == 0 {
        return Err(BmcdError::invalid("count", "must be >= 1"));
    }
    let n = rho.len();
    if n == 1 {
        return Ok(vec![rho.clone(); count]);
    }
    let mut rng = stream_rng(seed, domain::SIMULATE, 0);
    let leap = (n / 20).max(1).min(max_leap_size(n));
    let thin = 10 * n;

    let mut current = Ranking::random(n, &mut rng);
    let mut dist = footrule_distance(&current, rho)? as i64;
    let mut out = Vec::with_capacity(count);
    let total = burn_in + thin * count;
    for step in 0..total {
        mh_step(&mut current, &mut dist, alpha, rho, leap, &mut rng)?;
        if step >= burn_in && (step - burn_in + 1) % thin == 0 {
            out.push(current.clone());
        }
    }
    while out.len() < count {
        for _ in 0..thin {
            mh_step(&mut current, &mut dist, alpha, rho, leap, &mut rng)?;
        }
        out.push(current.clone());
    }
    out.truncate(count);
    Ok(out)
}

pub(crate) fn mh_step(
    current: &mut Ranking,
    dist: &mut i64,
    alpha: f64,
    rho: &Ranking,
    leap: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    // Lazy step: with leap size 1 every move is an adjacent transposition,
    // so permutation parity would alternate deterministically and the chain
    // would be periodic at alpha = 0.
    if rng.random::<f64>() < 0.1 {
        return Ok(());
    }
    let n = rho.len() as f64;
    let mv = leap_and_shift(current, leap, rng)?;
    // Distance delta over moved items only.
    let mut delta = 0i64;
    for &i in &mv.moved_items {
        let i = i as usize;
        let target = rho.rank_of(i) as i64;
        delta += (mv.proposal.rank_of(i) as i64 - target).abs()
            - (current.rank_of(i) as i64 - target).abs();
    }
    let log_accept = (mv.log_backward - mv.log_forward) - alpha * delta as f64 / n;
    if log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept {
        *current = mv.proposal;
        *dist += delta;
    }
    Ok(())
}
