//! The full chain: iteration loop, thinned storage, diagnostics.
//!
//! Every actor (the weight draw, each cluster, each user) owns a ChaCha
//! stream derived from the master seed, so output is bit-identical whether
//! the per-user phase runs sequentially or on a thread pool.

use crate::clicks::ClickData;
use crate::error::{BmcdError, Result};
use crate::mallows::PartitionTable;
use crate::ranking::Ranking;
use crate::rng::{domain, stream_rng};
use crate::sampler::updates::{
    alpha_kernel, cluster_distance_sum, r_tilde_kernel, rho_kernel, z_kernel,
};
use crate::sampler::{
    compatible, init_popularity, init_random, sample_dirichlet, AcceptanceStats, ChainConfig,
    ChainState, InitStrategy, PosteriorSamples, TppCounts,
};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Initialize per `config.init` and run the chain.
pub fn run_chain(
    data: &ClickData,
    config: &ChainConfig,
    table: &PartitionTable,
) -> Result<PosteriorSamples> {
    let mut rng = stream_rng(config.seed, domain::INIT, 0);
    let state = match config.init {
        InitStrategy::Random => init_random(data, config, &mut rng)?,
        InitStrategy::Popularity => init_popularity(data, config, &mut rng)?,
    };
    run_chain_from(data, config, table, state)
}

/// Run the chain from an explicit initial state.
pub fn run_chain_from(
    data: &ClickData,
    config: &ChainConfig,
    table: &PartitionTable,
    mut state: ChainState,
) -> Result<PosteriorSamples> {
    config.validate()?;
    if data.n_items() < 2 {
        return Err(BmcdError::invalid("data", "need at least 2 items"));
    }
    if table.n() != data.n_items() {
        return Err(BmcdError::DimensionMismatch {
            expected: data.n_items(),
            got: table.n(),
        });
    }
    state.validate(data)?;
    let n_users = data.n_users();
    let n_items = data.n_items();
    let n_clusters = config.n_clusters;
    if state.alphas.len() != n_clusters {
        return Err(BmcdError::invalid(
            "n_clusters",
            "initial state disagrees with config",
        ));
    }
    let mut warnings = Vec::new();

    // Initial scales must be answerable by the table.
    for a in &mut state.alphas {
        let (clamped, was) = table.clamp_alpha(*a);
        if was {
            warnings.push(format!(
                "initial alpha {a} clamped to {clamped} (table range)"
            ));
            *a = clamped;
        }
    }

    let unclicked: Vec<Vec<u32>> = data
        .users()
        .iter()
        .map(|u| (0..n_items as u32).filter(|&i| !u.contains(i)).collect())
        .collect();

    let mut tau_rng = stream_rng(config.seed, domain::TAU, 0);
    let mut cluster_rngs: Vec<ChaCha8Rng> = (0..n_clusters)
        .map(|c| stream_rng(config.seed, domain::CLUSTER, c as u64))
        .collect();
    let mut user_rngs: Vec<ChaCha8Rng> = (0..n_users)
        .map(|j| stream_rng(config.seed, domain::USER, j as u64))
        .collect();

    let mut log_z: Vec<f64> = state
        .alphas
        .iter()
        .map(|&a| table.log_partition(a))
        .collect::<Result<_>>()?;

    let n_stored_cap = if config.iter_max > config.burn_in {
        ((config.iter_max - config.burn_in) / config.thinning + 1) as usize
    } else {
        0
    };
    let mut out = PosteriorSamples {
        n_users,
        n_items,
        n_clusters,
        iterations: Vec::with_capacity(n_stored_cap),
        alphas: Vec::with_capacity(n_stored_cap),
        taus: Vec::with_capacity(n_stored_cap),
        cluster_sizes: Vec::with_capacity(n_stored_cap),
        rhos: Vec::with_capacity(n_stored_cap),
        wcd: Vec::with_capacity(n_stored_cap),
        r_tilde: if config.store_r_tilde {
            Some(Vec::with_capacity(n_stored_cap))
        } else {
            None
        },
        tpp: config
            .tpp_horizons
            .iter()
            .map(|&k| TppCounts {
                k,
                counts: vec![0u64; n_users * n_items],
                n_samples: 0,
            })
            .collect(),
        acceptance: AcceptanceStats::default(),
        warnings: Vec::new(),
    };

    let leap = config.effective_leap_size(n_items);
    let parallel = config.threads > 1 && n_users > 1;

    for t in 1..=config.iter_max {
        if config.updates.tau {
            let sizes = state.cluster_sizes();
            let params: Vec<f64> = sizes.iter().map(|&s| config.psi + s as f64).collect();
            state.tau = sample_dirichlet(&params, &mut tau_rng);
        }

        let update_alpha_now = config.updates.alpha && t % config.alpha_update == 0;
        if config.updates.rho || update_alpha_now {
            let mut members: Vec<Vec<u32>> = vec![Vec::new(); n_clusters];
            for (j, &zj) in state.z.iter().enumerate() {
                members[zj as usize].push(j as u32);
            }
            for c in 0..n_clusters {
                let rng = &mut cluster_rngs[c];
                if config.updates.rho {
                    out.acceptance.rho_proposed += 1;
                    if rho_kernel(
                        &mut state.rhos[c],
                        state.alphas[c],
                        &members[c],
                        &state.r_tilde,
                        leap,
                        rng,
                    )? {
                        out.acceptance.rho_accepted += 1;
                    }
                }
                if update_alpha_now {
                    let (sum_d, n_c) = cluster_distance_sum(&state, c);
                    out.acceptance.alpha_proposed += 1;
                    let outcome =
                        alpha_kernel(&mut state.alphas[c], sum_d, n_c, config, table, rng)?;
                    if outcome.accepted {
                        out.acceptance.alpha_accepted += 1;
                        log_z[c] = table.log_partition(state.alphas[c])?;
                    }
                    if outcome.clamped {
                        out.acceptance.alpha_clamped += 1;
                    }
                }
            }
        }

        if config.updates.z || config.updates.r_tilde {
            let alphas = &state.alphas;
            let rhos = &state.rhos;
            let tau = &state.tau;
            let log_z_ref = &log_z;
            let flags = config.updates;
            let kernel = |j: usize,
                          zj: &mut u32,
                          rj: &mut Ranking,
                          rng: &mut ChaCha8Rng|
             -> Result<(bool, bool, bool)> {
                if flags.z {
                    z_kernel(zj, rj, alphas, rhos, tau, log_z_ref, rng);
                }
                if flags.r_tilde {
                    let o = r_tilde_kernel(
                        rj,
                        data.user(j).items(),
                        &unclicked[j],
                        alphas[*zj as usize],
                        &rhos[*zj as usize],
                        config,
                        rng,
                    )?;
                    Ok((!o.skipped, o.accepted, o.skipped))
                } else {
                    Ok((false, false, false))
                }
            };

            if parallel {
                let outcomes: Vec<(bool, bool, bool)> = state
                    .z
                    .par_iter_mut()
                    .zip(state.r_tilde.par_iter_mut())
                    .zip(user_rngs.par_iter_mut())
                    .enumerate()
                    .map(|(j, ((zj, rj), rng))| kernel(j, zj, rj, rng))
                    .collect::<Result<_>>()?;
                for (proposed, accepted, skipped) in outcomes {
                    out.acceptance.r_tilde_proposed += proposed as u64;
                    out.acceptance.r_tilde_accepted += accepted as u64;
                    out.acceptance.r_tilde_skipped += skipped as u64;
                }
            } else {
                for j in 0..n_users {
                    let (proposed, accepted, skipped) =
                        kernel(j, &mut state.z[j], &mut state.r_tilde[j], &mut user_rngs[j])?;
                    out.acceptance.r_tilde_proposed += proposed as u64;
                    out.acceptance.r_tilde_accepted += accepted as u64;
                    out.acceptance.r_tilde_skipped += skipped as u64;
                }
            }
        }

        if cfg!(debug_assertions) {
            for (j, r) in state.r_tilde.iter().enumerate() {
                debug_assert!(compatible(r, data.user(j)), "user {j} incompatible at t={t}");
            }
        }

        if t > config.burn_in && (t - config.burn_in) % config.thinning == 0 {
            store_sample(&mut out, &state, data, t);
        }
    }

    if out.iterations.is_empty() {
        warnings.push(format!(
            "no samples stored: iter_max {} <= burn_in {} + thinning {}",
            config.iter_max, config.burn_in, config.thinning
        ));
    }
    out.warnings = warnings;
    Ok(out)
}

fn store_sample(out: &mut PosteriorSamples, state: &ChainState, data: &ClickData, t: u64) {
    out.iterations.push(t);
    out.alphas.push(state.alphas.clone());
    out.taus.push(state.tau.clone());
    out.cluster_sizes.push(state.cluster_sizes());
    out.rhos.push(state.rhos.clone());
    out.wcd.push(state.within_cluster_distance());
    if let Some(r) = out.r_tilde.as_mut() {
        r.push(state.r_tilde.clone());
    }
    let n_items = out.n_items;
    for tpp in &mut out.tpp {
        tpp.n_samples += 1;
        for (j, r) in state.r_tilde.iter().enumerate() {
            let threshold = (data.user(j).count() + tpp.k).min(n_items) as u32;
            let row = &mut tpp.counts[j * n_items..(j + 1) * n_items];
            for (i, cell) in row.iter_mut().enumerate() {
                *cell += (r.rank_of(i) <= threshold) as u64;
            }
        }
    }
}

/// Posterior mean of the summed within-cluster footrule distances; the
/// model-selection statistic minimized over candidate cluster counts.
pub fn mwcd(samples: &PosteriorSamples) -> Result<f64> {
    if samples.wcd.is_empty() {
        return Err(BmcdError::EmptyInput("no stored samples".into()));
    }
    Ok(samples.wcd.iter().map(|&d| d as f64).sum::<f64>() / samples.wcd.len() as f64)
}
