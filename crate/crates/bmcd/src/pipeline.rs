//! Pieces shared by the CLI stages (and the C bindings): partition-table
//! construction and config-to-chain wiring.

use crate::config::RunConfig;
use crate::error::{BmcdError, Result};
use crate::mallows::{PartitionTable, EXACT_N_MAX};
use crate::sampler::ChainConfig;

/// Build the partition table a chain over `n` items needs: exact when
/// feasible, Monte Carlo otherwise (or as forced by `method`).
pub fn build_partition_table(
    n: usize,
    method: &str,
    grid: Vec<f64>,
    mc_samples: u64,
    seed: u64,
) -> Result<PartitionTable> {
    match method {
        "exact" => PartitionTable::exact_with_grid(n, grid),
        "monte-carlo" => PartitionTable::monte_carlo(n, grid, mc_samples, seed),
        "auto" => {
            if n <= EXACT_N_MAX {
                PartitionTable::exact_with_grid(n, grid)
            } else {
                PartitionTable::monte_carlo(n, grid, mc_samples, seed)
            }
        }
        other => Err(BmcdError::invalid(
            "partition.method",
            format!("unknown method `{other}`"),
        )),
    }
}

/// Resolve the table for a run config: load from `partition.load` when set,
/// otherwise build one.
pub fn partition_table_for(config: &RunConfig, n: usize) -> Result<PartitionTable> {
    if let Some(path) = &config.partition_load {
        let table = crate::io::read_partition(std::path::Path::new(path))?;
        if table.n() != n {
            return Err(BmcdError::invalid(
                "partition.load",
                format!("table is for n = {}, data has n = {n}", table.n()),
            ));
        }
        return Ok(table);
    }
    build_partition_table(
        n,
        &config.partition_method,
        config.partition_grid(),
        config.partition_mc_samples,
        config.seed,
    )
}

/// The chain configuration implied by a run config, accumulating TPP
/// counts at the evaluation horizon.
pub fn chain_config_for(config: &RunConfig) -> ChainConfig {
    ChainConfig {
        seed: config.seed,
        threads: config.threads,
        tpp_horizons: vec![config.k],
        ..config.chain.clone()
    }
}
