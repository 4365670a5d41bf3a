//! The Mallows normalizing constant `Z_n(alpha) = sum_r exp(-alpha/n d(r, rho))`.
//!
//! The footrule distance is right-invariant, so `Z_n` does not depend on the
//! consensus and is a function of the distance distribution alone. For small
//! `n` the distance histogram is enumerated exactly. For larger `n`, log Z is
//! tabulated on an alpha grid by thermodynamic integration,
//!
//! ```text
//! d log Z / d alpha = -E_alpha[d] / n,
//! ```
//!
//! where the mean distance under each grid scale comes from the direct
//! Mallows sampler (which needs no normalizer), warm-started up the grid,
//! smoothed to enforce monotonicity, and anchored at the exact uniform mean
//! `E_0[d] = (n^2 - 1) / 3`. A plain histogram of uniform permutations is
//! useless here: for moderate alpha the dominant distances sit many standard
//! deviations below the uniform mean and are simply never sampled.

use crate::error::{BmcdError, Result};
use crate::mallows::distance::footrule_on_ranks;
use crate::mallows::{max_leap_size, mh_step};
use crate::ranking::{for_each_permutation, Ranking};
use crate::rng::{domain, stream_rng};

/// Largest item count for which the exact histogram is enumerated.
pub const EXACT_N_MAX: usize = 8;

/// Default alpha grid: 0.05 ..= 20 in steps of 0.05.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=400).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
enum TableKind {
    Exact { histogram: Vec<u64> },
    MonteCarlo { samples: u64 },
}

/// Cached log partition values over an alpha grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    n: usize,
    kind: TableKind,
    alpha_grid: Vec<f64>,
    log_z: Vec<f64>,
}

/// Evaluation method tag, as persisted in the table header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMethod {
    Exact,
    MonteCarlo,
}

impl PartitionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionMethod::Exact => "exact",
            PartitionMethod::MonteCarlo => "monte-carlo",
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(BmcdError::invalid("alpha_grid", "grid is empty"));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(BmcdError::invalid("alpha_grid", "grid not strictly increasing"));
        }
    }
    if grid[0] < 0.0 {
        return Err(BmcdError::invalid("alpha_grid", "negative alpha in grid"));
    }
    Ok(())
}

/// Exact footrule distance histogram against the identity, over all `n!` permutations.
fn exact_histogram(n: usize) -> Vec<u64> {
    let identity: Vec<u32> = (1..=n as u32).collect();
    let mut hist = vec![0u64; (n * n) / 2 + 1];
    for_each_permutation(n, |p| {
        hist[footrule_on_ranks(p, &identity) as usize] += 1;
    });
    hist
}

/// Plain-sum log Z from exact counts; exact up to f64 rounding.
fn log_z_from_exact(hist: &[u64], n: usize, alpha: f64) -> f64 {
    let mut sum = 0.0f64;
    for (d, &count) in hist.iter().enumerate() {
        if count > 0 {
            sum += count as f64 * (-alpha * d as f64 / n as f64).exp();
        }
    }
    sum.ln()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Mean distance under each grid scale, estimated by one M-H chain walked
/// up the grid (each point warm-starts from the previous one). The step
/// budget is split evenly across grid points.
fn estimate_mean_distances(n: usize, grid: &[f64], total_steps: u64, seed: u64) -> Vec<f64> {
    let rho = Ranking::identity(n);
    let mut rng = stream_rng(seed, domain::PARTITION_MC, n as u64);
    let mut current = Ranking::random(n, &mut rng);
    let mut dist = footrule_on_ranks(current.ranks(), rho.ranks()) as i64;
    let leap = (n / 10).max(1).min(max_leap_size(n));
    let steps_per_point = (total_steps / grid.len() as u64).max(100);
    let burn = (steps_per_point / 5).max(50);

    let mut means = Vec::with_capacity(grid.len());
    for &alpha in grid {
        for _ in 0..burn {
            mh_step(&mut current, &mut dist, alpha, &rho, leap, &mut rng).expect("valid leap");
        }
        let mut sum = 0u64;
        for _ in 0..steps_per_point {
            mh_step(&mut current, &mut dist, alpha, &rho, leap, &mut rng).expect("valid leap");
            sum += dist as u64;
        }
        means.push(sum as f64 / steps_per_point as f64);
    }
    means
}

/// Pool adjacent violators: least-squares projection onto non-increasing
/// sequences. The mean distance is monotone in the scale; enforcing it
/// removes most of the per-point Monte-Carlo noise.
fn isotonic_non_increasing(values: &[f64]) -> Vec<f64> {
    let mut level: Vec<f64> = Vec::with_capacity(values.len());
    let mut weight: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        level.push(v);
        weight.push(1.0);
        while level.len() > 1 && level[level.len() - 2] < level[level.len() - 1] {
            let (l2, w2) = (level.pop().unwrap(), weight.pop().unwrap());
            let (l1, w1) = (level.pop().unwrap(), weight.pop().unwrap());
            level.push((l1 * w1 + l2 * w2) / (w1 + w2));
            weight.push(w1 + w2);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (&l, &w) in level.iter().zip(&weight) {
        for _ in 0..w as usize {
            out.push(l);
        }
    }
    out
}

/// Trapezoid integration of `-E[d]/n` from alpha = 0 (where
/// `log Z = log n!` and `E[d] = (n^2 - 1)/3` exactly) along the grid.
fn integrate_log_z(n: usize, grid: &[f64], mean_d: &[f64]) -> Vec<f64> {
    let mut log_z = Vec::with_capacity(grid.len());
    let mut acc = ln_factorial(n);
    let mut prev_alpha = 0.0;
    let mut prev_mean = (n as f64 * n as f64 - 1.0) / 3.0;
    for (&alpha, &mean) in grid.iter().zip(mean_d) {
        // Monotone through the anchor, and floored so log Z stays strictly
        // decreasing even when the chain sits at the consensus.
        let mean = mean.min(prev_mean).max(1e-6);
        acc -= (alpha - prev_alpha) * (prev_mean + mean) / (2.0 * n as f64);
        log_z.push(acc);
        prev_alpha = alpha;
        prev_mean = mean;
    }
    log_z
}

impl PartitionTable {
    /// Exact table (n <= 8) on the default grid.
    pub fn exact(n: usize) -> Result<Self> {
        Self::exact_with_grid(n, default_alpha_grid())
    }

    pub fn exact_with_grid(n: usize, alpha_grid: Vec<f64>) -> Result<Self> {
        if n == 0 || n > EXACT_N_MAX {
            return Err(BmcdError::invalid(
                "n",
                format!("exact enumeration supports 1..={EXACT_N_MAX}, got {n}"),
            ));
        }
        validate_grid(&alpha_grid)?;
        let histogram = exact_histogram(n);
        let log_z = alpha_grid
            .iter()
            .map(|&a| log_z_from_exact(&histogram, n, a))
            .collect();
        Ok(PartitionTable {
            n,
            kind: TableKind::Exact { histogram },
            alpha_grid,
            log_z,
        })
    }

    /// Monte-Carlo table by thermodynamic integration: `samples` is the
    /// total M-H step budget spread across the grid points. Queries
    /// interpolate log-linearly and refuse to extrapolate.
    pub fn monte_carlo(n: usize, alpha_grid: Vec<f64>, samples: u64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(BmcdError::invalid("n", "need at least 2 items"));
        }
        if samples == 0 {
            return Err(BmcdError::invalid("mc_samples", "need at least one sample"));
        }
        validate_grid(&alpha_grid)?;
        let raw = estimate_mean_distances(n, &alpha_grid, samples, seed);
        let smoothed = isotonic_non_increasing(&raw);
        let log_z = integrate_log_z(n, &alpha_grid, &smoothed);
        Ok(PartitionTable {
            n,
            kind: TableKind::MonteCarlo { samples },
            alpha_grid,
            log_z,
        })
    }

    /// Rebuild a table from persisted parts (CSV load path). Exact tables
    /// re-enumerate their histogram so queries stay exact after a round trip.
    pub fn from_parts(
        n: usize,
        method: PartitionMethod,
        mc_samples: u64,
        alpha_grid: Vec<f64>,
        log_z: Vec<f64>,
    ) -> Result<Self> {
        validate_grid(&alpha_grid)?;
        if alpha_grid.len() != log_z.len() {
            return Err(BmcdError::DimensionMismatch {
                expected: alpha_grid.len(),
                got: log_z.len(),
            });
        }
        let kind = match method {
            PartitionMethod::Exact => {
                if n == 0 || n > EXACT_N_MAX {
                    return Err(BmcdError::invalid("n", "exact table with n > 8"));
                }
                TableKind::Exact {
                    histogram: exact_histogram(n),
                }
            }
            PartitionMethod::MonteCarlo => TableKind::MonteCarlo {
                samples: mc_samples,
            },
        };
        Ok(PartitionTable {
            n,
            kind,
            alpha_grid,
            log_z,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn method(&self) -> PartitionMethod {
        match self.kind {
            TableKind::Exact { .. } => PartitionMethod::Exact,
            TableKind::MonteCarlo { .. } => PartitionMethod::MonteCarlo,
        }
    }

    pub fn mc_samples(&self) -> u64 {
        match self.kind {
            TableKind::Exact { .. } => 0,
            TableKind::MonteCarlo { samples } => samples,
        }
    }

    pub fn alpha_grid(&self) -> &[f64] {
        &self.alpha_grid
    }

    pub fn log_z_values(&self) -> &[f64] {
        &self.log_z
    }

    /// Inclusive alpha range answerable without extrapolation. Exact tables
    /// answer any nonnegative alpha.
    pub fn alpha_range(&self) -> (f64, f64) {
        match self.kind {
            TableKind::Exact { .. } => (0.0, f64::INFINITY),
            TableKind::MonteCarlo { .. } => (
                *self.alpha_grid.first().unwrap(),
                *self.alpha_grid.last().unwrap(),
            ),
        }
    }

    /// Clamp `alpha` into the answerable range; the flag reports whether
    /// clamping occurred.
    pub fn clamp_alpha(&self, alpha: f64) -> (f64, bool) {
        let (lo, hi) = self.alpha_range();
        if alpha < lo {
            (lo, true)
        } else if alpha > hi {
            (hi, true)
        } else {
            (alpha, false)
        }
    }

    /// `log Z_n(alpha)`. Exact mode evaluates the enumerated histogram
    /// directly; Monte-Carlo mode interpolates the grid.
    pub fn log_partition(&self, alpha: f64) -> Result<f64> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(BmcdError::Domain(format!("alpha must be >= 0, got {alpha}")));
        }
        match &self.kind {
            TableKind::Exact { histogram } => Ok(log_z_from_exact(histogram, self.n, alpha)),
            TableKind::MonteCarlo { .. } => {
                let grid = &self.alpha_grid;
                let lo = grid[0];
                let hi = *grid.last().unwrap();
                if alpha < lo || alpha > hi {
                    return Err(BmcdError::Extrapolation {
                        alpha,
                        min: lo,
                        max: hi,
                    });
                }
                let idx = match grid.binary_search_by(|g| g.partial_cmp(&alpha).unwrap()) {
                    Ok(i) => return Ok(self.log_z[i]),
                    Err(i) => i,
                };
                let (a0, a1) = (grid[idx - 1], grid[idx]);
                let (z0, z1) = (self.log_z[idx - 1], self.log_z[idx]);
                Ok(z0 + (z1 - z0) * (alpha - a0) / (a1 - a0))
            }
        }
    }
}
