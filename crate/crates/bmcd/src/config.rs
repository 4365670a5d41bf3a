//! Flat `key = value` run configuration. Unknown keys are rejected so
//! typos fail loudly; every error names the offending field.

use crate::cf::{CfConfig, CvGrid};
use crate::error::{BmcdError, Result};
use crate::sampler::{AugmentationProposal, ChainConfig, InitStrategy};
use std::collections::BTreeMap;

/// Everything a pipeline run needs, with usable defaults for small
/// experiments. Parsed from the flat config file; a handful of fields can
/// be overridden by CLI flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    /// Simulation design.
    pub sim_users: usize,
    pub sim_items: usize,
    pub sim_clusters: usize,
    pub sim_alpha: f64,
    pub sim_lambda_clicks: f64,
    /// Chain settings (cluster count lives in `chain.clusters`).
    pub chain: ChainConfig,
    /// Partition table: "auto" picks exact for n <= 8, else Monte Carlo.
    pub partition_method: String,
    pub partition_mc_samples: u64,
    pub partition_alpha_min: f64,
    pub partition_alpha_max: f64,
    pub partition_alpha_step: f64,
    /// Optional pre-computed table to load instead of building one.
    pub partition_load: Option<String>,
    /// Baseline settings.
    pub cf: CfConfig,
    /// Independent ALS starts for the final fit; best training loss wins.
    pub cf_restarts: usize,
    pub cf_grid: CvGrid,
    pub cf_cv_folds: usize,
    pub cf_cv_holdout: usize,
    /// Evaluation settings.
    pub k: usize,
    pub cutoffs: Vec<f64>,
    pub bin_width: f64,
    pub popular_cutoff: usize,
    /// Short-chain settings for MWCD cluster-count selection.
    pub select_iterations: u64,
    pub select_burn_in: u64,
    pub select_thinning: u64,
    pub select_restarts: usize,
    /// Holdout split settings (cross-validation and offline protocols).
    pub split_k_removed: usize,
    pub split_min_retained: usize,
    /// The canonical text this config was parsed from (hashed into
    /// manifests).
    pub source_text: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            sim_users: 300,
            sim_items: 20,
            sim_clusters: 3,
            sim_alpha: 3.0,
            sim_lambda_clicks: 3.0,
            chain: ChainConfig::default(),
            partition_method: "auto".into(),
            partition_mc_samples: 100_000_000,
            partition_alpha_min: 0.05,
            partition_alpha_max: 20.0,
            partition_alpha_step: 0.05,
            partition_load: None,
            cf: CfConfig::default(),
            cf_restarts: 3,
            cf_grid: CvGrid::default(),
            cf_cv_folds: 10,
            cf_cv_holdout: 2,
            k: 5,
            cutoffs: vec![0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40],
            bin_width: 0.01,
            popular_cutoff: 20,
            select_iterations: 20_000,
            select_burn_in: 10_000,
            select_thinning: 10,
            select_restarts: 10,
            split_k_removed: 10,
            split_min_retained: 3,
            source_text: String::new(),
        }
    }
}

/// Map internal struct field names to config-file keys in error messages.
fn rename_field(err: BmcdError, map: &[(&str, &str)]) -> BmcdError {
    if let BmcdError::InvalidArgument { name, message } = &err {
        for (from, to) in map {
            if name == from {
                return BmcdError::invalid(to, message.clone());
            }
        }
    }
    err
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            BmcdError::invalid(
                "config",
                format!("line {}: expected `key = value`, got `{line}`", no + 1),
            )
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn take<T: std::str::FromStr>(&mut self, key: &str, into: &mut T) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            *into = v
                .parse()
                .map_err(|_| BmcdError::invalid(key, format!("cannot parse `{v}`")))?;
        }
        Ok(())
    }

    fn take_bool(&mut self, key: &str, into: &mut bool) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            *into = match v.as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                _ => return Err(BmcdError::invalid(key, format!("expected a boolean, got `{v}`"))),
            };
        }
        Ok(())
    }

    fn take_list<T: std::str::FromStr>(&mut self, key: &str, into: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            let parsed: Result<Vec<T>> = v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| BmcdError::invalid(key, format!("cannot parse `{p}`")))
                })
                .collect();
            *into = parsed?;
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut f = Fields(parse_pairs(text)?);
        let mut c = RunConfig {
            source_text: text.to_string(),
            ..RunConfig::default()
        };

        f.take("seed", &mut c.seed)?;
        f.take("threads", &mut c.threads)?;

        f.take("sim.users", &mut c.sim_users)?;
        f.take("sim.items", &mut c.sim_items)?;
        f.take("sim.clusters", &mut c.sim_clusters)?;
        f.take("sim.alpha", &mut c.sim_alpha)?;
        f.take("sim.lambda_clicks", &mut c.sim_lambda_clicks)?;

        f.take("chain.clusters", &mut c.chain.n_clusters)?;
        f.take("chain.lambda", &mut c.chain.lambda)?;
        f.take("chain.psi", &mut c.chain.psi)?;
        f.take("chain.iterations", &mut c.chain.iter_max)?;
        f.take("chain.burn_in", &mut c.chain.burn_in)?;
        f.take("chain.thinning", &mut c.chain.thinning)?;
        f.take("chain.alpha_update", &mut c.chain.alpha_update)?;
        f.take("chain.leap_size", &mut c.chain.leap_size)?;
        f.take("chain.alpha_sd", &mut c.chain.alpha_proposal_sd)?;
        f.take("chain.alpha_init", &mut c.chain.alpha_init)?;
        f.take_bool("chain.store_r_tilde", &mut c.chain.store_r_tilde)?;
        if let Some(v) = f.0.remove("chain.augmentation") {
            c.chain.augmentation = match v.as_str() {
                "swap" => AugmentationProposal::Swap,
                "two-part-leap-shift" => AugmentationProposal::TwoPartLeapShift,
                _ => {
                    return Err(BmcdError::invalid(
                        "chain.augmentation",
                        format!("expected `swap` or `two-part-leap-shift`, got `{v}`"),
                    ))
                }
            };
        }
        if let Some(v) = f.0.remove("chain.init") {
            c.chain.init = match v.as_str() {
                "random" => InitStrategy::Random,
                "popularity" => InitStrategy::Popularity,
                _ => {
                    return Err(BmcdError::invalid(
                        "chain.init",
                        format!("expected `random` or `popularity`, got `{v}`"),
                    ))
                }
            };
        }

        if let Some(v) = f.0.remove("partition.method") {
            match v.as_str() {
                "auto" | "exact" | "monte-carlo" => c.partition_method = v,
                _ => {
                    return Err(BmcdError::invalid(
                        "partition.method",
                        format!("expected `auto`, `exact` or `monte-carlo`, got `{v}`"),
                    ))
                }
            }
        }
        f.take("partition.mc_samples", &mut c.partition_mc_samples)?;
        f.take("partition.alpha_min", &mut c.partition_alpha_min)?;
        f.take("partition.alpha_max", &mut c.partition_alpha_max)?;
        f.take("partition.alpha_step", &mut c.partition_alpha_step)?;
        if let Some(v) = f.0.remove("partition.load") {
            c.partition_load = Some(v);
        }

        f.take("cf.beta", &mut c.cf.beta)?;
        f.take("cf.theta", &mut c.cf.theta)?;
        f.take("cf.factors", &mut c.cf.l)?;
        f.take("cf.sweeps", &mut c.cf.sweeps)?;
        f.take("cf.init_scale", &mut c.cf.init_scale)?;
        f.take("cf.restarts", &mut c.cf_restarts)?;
        f.take_list("cf.grid.betas", &mut c.cf_grid.betas)?;
        f.take_list("cf.grid.thetas", &mut c.cf_grid.thetas)?;
        f.take_list("cf.grid.factors", &mut c.cf_grid.ls)?;
        f.take("cf.cv_folds", &mut c.cf_cv_folds)?;
        f.take("cf.cv_holdout", &mut c.cf_cv_holdout)?;

        f.take("eval.k", &mut c.k)?;
        f.take_list("eval.cutoffs", &mut c.cutoffs)?;
        f.take("eval.bin_width", &mut c.bin_width)?;
        f.take("eval.popular_cutoff", &mut c.popular_cutoff)?;

        f.take("select.iterations", &mut c.select_iterations)?;
        f.take("select.burn_in", &mut c.select_burn_in)?;
        f.take("select.thinning", &mut c.select_thinning)?;
        f.take("select.restarts", &mut c.select_restarts)?;

        f.take("split.k_removed", &mut c.split_k_removed)?;
        f.take("split.min_retained", &mut c.split_min_retained)?;

        if let Some(unknown) = f.0.keys().next() {
            return Err(BmcdError::invalid(unknown, "unknown configuration key"));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        RunConfig::from_text(&crate::io::read_text(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sim_users == 0 {
            return Err(BmcdError::invalid("sim.users", "must be >= 1"));
        }
        if self.sim_items == 0 {
            return Err(BmcdError::invalid("sim.items", "must be >= 1"));
        }
        if self.sim_clusters == 0 {
            return Err(BmcdError::invalid("sim.clusters", "must be >= 1"));
        }
        if !(self.sim_alpha >= 0.0) {
            return Err(BmcdError::invalid("sim.alpha", "must be >= 0"));
        }
        if !(self.sim_lambda_clicks > 0.0) {
            return Err(BmcdError::invalid("sim.lambda_clicks", "must be > 0"));
        }
        self.chain.validate().map_err(|e| rename_field(
            e,
            &[
                ("n_clusters", "chain.clusters"),
                ("lambda", "chain.lambda"),
                ("psi", "chain.psi"),
                ("iter_max", "chain.iterations"),
                ("burn_in", "chain.burn_in"),
                ("thinning", "chain.thinning"),
                ("alpha_update", "chain.alpha_update"),
                ("alpha_proposal_sd", "chain.alpha_sd"),
                ("alpha_init", "chain.alpha_init"),
            ],
        ))?;
        if self.partition_mc_samples == 0 {
            return Err(BmcdError::invalid("partition.mc_samples", "must be >= 1"));
        }
        if !(self.partition_alpha_min > 0.0)
            || !(self.partition_alpha_max > self.partition_alpha_min)
            || !(self.partition_alpha_step > 0.0)
        {
            return Err(BmcdError::invalid(
                "partition.alpha_min",
                "need 0 < alpha_min < alpha_max and alpha_step > 0",
            ));
        }
        self.cf.validate().map_err(|e| rename_field(
            e,
            &[
                ("beta", "cf.beta"),
                ("theta", "cf.theta"),
                ("l", "cf.factors"),
                ("sweeps", "cf.sweeps"),
                ("init_scale", "cf.init_scale"),
            ],
        ))?;
        if self.cf_restarts == 0 {
            return Err(BmcdError::invalid("cf.restarts", "must be >= 1"));
        }
        if self.k == 0 {
            return Err(BmcdError::invalid("eval.k", "must be >= 1"));
        }
        if !(self.bin_width > 0.0 && self.bin_width <= 1.0) {
            return Err(BmcdError::invalid("eval.bin_width", "must be in (0, 1]"));
        }
        for &t in &self.cutoffs {
            if !(0.0..=1.0).contains(&t) {
                return Err(BmcdError::invalid("eval.cutoffs", "thresholds must be in [0, 1]"));
            }
        }
        if self.select_iterations == 0 || self.select_thinning == 0 {
            return Err(BmcdError::invalid("select.iterations", "must be >= 1"));
        }
        if self.select_burn_in > self.select_iterations {
            return Err(BmcdError::invalid(
                "select.burn_in",
                "must be <= select.iterations",
            ));
        }
        if self.split_k_removed == 0 || self.split_min_retained == 0 {
            return Err(BmcdError::invalid("split.k_removed", "must be >= 1"));
        }
        Ok(())
    }

    /// The alpha grid implied by the partition settings.
    pub fn partition_grid(&self) -> Vec<f64> {
        let mut grid = Vec::new();
        let mut a = self.partition_alpha_min;
        while a <= self.partition_alpha_max + 1e-12 {
            grid.push(a);
            a += self.partition_alpha_step;
        }
        grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let c = RunConfig::from_text("").unwrap();
        assert_eq!(c.k, 5);
        assert_eq!(c.chain.thinning, 100);
        assert_eq!(c.bin_width, 0.01);
    }

    #[test]
    fn keys_override_defaults() {
        let text = "
# comment
seed = 7
chain.clusters = 4
chain.iterations = 5000
chain.burn_in = 2500
eval.cutoffs = 0.1, 0.2, 0.3
chain.augmentation = two-part-leap-shift
";
        let c = RunConfig::from_text(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.chain.n_clusters, 4);
        assert_eq!(c.chain.iter_max, 5000);
        assert_eq!(c.cutoffs, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.chain.augmentation, AugmentationProposal::TwoPartLeapShift);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = RunConfig::from_text("chain.clustersss = 3\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("chain.clustersss"), "{msg}");
    }

    #[test]
    fn invalid_value_names_the_field() {
        let err = RunConfig::from_text("chain.clusters = 0\n").unwrap_err();
        assert!(format!("{err}").contains("chain.clusters"));
        let err = RunConfig::from_text("eval.bin_width = 2\n").unwrap_err();
        assert!(format!("{err}").contains("bin_width"));
    }

    #[test]
    fn partition_grid_spans_the_range() {
        let c = RunConfig::from_text(
            "partition.alpha_min = 0.5\npartition.alpha_max = 2\npartition.alpha_step = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.partition_grid(), vec![0.5, 1.0, 1.5, 2.0]);
    }
}
