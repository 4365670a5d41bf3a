//! Command-line driver for the pipeline:
//! simulate -> select-clusters -> fit -> recommend -> evaluate -> calibrate.

use bmcd::cf::{cross_validate, fit_als_restarts, recommend_top_k_cf, InteractionMatrix};
use bmcd::config::RunConfig;
use bmcd::datagen::{binarize_top_clicks, scattered_consensus, simulate_rankings, SimulationSpec};
use bmcd::error::BmcdError;
use bmcd::io;
use bmcd::metrics::{
    accuracy, correct_coverage, coverage, intra_list_similarity, novelty, rare_item_stats,
    GroundTruth, PopularityProfile,
};
use bmcd::pipeline::{chain_config_for, partition_table_for};
use bmcd::ranking::Ranking;
use bmcd::recommend::{apply_cutoff, calibration_bins, recommend_top_k, TppMatrix};
use bmcd::rng::{derive_seed, domain, stream_rng};
use bmcd::sampler::{kmeans_select, mwcd, run_chain, InitStrategy};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bmcd", version, about = "Mallows-model recommendations from click data")]
struct Cli {
    /// Worker threads (1 = deterministic sequential mode).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration file (flat key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SelectMethod {
    Mwcd,
    Kmeans,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitKind {
    Bmcd,
    Cf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TruthKind {
    Rankings,
    HeldOut,
}

#[derive(Subcommand)]
enum Command {
    /// Generate clustered synthetic click data (one directory per replicate).
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        replicates: u64,
    },
    /// Print the cluster-count selection curve (posterior within-cluster
    /// distance or k-means WCSS) over a candidate range.
    SelectClusters {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: SelectMethod,
        /// Inclusive range `A..B`, or a single value.
        #[arg(long = "c-range")]
        c_range: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Mallows chain on click data.
    FitBmcd {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the implicit-feedback ALS baseline.
    FitCf {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid-search hyperparameters by cross-validation first.
        #[arg(long)]
        cross_validate: bool,
    },
    /// Produce per-user top-k recommendations from a fitted model.
    Recommend {
        #[arg(long, value_enum)]
        method: FitKind,
        /// Directory written by the fit stage.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Drop recommendations scoring below this threshold.
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Score recommendations against the truth.
    Evaluate {
        #[arg(long)]
        recs: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum)]
        truth_kind: TruthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "bmcd")]
        method: String,
        #[arg(long, default_value = "sim")]
        dataset: String,
        #[arg(long, default_value_t = 0)]
        run: u64,
    },
    /// Emit the calibration table and the cutoff sweep.
    Calibrate {
        #[arg(long)]
        recs: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum)]
        truth_kind: TruthKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BmcdError::InvalidArgument { .. } | BmcdError::Domain(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

/// Resolve relative paths against BMCD_OUT_ROOT when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("BMCD_OUT_ROOT") {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

fn load_config(
    cli_config: &Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<RunConfig, BmcdError> {
    let mut config = match cli_config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(t) = threads {
        config.threads = t;
    }
    config.validate()?;
    Ok(config)
}

fn parse_c_range(text: &str) -> Result<Vec<usize>, BmcdError> {
    let parse_one = |s: &str| -> Result<usize, BmcdError> {
        s.trim()
            .parse()
            .map_err(|_| BmcdError::invalid("c-range", format!("cannot parse `{s}`")))
    };
    let range: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (parse_one(a)?, parse_one(b)?);
        if a > b {
            return Err(BmcdError::invalid("c-range", "empty range"));
        }
        (a..=b).collect()
    } else {
        vec![parse_one(text)?]
    };
    if range.iter().any(|&c| c == 0) {
        return Err(BmcdError::invalid("c-range", "cluster counts must be >= 1"));
    }
    Ok(range)
}

/// Near-equal cluster sizes and the standard consensus sequence: identity,
/// reversed, scattered, then seeded random permutations.
fn standard_spec(config: &RunConfig, seed: u64) -> SimulationSpec {
    let n_users = config.sim_users;
    let n_items = config.sim_items;
    let c = config.sim_clusters;
    let base = n_users / c;
    let mut sizes = vec![base; c];
    sizes[c - 1] += n_users - base * c;
    let mut consensuses = Vec::with_capacity(c);
    for idx in 0..c {
        consensuses.push(match idx {
            0 => Ranking::identity(n_items),
            1 => Ranking::reversed(n_items),
            2 => scattered_consensus(n_items),
            _ => {
                let mut rng = stream_rng(0x636f_6e73u64, domain::SIMULATE, idx as u64);
                Ranking::random(n_items, &mut rng)
            }
        });
    }
    SimulationSpec {
        n_items,
        cluster_sizes: sizes,
        alphas: vec![config.sim_alpha; c],
        consensuses,
        lambda_clicks: config.sim_lambda_clicks,
        seed,
        mallows_burn_in: 0,
    }
}

fn run(cli: Cli) -> Result<(), BmcdError> {
    let config = load_config(&cli.config, cli.seed, cli.threads)?;
    match cli.command {
        Command::Simulate { out, replicates } => {
            if replicates == 0 {
                return Err(BmcdError::invalid("replicates", "must be >= 1"));
            }
            let out = resolve_out(&out);
            for r in 0..replicates {
                let rep_seed = derive_seed(config.seed, domain::REPLICATE, r);
                let spec = standard_spec(&config, rep_seed);
                let (rankings, labels) = simulate_rankings(&spec)?;
                let (clicks, capped) = binarize_top_clicks(&rankings, &spec)?;
                let dir = out.join(format!("rep_{r:03}"));
                io::write_clicks(&dir.join("clicks.csv"), &clicks)?;
                io::write_rankings(&dir.join("truth.csv"), &rankings)?;
                io::write_labels(&dir.join("clusters.csv"), &labels)?;
                io::write_manifest(
                    &dir.join("manifest.json"),
                    "simulate",
                    rep_seed,
                    config.threads,
                    &config.source_text,
                    &["clicks.csv".into(), "truth.csv".into(), "clusters.csv".into()],
                )?;
                if capped > 0 {
                    eprintln!("warning: replicate {r}: {capped} click counts capped at n");
                }
                println!(
                    "replicate {r}: {} users, {} items -> {}",
                    clicks.n_users(),
                    clicks.n_items(),
                    dir.display()
                );
            }
            Ok(())
        }

        Command::SelectClusters {
            data,
            method,
            c_range,
            out,
        } => {
            let clicks = io::read_clicks(&data, 0)?;
            let candidates = parse_c_range(&c_range)?;
            let rows: Vec<(usize, f64)> = match method {
                SelectMethod::Kmeans => {
                    kmeans_select(&clicks, &candidates, config.select_restarts, config.seed)?
                        .into_iter()
                        .map(|cell| (cell.n_clusters, cell.wcss))
                        .collect()
                }
                SelectMethod::Mwcd => {
                    let table = partition_table_for(&config, clicks.n_items())?;
                    let mut rows = Vec::with_capacity(candidates.len());
                    for &c in &candidates {
                        let chain = bmcd::sampler::ChainConfig {
                            n_clusters: c,
                            iter_max: config.select_iterations,
                            burn_in: config.select_burn_in,
                            thinning: config.select_thinning,
                            init: InitStrategy::Random,
                            tpp_horizons: vec![],
                            ..chain_config_for(&config)
                        };
                        let samples = run_chain(&clicks, &chain, &table)?;
                        rows.push((c, mwcd(&samples)?));
                    }
                    rows
                }
            };
            let name = match method {
                SelectMethod::Kmeans => "wcss",
                SelectMethod::Mwcd => "mwcd",
            };
            print!("{}", io::curve_to_csv(name, &rows));
            if let Some(out) = out {
                io::write_text(&resolve_out(&out), &io::curve_to_csv(name, &rows))?;
            }
            Ok(())
        }

        Command::FitBmcd { data, out } => {
            let clicks = io::read_clicks(&data, 0)?;
            let out = resolve_out(&out);
            let table = partition_table_for(&config, clicks.n_items())?;
            let chain = chain_config_for(&config);
            let mut samples = run_chain(&clicks, &chain, &table)?;
            for w in &samples.warnings {
                eprintln!("warning: {w}");
            }
            // Per-cluster traces are reported after label alignment.
            samples.relabel_clusters();
            io::write_partition(&out.join("partition.csv"), &table)?;
            io::write_diagnostics(&out.join("diagnostics.csv"), &samples)?;
            let tpp_name = format!("tpp_counts_k{}.csv", config.k);
            io::write_tpp_counts(&out.join(&tpp_name), &samples, config.k)?;
            io::write_manifest(
                &out.join("manifest.json"),
                "fit-bmcd",
                config.seed,
                config.threads,
                &config.source_text,
                &["partition.csv".into(), "diagnostics.csv".into(), tpp_name],
            )?;
            let acc = &samples.acceptance;
            println!(
                "stored {} samples; acceptance rho {:.3} alpha {:.3} r_tilde {:.3}; \
                 posterior alpha means {:?}",
                samples.n_samples(),
                acc.rho_rate(),
                acc.alpha_rate(),
                acc.r_tilde_rate(),
                samples.alpha_means(),
            );
            if acc.alpha_clamped > 0 {
                eprintln!(
                    "warning: {} scale proposals clamped to the table grid",
                    acc.alpha_clamped
                );
            }
            Ok(())
        }

        Command::FitCf {
            data,
            out,
            cross_validate: do_cv,
        } => {
            let clicks = io::read_clicks(&data, 0)?;
            let out = resolve_out(&out);
            let matrix = InteractionMatrix::from_clicks(&clicks);
            let mut cf_config = config.cf.clone();
            cf_config.seed = config.seed;
            let mut outputs = vec![
                "user_factors.csv".to_string(),
                "item_factors.csv".to_string(),
                "loss_trace.csv".to_string(),
            ];
            if do_cv {
                let outcome = cross_validate(
                    &clicks,
                    &config.cf_grid,
                    config.cf_cv_folds,
                    config.cf_cv_holdout,
                    config.k,
                    &cf_config,
                    config.seed,
                )?;
                let mut cells = String::from("beta,theta,l,mean_accuracy\n");
                for cell in &outcome.cells {
                    cells.push_str(&format!(
                        "{},{},{},{}\n",
                        cell.beta, cell.theta, cell.l, cell.mean_accuracy
                    ));
                }
                io::write_text(&out.join("cv_cells.csv"), &cells)?;
                outputs.push("cv_cells.csv".into());
                if outcome.excluded_users > 0 {
                    eprintln!(
                        "warning: {} users excluded from cross-validation folds",
                        outcome.excluded_users
                    );
                }
                println!(
                    "cross-validation selected beta={} theta={} l={}",
                    outcome.best.beta, outcome.best.theta, outcome.best.l
                );
                cf_config = outcome.best;
            }
            let (model, trace) = fit_als_restarts(&matrix, &cf_config, config.cf_restarts)?;
            io::write_factor_model(&out, &model, &cf_config)?;
            io::write_text(&out.join("loss_trace.csv"), &io::loss_trace_to_csv(&trace))?;
            io::write_manifest(
                &out.join("manifest.json"),
                "fit-cf",
                config.seed,
                config.threads,
                &config.source_text,
                &outputs,
            )?;
            println!(
                "fitted {} factors in {} half-sweeps; final loss {}",
                cf_config.l,
                trace.len(),
                trace.last().unwrap()
            );
            Ok(())
        }

        Command::Recommend {
            method,
            fit,
            data,
            k,
            out,
            cutoff,
        } => {
            let clicks = io::read_clicks(&data, 0)?;
            let k = k.unwrap_or(config.k);
            let out = resolve_out(&out);
            let recs = match method {
                FitKind::Bmcd => {
                    let path = fit.join(format!("tpp_counts_k{k}.csv"));
                    if !path.exists() {
                        return Err(BmcdError::Format {
                            path: path.display().to_string(),
                            message: format!(
                                "missing fit artifact for k = {k}; run `fit-bmcd` with eval.k = {k} first"
                            ),
                        });
                    }
                    let file = io::read_tpp_counts(&path)?;
                    if file.n_users != clicks.n_users() || file.n_items != clicks.n_items() {
                        return Err(BmcdError::invalid(
                            "data",
                            "click data does not match the fitted model dimensions",
                        ));
                    }
                    let tpp = TppMatrix::from_parts(
                        file.n_users,
                        file.n_items,
                        file.k,
                        file.n_samples,
                        file.counts,
                        clicks.users().iter().map(|u| u.items().to_vec()).collect(),
                    )?;
                    recommend_top_k(&tpp)
                }
                FitKind::Cf => {
                    let (model, _, _) = io::read_factor_model(&fit)?;
                    if model.n_users != clicks.n_users() || model.n_items != clicks.n_items() {
                        return Err(BmcdError::invalid(
                            "data",
                            "click data does not match the fitted model dimensions",
                        ));
                    }
                    recommend_top_k_cf(&model, &clicks, k)
                }
            };
            let final_recs = match cutoff {
                Some(threshold) => {
                    let (filtered, report) = apply_cutoff(&recs, threshold);
                    println!(
                        "cutoff {threshold}: kept {} of {} recommendations",
                        report.threshold_kept,
                        recs.total()
                    );
                    filtered
                }
                None => recs,
            };
            io::write_recommendations(&out, &final_recs)?;
            println!(
                "wrote {} recommendations for {} users -> {}",
                final_recs.total(),
                final_recs.n_users(),
                out.display()
            );
            Ok(())
        }

        Command::Evaluate {
            recs,
            data,
            truth,
            truth_kind,
            out,
            method,
            dataset,
            run,
        } => {
            let clicks = io::read_clicks(&data, 0)?;
            let recs = io::read_recommendations(&recs, &clicks)?;
            let truth = load_truth(&truth, truth_kind, clicks.n_users())?;
            let out = resolve_out(&out);
            let n_eligible = clicks.n_items();
            let pop = PopularityProfile::from_training(&clicks);
            let total = recs.total();
            let record = if total == 0 {
                io::MetricsRecord {
                    method,
                    dataset,
                    run,
                    k: recs.k,
                    n_recommendations: 0,
                    accuracy: None,
                    coverage: None,
                    correct_coverage: None,
                    intra_list_similarity: None,
                    novelty: None,
                    novelty_excluded: 0,
                    rare_recommendations: 0,
                    users_with_rare: 0,
                }
            } else {
                let (nov, excluded) = novelty(&recs, &pop, recs.k);
                let (rare, users_with_rare) =
                    rare_item_stats(&recs, &pop, config.popular_cutoff.min(n_eligible - 1))?;
                io::MetricsRecord {
                    method,
                    dataset,
                    run,
                    k: recs.k,
                    n_recommendations: total,
                    accuracy: Some(accuracy(&recs, &truth)?),
                    coverage: Some(coverage(&recs, n_eligible)?),
                    correct_coverage: Some(correct_coverage(&recs, &truth, n_eligible)?),
                    intra_list_similarity: Some(intra_list_similarity(&recs, &clicks)),
                    novelty: Some(nov),
                    novelty_excluded: excluded,
                    rare_recommendations: rare,
                    users_with_rare,
                }
            };
            let text = io::metrics_to_csv(std::slice::from_ref(&record));
            print!("{text}");
            io::write_text(&out, &text)?;
            Ok(())
        }

        Command::Calibrate {
            recs,
            data,
            truth,
            truth_kind,
            out,
        } => {
            let clicks = io::read_clicks(&data, 0)?;
            let recs = io::read_recommendations(&recs, &clicks)?;
            let truth = load_truth(&truth, truth_kind, clicks.n_users())?;
            let out = resolve_out(&out);
            let bins = calibration_bins(&recs, &truth, config.bin_width)?;
            io::write_text(&out.join("calibration.csv"), &io::calibration_to_csv(&bins))?;

            let mut sweep = Vec::with_capacity(config.cutoffs.len());
            for &threshold in &config.cutoffs {
                let (filtered, report) = apply_cutoff(&recs, threshold);
                let acc = if report.threshold_kept == 0 {
                    None
                } else {
                    Some(accuracy(&filtered, &truth)?)
                };
                sweep.push((threshold, report.threshold_kept, acc));
            }
            io::write_text(
                &out.join("cutoff_sweep.csv"),
                &io::cutoff_sweep_to_csv(&sweep),
            )?;
            io::write_manifest(
                &out.join("manifest.json"),
                "calibrate",
                config.seed,
                config.threads,
                &config.source_text,
                &["calibration.csv".into(), "cutoff_sweep.csv".into()],
            )?;
            println!(
                "wrote {} calibration bins and a {}-point cutoff sweep -> {}",
                bins.len(),
                sweep.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn load_truth(path: &Path, kind: TruthKind, n_users: usize) -> Result<GroundTruth, BmcdError> {
    match kind {
        TruthKind::Rankings => Ok(GroundTruth::Rankings(io::read_rankings(path)?)),
        TruthKind::HeldOut => Ok(GroundTruth::HeldOut(io::read_held_out(path, n_users)?)),
    }
}
