//! File formats. All CSVs are UTF-8 with LF line endings and 0-based
//! integer ids; floats print in Rust's shortest round-trip form so
//! `parse(write(x)) == x` holds bit-exactly.

use crate::cf::{CfConfig, FactorModel};
use crate::clicks::{ClickData, ClickSet};
use crate::error::{BmcdError, Result};
use crate::mallows::{PartitionMethod, PartitionTable};
use crate::ranking::Ranking;
use crate::recommend::{CalibrationBin, RecommendationList, ScoredItem, UserRecommendations};
use crate::sampler::PosteriorSamples;
use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> BmcdError {
    BmcdError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> BmcdError {
    BmcdError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line_no: usize, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| format_err(path, format!("line {line_no}: cannot parse `{field}`")))
}

/// Split a `key=value,key=value` meta line.
fn parse_meta(path: &Path, line: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in line.trim().split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("bad meta entry `{part}`")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn meta_get<'a>(path: &Path, meta: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| format_err(path, format!("meta line missing `{key}`")))
}

// ---------------------------------------------------------------- clicks

/// `user_id,item_id` rows, one per click, sorted by (user, item).
pub fn clicks_to_csv(data: &ClickData) -> String {
    let mut out = String::from("user_id,item_id\n");
    for (j, u) in data.users().iter().enumerate() {
        for &i in u.items() {
            let _ = writeln!(out, "{j},{i}");
        }
    }
    out
}

pub fn write_clicks(path: &Path, data: &ClickData) -> Result<()> {
    write_text(path, &clicks_to_csv(data))
}

/// Read clicks; `n_items = 0` infers the universe as `max item id + 1`.
pub fn read_clicks(path: &Path, n_items: usize) -> Result<ClickData> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "user_id,item_id")) => {}
        _ => return Err(format_err(path, "expected header `user_id,item_id`")),
    }
    let mut per_user: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut max_item = 0u32;
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (u, i) = line
            .split_once(',')
            .ok_or_else(|| format_err(path, format!("line {}: expected 2 fields", no + 1)))?;
        let user: usize = parse_field(path, no + 1, u)?;
        let item: u32 = parse_field(path, no + 1, i)?;
        max_item = max_item.max(item);
        per_user.entry(user).or_default().push(item);
    }
    if per_user.is_empty() {
        return Err(format_err(path, "no click rows"));
    }
    let n_users = per_user.keys().max().unwrap() + 1;
    let n = if n_items == 0 {
        max_item as usize + 1
    } else {
        n_items
    };
    let mut users = Vec::with_capacity(n_users);
    for j in 0..n_users {
        let items = per_user
            .remove(&j)
            .ok_or_else(|| format_err(path, format!("user {j} has no clicks")))?;
        users.push(ClickSet::new(items)?);
    }
    ClickData::new(n, users)
}

// ---------------------------------------------------------------- truth

/// Full true rankings: `user_id,item_id,rank` rows.
pub fn rankings_to_csv(rankings: &[Ranking]) -> String {
    let mut out = String::from("user_id,item_id,rank\n");
    for (j, r) in rankings.iter().enumerate() {
        for (i, &rank) in r.ranks().iter().enumerate() {
            let _ = writeln!(out, "{j},{i},{rank}");
        }
    }
    out
}

pub fn write_rankings(path: &Path, rankings: &[Ranking]) -> Result<()> {
    write_text(path, &rankings_to_csv(rankings))
}

pub fn read_rankings(path: &Path) -> Result<Vec<Ranking>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "user_id,item_id,rank")) => {}
        _ => return Err(format_err(path, "expected header `user_id,item_id,rank`")),
    }
    let mut per_user: BTreeMap<usize, Vec<(u32, u32)>> = BTreeMap::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let user: usize = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let item: u32 = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let rank: u32 = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        per_user.entry(user).or_default().push((item, rank));
    }
    let n_users = per_user.keys().max().map(|m| m + 1).unwrap_or(0);
    let mut out = Vec::with_capacity(n_users);
    for j in 0..n_users {
        let mut entries = per_user
            .remove(&j)
            .ok_or_else(|| format_err(path, format!("user {j} missing from truth")))?;
        entries.sort_unstable_by_key(|e| e.0);
        let ranks: Vec<u32> = entries.iter().map(|e| e.1).collect();
        out.push(Ranking::new(ranks)?);
    }
    Ok(out)
}

/// Held-out item sets share the clicks format.
pub fn held_out_to_csv(held: &[Vec<u32>]) -> String {
    let mut out = String::from("user_id,item_id\n");
    for (j, items) in held.iter().enumerate() {
        for &i in items {
            let _ = writeln!(out, "{j},{i}");
        }
    }
    out
}

pub fn write_held_out(path: &Path, held: &[Vec<u32>]) -> Result<()> {
    write_text(path, &held_out_to_csv(held))
}

/// Read held-out sets for `n_users` users; users absent from the file have
/// empty sets.
pub fn read_held_out(path: &Path, n_users: usize) -> Result<Vec<Vec<u32>>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "user_id,item_id")) => {}
        _ => return Err(format_err(path, "expected header `user_id,item_id`")),
    }
    let mut out = vec![Vec::new(); n_users];
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (u, i) = line
            .split_once(',')
            .ok_or_else(|| format_err(path, format!("line {}: expected 2 fields", no + 1)))?;
        let user: usize = parse_field(path, no + 1, u)?;
        let item: u32 = parse_field(path, no + 1, i)?;
        if user >= n_users {
            return Err(format_err(path, format!("user {user} out of range")));
        }
        out[user].push(item);
    }
    for v in &mut out {
        v.sort_unstable();
    }
    Ok(out)
}

/// `user_id,cluster` labels.
pub fn labels_to_csv(labels: &[u32]) -> String {
    let mut out = String::from("user_id,cluster\n");
    for (j, &c) in labels.iter().enumerate() {
        let _ = writeln!(out, "{j},{c}");
    }
    out
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    write_text(path, &labels_to_csv(labels))
}

// ------------------------------------------------------- partition table

/// Meta line `n=..,method=..,mc_samples=..`, then `alpha,log_z` rows.
pub fn partition_to_csv(table: &PartitionTable) -> String {
    let mut out = format!(
        "n={},method={},mc_samples={}\nalpha,log_z\n",
        table.n(),
        table.method().as_str(),
        table.mc_samples()
    );
    for (a, z) in table.alpha_grid().iter().zip(table.log_z_values()) {
        let _ = writeln!(out, "{a},{z}");
    }
    out
}

pub fn write_partition(path: &Path, table: &PartitionTable) -> Result<()> {
    write_text(path, &partition_to_csv(table))
}

pub fn read_partition(path: &Path) -> Result<PartitionTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?;
    let meta = parse_meta(path, meta_line)?;
    let n: usize = parse_field(path, 1, meta_get(path, &meta, "n")?)?;
    let method = match meta_get(path, &meta, "method")? {
        "exact" => PartitionMethod::Exact,
        "monte-carlo" => PartitionMethod::MonteCarlo,
        other => return Err(format_err(path, format!("unknown method `{other}`"))),
    };
    let mc_samples: u64 = parse_field(path, 1, meta_get(path, &meta, "mc_samples")?)?;
    match lines.next() {
        Some((_, "alpha,log_z")) => {}
        _ => return Err(format_err(path, "expected header `alpha,log_z`")),
    }
    let mut grid = Vec::new();
    let mut log_z = Vec::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (a, z) = line
            .split_once(',')
            .ok_or_else(|| format_err(path, format!("line {}: expected 2 fields", no + 1)))?;
        grid.push(parse_field(path, no + 1, a)?);
        log_z.push(parse_field(path, no + 1, z)?);
    }
    PartitionTable::from_parts(n, method, mc_samples, grid, log_z)
}

// ----------------------------------------------------------- TPP counts

/// Integer posterior counts behind a TPP matrix. Zero cells are omitted.
pub fn tpp_counts_to_csv(
    n_users: usize,
    n_items: usize,
    k: usize,
    n_samples: u64,
    counts: &[u64],
) -> String {
    let mut out = format!("n_users={n_users},n_items={n_items},k={k},n_samples={n_samples}\n");
    out.push_str("user_id,item_id,count\n");
    for j in 0..n_users {
        for i in 0..n_items {
            let c = counts[j * n_items + i];
            if c > 0 {
                let _ = writeln!(out, "{j},{i},{c}");
            }
        }
    }
    out
}

pub struct TppCountsFile {
    pub n_users: usize,
    pub n_items: usize,
    pub k: usize,
    pub n_samples: u64,
    pub counts: Vec<u64>,
}

pub fn write_tpp_counts(path: &Path, samples: &PosteriorSamples, k: usize) -> Result<()> {
    let acc = samples.tpp_counts_for(k).ok_or_else(|| {
        BmcdError::invalid("k", format!("horizon {k} not accumulated by the chain"))
    })?;
    write_text(
        path,
        &tpp_counts_to_csv(
            samples.n_users,
            samples.n_items,
            k,
            acc.n_samples,
            &acc.counts,
        ),
    )
}

pub fn read_tpp_counts(path: &Path) -> Result<TppCountsFile> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?;
    let meta = parse_meta(path, meta_line)?;
    let n_users: usize = parse_field(path, 1, meta_get(path, &meta, "n_users")?)?;
    let n_items: usize = parse_field(path, 1, meta_get(path, &meta, "n_items")?)?;
    let k: usize = parse_field(path, 1, meta_get(path, &meta, "k")?)?;
    let n_samples: u64 = parse_field(path, 1, meta_get(path, &meta, "n_samples")?)?;
    match lines.next() {
        Some((_, "user_id,item_id,count")) => {}
        _ => return Err(format_err(path, "expected header `user_id,item_id,count`")),
    }
    let mut counts = vec![0u64; n_users * n_items];
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let j: usize = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let i: usize = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let c: u64 = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        if j >= n_users || i >= n_items {
            return Err(format_err(path, format!("line {}: index out of range", no + 1)));
        }
        counts[j * n_items + i] = c;
    }
    Ok(TppCountsFile {
        n_users,
        n_items,
        k,
        n_samples,
        counts,
    })
}

// ----------------------------------------------------------- diagnostics

/// One row per stored sample: iteration, per-cluster scale, within-cluster
/// distance, cluster sizes, cumulative acceptance rates.
pub fn diagnostics_to_csv(samples: &PosteriorSamples) -> String {
    let c = samples.n_clusters;
    let mut header = String::from("iteration");
    for i in 0..c {
        let _ = write!(header, ",alpha_{i}");
    }
    header.push_str(",wcd");
    for i in 0..c {
        let _ = write!(header, ",size_{i}");
    }
    header.push_str(",acc_rho,acc_alpha,acc_rtilde\n");
    let mut out = header;
    let acc = &samples.acceptance;
    for s in 0..samples.n_samples() {
        let _ = write!(out, "{}", samples.iterations[s]);
        for a in &samples.alphas[s] {
            let _ = write!(out, ",{a}");
        }
        let _ = write!(out, ",{}", samples.wcd[s]);
        for sz in &samples.cluster_sizes[s] {
            let _ = write!(out, ",{sz}");
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            acc.rho_rate(),
            acc.alpha_rate(),
            acc.r_tilde_rate()
        );
    }
    out
}

pub fn write_diagnostics(path: &Path, samples: &PosteriorSamples) -> Result<()> {
    write_text(path, &diagnostics_to_csv(samples))
}

// --------------------------------------------------------------- factors

/// Factor matrix with an `l=..,beta=..,theta=..` meta line; one row per
/// entity: `id,f0,...,f{l-1}`.
pub fn factors_to_csv(factors: &[f64], rows: usize, l: usize, config: &CfConfig) -> String {
    let mut out = format!("l={},beta={},theta={}\n", l, config.beta, config.theta);
    out.push_str("id");
    for p in 0..l {
        let _ = write!(out, ",f{p}");
    }
    out.push('\n');
    for r in 0..rows {
        let _ = write!(out, "{r}");
        for p in 0..l {
            let _ = write!(out, ",{}", factors[r * l + p]);
        }
        out.push('\n');
    }
    out
}

pub fn write_factor_model(dir: &Path, model: &FactorModel, config: &CfConfig) -> Result<()> {
    write_text(
        &dir.join("user_factors.csv"),
        &factors_to_csv(&model.user_factors, model.n_users, model.l, config),
    )?;
    write_text(
        &dir.join("item_factors.csv"),
        &factors_to_csv(&model.item_factors, model.n_items, model.l, config),
    )
}

fn read_factors(path: &Path) -> Result<(Vec<f64>, usize, usize, f64, f64)> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?;
    let meta = parse_meta(path, meta_line)?;
    let l: usize = parse_field(path, 1, meta_get(path, &meta, "l")?)?;
    let beta: f64 = parse_field(path, 1, meta_get(path, &meta, "beta")?)?;
    let theta: f64 = parse_field(path, 1, meta_get(path, &meta, "theta")?)?;
    lines.next(); // column header
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id: usize = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let values: Vec<f64> = parts
            .map(|p| parse_field(path, no + 1, p))
            .collect::<Result<_>>()?;
        if values.len() != l {
            return Err(format_err(path, format!("line {}: expected {l} factors", no + 1)));
        }
        rows.push((id, values));
    }
    rows.sort_unstable_by_key(|r| r.0);
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * l);
    for (expect, (id, values)) in rows.into_iter().enumerate() {
        if id != expect {
            return Err(format_err(path, format!("row ids not contiguous at {id}")));
        }
        flat.extend(values);
    }
    Ok((flat, n, l, beta, theta))
}

pub fn read_factor_model(dir: &Path) -> Result<(FactorModel, f64, f64)> {
    let (user_factors, n_users, l, beta, theta) = read_factors(&dir.join("user_factors.csv"))?;
    let (item_factors, n_items, l2, _, _) = read_factors(&dir.join("item_factors.csv"))?;
    if l != l2 {
        return Err(BmcdError::DimensionMismatch { expected: l, got: l2 });
    }
    Ok((
        FactorModel {
            l,
            user_factors,
            item_factors,
            n_users,
            n_items,
        },
        beta,
        theta,
    ))
}

/// `half_sweep,loss` trace.
pub fn loss_trace_to_csv(trace: &[f64]) -> String {
    let mut out = String::from("half_sweep,loss\n");
    for (i, l) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}

// -------------------------------------------------------- recommendations

/// `user_id,rank_in_list,item_id,tpp` rows; the score column carries
/// predicted preferences for the factor baseline.
pub fn recommendations_to_csv(recs: &RecommendationList) -> String {
    let mut out = format!("k={}\nuser_id,rank_in_list,item_id,tpp\n", recs.k);
    for (j, u) in recs.users.iter().enumerate() {
        for (pos, s) in u.items.iter().enumerate() {
            let _ = writeln!(out, "{j},{},{},{}", pos + 1, s.item, s.score);
        }
    }
    out
}

pub fn write_recommendations(path: &Path, recs: &RecommendationList) -> Result<()> {
    write_text(path, &recommendations_to_csv(recs))
}

/// Rebuild a recommendation list; clicked counts come from the training
/// data, and users without rows get empty lists.
pub fn read_recommendations(path: &Path, training: &ClickData) -> Result<RecommendationList> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?;
    let meta = parse_meta(path, meta_line)?;
    let k: usize = parse_field(path, 1, meta_get(path, &meta, "k")?)?;
    match lines.next() {
        Some((_, "user_id,rank_in_list,item_id,tpp")) => {}
        _ => {
            return Err(format_err(
                path,
                "expected header `user_id,rank_in_list,item_id,tpp`",
            ))
        }
    }
    let mut users: Vec<UserRecommendations> = training
        .users()
        .iter()
        .map(|u| UserRecommendations {
            clicked_count: u.count(),
            items: Vec::new(),
        })
        .collect();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let j: usize = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let _pos: usize = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let item: u32 = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        let score: f64 = parse_field(path, no + 1, parts.next().unwrap_or(""))?;
        if j >= users.len() {
            return Err(format_err(path, format!("line {}: user out of range", no + 1)));
        }
        users[j].items.push(ScoredItem { item, score });
    }
    Ok(RecommendationList { k, users })
}

// ----------------------------------------------------------- calibration

pub fn calibration_to_csv(bins: &[CalibrationBin]) -> String {
    let mut out = String::from("bin_low,bin_high,mean_tpp,hit_rate,count\n");
    for b in bins {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            b.low, b.high, b.mean_score, b.hit_rate, b.count
        );
    }
    out
}

/// `threshold,n_recommendations,accuracy` rows; accuracy prints `NA` when
/// nothing survives.
pub fn cutoff_sweep_to_csv(rows: &[(f64, usize, Option<f64>)]) -> String {
    let mut out = String::from("threshold,n_recommendations,accuracy\n");
    for (threshold, surviving, acc) in rows {
        match acc {
            Some(a) => {
                let _ = writeln!(out, "{threshold},{surviving},{a}");
            }
            None => {
                let _ = writeln!(out, "{threshold},{surviving},NA");
            }
        }
    }
    out
}

// ---------------------------------------------------------------- metrics

/// One flat record per (method, dataset, run). `None` prints as `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub method: String,
    pub dataset: String,
    pub run: u64,
    pub k: usize,
    pub n_recommendations: usize,
    pub accuracy: Option<f64>,
    pub coverage: Option<f64>,
    pub correct_coverage: Option<f64>,
    pub intra_list_similarity: Option<f64>,
    pub novelty: Option<f64>,
    pub novelty_excluded: usize,
    pub rare_recommendations: u64,
    pub users_with_rare: u64,
}

fn opt(v: &Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

pub fn metrics_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(
        "method,dataset,run,k,n_recommendations,accuracy,coverage,correct_coverage,\
         intra_list_similarity,novelty,novelty_excluded,rare_recommendations,users_with_rare\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.dataset,
            r.run,
            r.k,
            r.n_recommendations,
            opt(&r.accuracy),
            opt(&r.coverage),
            opt(&r.correct_coverage),
            opt(&r.intra_list_similarity),
            opt(&r.novelty),
            r.novelty_excluded,
            r.rare_recommendations,
            r.users_with_rare
        );
    }
    out
}

// --------------------------------------------------------------- manifest

/// FNV-1a over the canonical config text; recorded in every manifest so
/// reruns are attributable to an exact configuration.
pub fn config_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1_0000_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn write_manifest(
    path: &Path,
    command: &str,
    seed: u64,
    threads: usize,
    config_text: &str,
    outputs: &[String],
) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "threads": threads,
        "config_hash": config_hash(config_text),
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    text.push('\n');
    write_text(path, &text)
}

// ------------------------------------------------------------ curve files

/// `n_clusters,<value_name>` rows for cluster-count selection curves.
pub fn curve_to_csv(value_name: &str, rows: &[(usize, f64)]) -> String {
    let mut out = format!("n_clusters,{value_name}\n");
    for (c, v) in rows {
        let _ = writeln!(out, "{c},{v}");
    }
    out
}
