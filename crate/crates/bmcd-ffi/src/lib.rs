//! C ABI over the bmcd engine. Every function returns a [`BmcdStatus`];
//! results come back through out-pointers, heap objects through opaque
//! handles with matching `_free` functions. The most recent error message
//! is kept per thread and fetched with [`bmcd_last_error_message`].

use bmcd::clicks::{ClickData, ClickSet};
use bmcd::error::BmcdError;
use bmcd::mallows::{default_alpha_grid, PartitionTable};
use bmcd::recommend::{compute_tpp, recommend_top_k, TppMatrix};
use bmcd::sampler::{
    mwcd, run_chain, AugmentationProposal, ChainConfig, InitStrategy, PosteriorSamples,
};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status code of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DomainError = 4,
    NumericError = 5,
    IoError = 6,
    EmptyInput = 7,
    Utf8Error = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid message").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &BmcdError) -> BmcdStatus {
    match err {
        BmcdError::DimensionMismatch { .. } => BmcdStatus::DimensionMismatch,
        BmcdError::InvalidArgument { .. } => BmcdStatus::InvalidArgument,
        BmcdError::Domain(_) | BmcdError::Extrapolation { .. } => BmcdStatus::DomainError,
        BmcdError::EmptyInput(_) => BmcdStatus::EmptyInput,
        BmcdError::Numeric(_) => BmcdStatus::NumericError,
        BmcdError::Format { .. } | BmcdError::Io { .. } => BmcdStatus::IoError,
    }
}

fn fail(err: BmcdError) -> BmcdStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Run `f` with panics converted to a status code.
fn guarded(f: impl FnOnce() -> BmcdStatus) -> BmcdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            BmcdStatus::Panic
        }
    }
}

/// Opaque partition-table handle.
pub struct BmcdPartitionTable(PartitionTable);

/// Opaque click-data handle.
pub struct BmcdClickData {
    n_items: usize,
    users: Vec<ClickSet>,
}

/// Opaque posterior handle.
pub struct BmcdPosterior {
    samples: PosteriorSamples,
    data: ClickData,
}

/// Opaque next-top-k probability matrix handle.
pub struct BmcdTpp(TppMatrix);

/// Chain options with plain C types. Zeroed integer fields fall back to
/// defaults where documented; get a baseline from
/// [`bmcd_chain_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BmcdChainOptions {
    pub n_clusters: usize,
    /// Exponential prior rate on the scale parameters.
    pub lambda: f64,
    /// Dirichlet concentration of the cluster-weight prior.
    pub psi: f64,
    pub iter_max: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// Propose scales every this many iterations.
    pub alpha_update: u64,
    /// Leap-and-shift window; 0 selects max(1, n/20).
    pub leap_size: usize,
    pub alpha_proposal_sd: f64,
    /// 0 = swap proposal, 1 = two-part leap-and-shift.
    pub augmentation: i32,
    /// 0 = random initialization, 1 = popularity initialization.
    pub init: i32,
    pub alpha_init: f64,
    pub seed: u64,
    /// Worker threads for the per-user phase; results do not depend on it.
    pub threads: usize,
    /// Recommendation horizon whose posterior counts the chain accumulates.
    pub tpp_k: usize,
    /// Monte-Carlo sample count for an auto-built partition table.
    pub mc_samples: u64,
}

/// Defaults mirroring the library's long-run schedule, scaled to the data
/// at hand by the caller.
#[no_mangle]
pub extern "C" fn bmcd_chain_options_default() -> BmcdChainOptions {
    let c = ChainConfig::default();
    BmcdChainOptions {
        n_clusters: c.n_clusters,
        lambda: c.lambda,
        psi: c.psi,
        iter_max: c.iter_max,
        burn_in: c.burn_in,
        thinning: c.thinning,
        alpha_update: c.alpha_update,
        leap_size: c.leap_size,
        alpha_proposal_sd: c.alpha_proposal_sd,
        augmentation: 0,
        init: 1,
        alpha_init: c.alpha_init,
        seed: c.seed,
        threads: 1,
        tpp_k: 5,
        mc_samples: 1_000_000,
    }
}

impl BmcdChainOptions {
    fn to_config(self) -> Result<ChainConfig, BmcdError> {
        let augmentation = match self.augmentation {
            0 => AugmentationProposal::Swap,
            1 => AugmentationProposal::TwoPartLeapShift,
            v => {
                return Err(BmcdError::invalid(
                    "augmentation",
                    format!("expected 0 or 1, got {v}"),
                ))
            }
        };
        let init = match self.init {
            0 => InitStrategy::Random,
            1 => InitStrategy::Popularity,
            v => return Err(BmcdError::invalid("init", format!("expected 0 or 1, got {v}"))),
        };
        Ok(ChainConfig {
            n_clusters: self.n_clusters,
            lambda: self.lambda,
            psi: self.psi,
            iter_max: self.iter_max,
            burn_in: self.burn_in,
            thinning: self.thinning,
            alpha_update: self.alpha_update,
            leap_size: self.leap_size,
            alpha_proposal_sd: self.alpha_proposal_sd,
            augmentation,
            init,
            alpha_init: self.alpha_init,
            seed: self.seed,
            store_r_tilde: false,
            tpp_horizons: vec![self.tpp_k],
            threads: self.threads,
            updates: Default::default(),
        })
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn bmcd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The last error message on this thread, or NULL. Free the returned
/// string with `bmcd_string_free`.
#[no_mangle]
pub extern "C" fn bmcd_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must have been returned by a bmcd function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn bmcd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, BmcdStatus> {
    if ptr.is_null() {
        set_error("null path".into());
        return Err(BmcdStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("path is not valid UTF-8".into());
        BmcdStatus::Utf8Error
    })
}

// ---------------------------------------------------------------- distance

/// Footrule distance between two rank vectors of length `len`.
///
/// # Safety
/// `a` and `b` must point to `len` readable u32 values; `out` must be a
/// valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bmcd_footrule_distance(
    a: *const u32,
    b: *const u32,
    len: usize,
    out: *mut u64,
) -> BmcdStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    let a = std::slice::from_raw_parts(a, len);
    let b = std::slice::from_raw_parts(b, len);
    guarded(|| {
        let ra = match bmcd::Ranking::new(a.to_vec()) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let rb = match bmcd::Ranking::new(b.to_vec()) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        match bmcd::footrule_distance(&ra, &rb) {
            Ok(d) => {
                *out = d;
                BmcdStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// ---------------------------------------------------------- partition table

/// Exact partition table for `n <= 8` items.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bmcd_partition_table_exact(
    n: usize,
    out: *mut *mut BmcdPartitionTable,
) -> BmcdStatus {
    if out.is_null() {
        set_error("null out pointer".into());
        return BmcdStatus::NullPointer;
    }
    guarded(|| match PartitionTable::exact(n) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(BmcdPartitionTable(t)));
            BmcdStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Monte-Carlo partition table on the default grid (0.05..=20 step 0.05).
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bmcd_partition_table_monte_carlo(
    n: usize,
    samples: u64,
    seed: u64,
    out: *mut *mut BmcdPartitionTable,
) -> BmcdStatus {
    if out.is_null() {
        set_error("null out pointer".into());
        return BmcdStatus::NullPointer;
    }
    guarded(
        || match PartitionTable::monte_carlo(n, default_alpha_grid(), samples, seed) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(BmcdPartitionTable(t)));
                BmcdStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// Load a table from its CSV form.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_partition_table_load_csv(
    path: *const c_char,
    out: *mut *mut BmcdPartitionTable,
) -> BmcdStatus {
    if out.is_null() {
        set_error("null out pointer".into());
        return BmcdStatus::NullPointer;
    }
    let path = match read_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guarded(|| match bmcd::io::read_partition(std::path::Path::new(path)) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(BmcdPartitionTable(t)));
            BmcdStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Persist a table as CSV.
///
/// # Safety
/// `table` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bmcd_partition_table_save_csv(
    table: *const BmcdPartitionTable,
    path: *const c_char,
) -> BmcdStatus {
    if table.is_null() {
        set_error("null table".into());
        return BmcdStatus::NullPointer;
    }
    let path = match read_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guarded(
        || match bmcd::io::write_partition(std::path::Path::new(path), &(*table).0) {
            Ok(()) => BmcdStatus::Ok,
            Err(e) => fail(e),
        },
    )
}

/// `log Z_n(alpha)`.
///
/// # Safety
/// `table` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_log_partition(
    table: *const BmcdPartitionTable,
    alpha: f64,
    out: *mut f64,
) -> BmcdStatus {
    if table.is_null() || out.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    guarded(|| match (*table).0.log_partition(alpha) {
        Ok(z) => {
            *out = z;
            BmcdStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// # Safety
/// `table` must be a live handle or NULL; double frees are undefined.
#[no_mangle]
pub unsafe extern "C" fn bmcd_partition_table_free(table: *mut BmcdPartitionTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

// --------------------------------------------------------------- click data

/// Empty dataset over `n_items` items; add users one by one.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bmcd_click_data_new(
    n_items: usize,
    out: *mut *mut BmcdClickData,
) -> BmcdStatus {
    if out.is_null() {
        set_error("null out pointer".into());
        return BmcdStatus::NullPointer;
    }
    if n_items == 0 {
        return fail(BmcdError::invalid("n_items", "must be >= 1"));
    }
    *out = Box::into_raw(Box::new(BmcdClickData {
        n_items,
        users: Vec::new(),
    }));
    BmcdStatus::Ok
}

/// Append one user's clicked item indices.
///
/// # Safety
/// `data` must be a live handle; `items` must point to `len` readable u32.
#[no_mangle]
pub unsafe extern "C" fn bmcd_click_data_add_user(
    data: *mut BmcdClickData,
    items: *const u32,
    len: usize,
) -> BmcdStatus {
    if data.is_null() || items.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    let data = &mut *data;
    let items = std::slice::from_raw_parts(items, len);
    guarded(|| {
        if let Some(&max) = items.iter().max() {
            if max as usize >= data.n_items {
                return fail(BmcdError::invalid(
                    "items",
                    format!("item {max} >= n_items {}", data.n_items),
                ));
            }
        }
        match ClickSet::new(items.to_vec()) {
            Ok(set) => {
                data.users.push(set);
                BmcdStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a `user_id,item_id` CSV; `n_items = 0` infers the universe size.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_click_data_load_csv(
    path: *const c_char,
    n_items: usize,
    out: *mut *mut BmcdClickData,
) -> BmcdStatus {
    if out.is_null() {
        set_error("null out pointer".into());
        return BmcdStatus::NullPointer;
    }
    let path = match read_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guarded(
        || match bmcd::io::read_clicks(std::path::Path::new(path), n_items) {
            Ok(data) => {
                *out = Box::into_raw(Box::new(BmcdClickData {
                    n_items: data.n_items(),
                    users: data.users().to_vec(),
                }));
                BmcdStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// # Safety
/// `data` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bmcd_click_data_n_users(data: *const BmcdClickData) -> usize {
    if data.is_null() {
        return 0;
    }
    (*data).users.len()
}

/// # Safety
/// `data` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bmcd_click_data_n_items(data: *const BmcdClickData) -> usize {
    if data.is_null() {
        return 0;
    }
    (*data).n_items
}

/// # Safety
/// `data` must be a live handle or NULL; double frees are undefined.
#[no_mangle]
pub unsafe extern "C" fn bmcd_click_data_free(data: *mut BmcdClickData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

// --------------------------------------------------------------------- fit

/// Run the chain. `table` may be NULL: an exact table is built for
/// `n <= 8` items, otherwise a Monte-Carlo one with `options.mc_samples`
/// draws.
///
/// # Safety
/// `data` and (when non-NULL) `table` must be live handles; `options` and
/// `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bmcd_fit(
    data: *const BmcdClickData,
    options: *const BmcdChainOptions,
    table: *const BmcdPartitionTable,
    out: *mut *mut BmcdPosterior,
) -> BmcdStatus {
    if data.is_null() || options.is_null() || out.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    let data = &*data;
    let options = *options;
    guarded(|| {
        let click_data = match ClickData::new(data.n_items, data.users.clone()) {
            Ok(d) => d,
            Err(e) => return fail(e),
        };
        let config = match options.to_config() {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let built;
        let table_ref = if table.is_null() {
            let method = if click_data.n_items() <= bmcd::mallows::EXACT_N_MAX {
                "exact"
            } else {
                "monte-carlo"
            };
            built = match bmcd::pipeline::build_partition_table(
                click_data.n_items(),
                method,
                default_alpha_grid(),
                options.mc_samples.max(1),
                options.seed,
            ) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            &built
        } else {
            &(*table).0
        };
        match run_chain(&click_data, &config, table_ref) {
            Ok(samples) => {
                *out = Box::into_raw(Box::new(BmcdPosterior {
                    samples,
                    data: click_data,
                }));
                BmcdStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `posterior` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bmcd_posterior_n_samples(posterior: *const BmcdPosterior) -> usize {
    if posterior.is_null() {
        return 0;
    }
    (*posterior).samples.n_samples()
}

/// Posterior mean of the summed within-cluster footrule distances.
///
/// # Safety
/// `posterior` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_posterior_mwcd(
    posterior: *const BmcdPosterior,
    out: *mut f64,
) -> BmcdStatus {
    if posterior.is_null() || out.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    guarded(|| match mwcd(&(*posterior).samples) {
        Ok(v) => {
            *out = v;
            BmcdStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// # Safety
/// `posterior` must be a live handle or NULL; double frees are undefined.
#[no_mangle]
pub unsafe extern "C" fn bmcd_posterior_free(posterior: *mut BmcdPosterior) {
    if !posterior.is_null() {
        drop(Box::from_raw(posterior));
    }
}

// --------------------------------------------------------------------- tpp

/// Next-top-k posterior probabilities at horizon `k` (must match the
/// `tpp_k` the chain accumulated, unless latent rankings were stored).
///
/// # Safety
/// `posterior` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_tpp_compute(
    posterior: *const BmcdPosterior,
    k: usize,
    out: *mut *mut BmcdTpp,
) -> BmcdStatus {
    if posterior.is_null() || out.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    let p = &*posterior;
    guarded(|| match compute_tpp(&p.samples, &p.data, k) {
        Ok(tpp) => {
            *out = Box::into_raw(Box::new(BmcdTpp(tpp)));
            BmcdStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Probability for one (user, item) cell.
///
/// # Safety
/// `tpp` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_tpp_value(
    tpp: *const BmcdTpp,
    user: usize,
    item: usize,
    out: *mut f64,
) -> BmcdStatus {
    if tpp.is_null() || out.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    let t = &(*tpp).0;
    if user >= t.n_users() || item >= t.n_items() {
        return fail(BmcdError::invalid("user/item", "index out of range"));
    }
    *out = t.value(user, item);
    BmcdStatus::Ok
}

/// Top-k recommendations for one user. Fills up to `capacity` entries of
/// `out_items`/`out_scores` and reports the actual count in `out_len`.
///
/// # Safety
/// `tpp` must be a live handle; the out arrays must have `capacity`
/// writable elements; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bmcd_recommend_user(
    tpp: *const BmcdTpp,
    user: usize,
    out_items: *mut u32,
    out_scores: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> BmcdStatus {
    if tpp.is_null() || out_items.is_null() || out_scores.is_null() || out_len.is_null() {
        set_error("null pointer".into());
        return BmcdStatus::NullPointer;
    }
    let t = &(*tpp).0;
    if user >= t.n_users() {
        return fail(BmcdError::invalid("user", "index out of range"));
    }
    guarded(|| {
        let recs = recommend_top_k(t);
        let list = &recs.users[user].items;
        let n = list.len().min(capacity);
        for (slot, rec) in list.iter().take(n).enumerate() {
            *out_items.add(slot) = rec.item;
            *out_scores.add(slot) = rec.score;
        }
        *out_len = n;
        BmcdStatus::Ok
    })
}

/// # Safety
/// `tpp` must be a live handle or NULL; double frees are undefined.
#[no_mangle]
pub unsafe extern "C" fn bmcd_tpp_free(tpp: *mut BmcdTpp) {
    if !tpp.is_null() {
        drop(Box::from_raw(tpp));
    }
}
