//! C ABI over the pruning search engine.
//!
//! Every function returns an [`LpStatus`]; on anything other than
//! `LP_STATUS_OK` a description is available from [`lp_last_error`] on the
//! same thread. Ledgers are opaque handles owned by the caller and released
//! with [`lp_ledger_free`]. Strings returned by the library are released
//! with [`lp_string_free`].

use layer_prune::metrics::{self, MetricKind, MetricValue};
use layer_prune::orchestrator::{ledger_from_str, ledger_to_string, load_ledger};
use layer_prune::prune::{
    glp_search, lookup, optimal_search, top_layer_prune, LayerId, LayerTopology, OracleError, PruneError, PruneLedger,
    ScoreOracle,
};
use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    /// The output buffer is too small; the needed length was still written.
    BufferTooSmall = 4,
    Io = 5,
    /// The score callback reported a failure.
    Oracle = 6,
    Panic = 7,
}

/// Stored search result.
pub struct LpLedger {
    inner: PruneLedger,
}

/// Scores a model keeping `kept_len` layers listed in `kept` (ascending).
/// Writes the score to `score` and returns 0, or returns non-zero on failure.
pub type LpScoreFn = Option<
    unsafe extern "C" fn(user_data: *mut c_void, kept: *const usize, kept_len: usize, seed: u64, score: *mut f64) -> c_int,
>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

struct Failure(LpStatus, String);

impl From<PruneError> for Failure {
    fn from(e: PruneError) -> Self {
        let status = match &e {
            PruneError::OutOfRange { .. } => LpStatus::OutOfRange,
            PruneError::Oracle { .. } => LpStatus::Oracle,
            _ => LpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LpStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(LpStatus::NullArgument, format!("{name} is null"))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write_layers(layers: &[LayerId], out: *mut usize, cap: usize, out_len: *mut usize) -> Result<(), Failure> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = layers.len();
    if layers.len() > cap {
        return Err(Failure(LpStatus::BufferTooSmall, format!("{} layers do not fit in a buffer of {cap}", layers.len())));
    }
    if !layers.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(layers.as_ptr(), out, layers.len());
    }
    Ok(())
}

/// Message describing the last failure on this thread, or null. Valid until
/// the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn lp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a ledger file written by the command-line tool.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_load(path: *const c_char, out: *mut *mut LpLedger) -> LpStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| Failure(LpStatus::InvalidArgument, e.to_string()))?;
        let inner = load_ledger(std::path::Path::new(path)).map_err(|e| Failure(LpStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(LpLedger { inner }));
        Ok(())
    })
}

/// Parses a ledger from its JSON text.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_from_json(json: *const c_char, out: *mut *mut LpLedger) -> LpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Failure(LpStatus::InvalidArgument, e.to_string()))?;
        let inner = ledger_from_str(text).map_err(|e| Failure(LpStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(LpLedger { inner }));
        Ok(())
    })
}

/// Serializes a ledger; release the result with [`lp_string_free`].
///
/// # Safety
/// `ledger` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_to_json(ledger: *const LpLedger, out: *mut *mut c_char) -> LpStatus {
    guard(|| {
        let ledger = ledger.as_ref().ok_or_else(|| null("ledger"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CString::new(ledger_to_string(&ledger.inner)).expect("JSON has no NUL bytes");
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `ledger` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_free(ledger: *mut LpLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

/// Number of layers of the model the ledger describes.
///
/// # Safety
/// `ledger` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_depth(ledger: *const LpLedger) -> usize {
    ledger.as_ref().map_or(0, |l| l.inner.depth)
}

/// Number of pruning steps recorded, i.e. the largest valid `x` for lookup.
///
/// # Safety
/// `ledger` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_steps(ledger: *const LpLedger) -> usize {
    ledger.as_ref().map_or(0, |l| l.inner.n())
}

/// Layers to prune for `x` removed layers, in pruning order. Reads only the
/// stored ledger.
///
/// # Safety
/// `ledger` must be a live handle; `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn lp_ledger_lookup(
    ledger: *const LpLedger,
    x: usize,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> LpStatus {
    guard(|| {
        let ledger = ledger.as_ref().ok_or_else(|| null("ledger"))?;
        let solution = lookup(&ledger.inner, x)?;
        write_layers(&solution.pruned, out, cap, out_len)
    })
}

/// The `n` highest layers of a `depth`-layer model, highest first.
///
/// # Safety
/// `out` must hold `cap` elements; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_top_layer_prune(
    depth: usize,
    n: usize,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> LpStatus {
    guard(|| {
        let topology = LayerTopology::new(depth)?;
        let solution = top_layer_prune(&topology, n)?;
        write_layers(&solution.pruned, out, cap, out_len)
    })
}

struct CallbackOracle {
    score: unsafe extern "C" fn(*mut c_void, *const usize, usize, u64, *mut f64) -> c_int,
    user_data: *mut c_void,
}

// Searches run on the calling thread and invoke the callback from it only.
unsafe impl Sync for CallbackOracle {}

impl ScoreOracle for CallbackOracle {
    fn fingerprint(&self) -> String {
        "c-callback".into()
    }

    fn metric_kind(&self, _task: &str) -> Result<MetricKind, OracleError> {
        Ok(MetricKind::Synthetic)
    }

    fn score(&self, kept: &[LayerId], _task: &str, seed: u64) -> Result<MetricValue, OracleError> {
        let mut value = f64::NAN;
        let rc = unsafe { (self.score)(self.user_data, kept.as_ptr(), kept.len(), seed, &mut value) };
        if rc != 0 {
            return Err(OracleError::Evaluation(format!("score callback returned {rc}")));
        }
        // NaN would break the ordering; treat it like a failed trial
        Ok(MetricValue::new(MetricKind::Synthetic, if value.is_nan() { f64::NEG_INFINITY } else { value }))
    }
}

fn oracle(score: LpScoreFn, user_data: *mut c_void) -> Result<CallbackOracle, Failure> {
    let score = score.ok_or_else(|| null("score"))?;
    Ok(CallbackOracle { score, user_data })
}

/// Greedy layer pruning for `n` steps. Calls `score` once per candidate, on
/// the calling thread. The resulting ledger is written to `out`.
///
/// # Safety
/// `score` must be safe to call with `user_data`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_glp_search(
    depth: usize,
    n: usize,
    seed: u64,
    score: LpScoreFn,
    user_data: *mut c_void,
    out: *mut *mut LpLedger,
) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let oracle = oracle(score, user_data)?;
        let inner = glp_search(&LayerTopology::new(depth)?, "task", n, &oracle, seed)?;
        *out = Box::into_raw(Box::new(LpLedger { inner }));
        Ok(())
    })
}

/// Scores all `n`-layer subsets and writes the best one (descending) to
/// `out` and its score to `best_score`.
///
/// # Safety
/// `score` must be safe to call with `user_data`; `out` must hold `cap`
/// elements; `out_len` and `best_score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_optimal_search(
    depth: usize,
    n: usize,
    seed: u64,
    score: LpScoreFn,
    user_data: *mut c_void,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
    best_score: *mut f64,
) -> LpStatus {
    guard(|| {
        if best_score.is_null() {
            return Err(null("best_score"));
        }
        let oracle = oracle(score, user_data)?;
        let outcome = optimal_search(&LayerTopology::new(depth)?, "task", n, &oracle, seed)?;
        write_layers(&outcome.solution.pruned, out, cap, out_len)?;
        *best_score = outcome.score;
        Ok(())
    })
}

/// Which score an `lp_metric` call computes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMetric {
    Accuracy = 0,
    F1 = 1,
    MatthewsCorr = 2,
}

/// Classification metric over `len` predicted and reference labels.
///
/// # Safety
/// `preds` and `golds` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_metric(
    metric: LpMetric,
    preds: *const u32,
    golds: *const u32,
    len: usize,
    out: *mut f64,
) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p: Vec<usize> = slice(preds, len, "preds")?.iter().map(|&v| v as usize).collect();
        let g: Vec<usize> = slice(golds, len, "golds")?.iter().map(|&v| v as usize).collect();
        let value = match metric {
            LpMetric::Accuracy => metrics::accuracy(&p, &g),
            LpMetric::F1 => metrics::f1_binary(&p, &g),
            LpMetric::MatthewsCorr => metrics::matthews_corr(&p, &g),
        }
        .map_err(|e| Failure(LpStatus::InvalidArgument, e.to_string()))?;
        *out = value.value;
        Ok(())
    })
}

/// Spearman rank correlation of two series of `len` values.
///
/// # Safety
/// `x` and `y` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_spearman(x: *const f64, y: *const f64, len: usize, out: *mut f64) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = metrics::spearman_corr(slice(x, len, "x")?, slice(y, len, "y")?)
            .map_err(|e| Failure(LpStatus::InvalidArgument, e.to_string()))?;
        *out = v.value;
        Ok(())
    })
}
