//! C ABI over `voa-core`.
//!
//! Every fallible function returns a [`VoaStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`voa_last_error`] on the same thread. Traces and impression logs are
//! opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use voa_core::analytics::{self, OverlapTable};
use voa_core::model::{self, ModelParams};
use voa_core::optimizer;
use voa_core::simulator::{self, AccessSchedule, SimConfig};
use voa_core::trace_io::{self, ImpressionLog, InputFormat};
use voa_core::{Post, VoaError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoaStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Convergence = 3,
    Parse = 4,
    InvalidData = 5,
    Io = 6,
    InvalidUtf8 = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoaSchedule {
    RandomReference = 0,
    ExponentialClock = 1,
    DeterministicClock = 2,
}

impl From<VoaSchedule> for AccessSchedule {
    fn from(s: VoaSchedule) -> Self {
        match s {
            VoaSchedule::RandomReference => AccessSchedule::RandomReference,
            VoaSchedule::ExponentialClock => AccessSchedule::ExponentialClock,
            VoaSchedule::DeterministicClock => AccessSchedule::DeterministicClock,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoaOptimalRate {
    pub mu_star: f64,
    pub utility_at_star: f64,
    pub clamped: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoaSimConfig {
    pub k: usize,
    pub sample_interval_hours: f64,
    pub period_hours: f64,
    pub rounds: usize,
    pub seed: u64,
    pub schedule: VoaSchedule,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoaRoundStats {
    pub mean: f64,
    pub std: f64,
    pub standard_error: f64,
    pub rounds: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoaTraceMeta {
    pub post_count: usize,
    pub publisher_count: usize,
    pub time_span_hours: f64,
    pub estimated_lambda: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VoaOverlapTable {
    pub both: u64,
    pub only_x: u64,
    pub only_y: u64,
    pub neither: u64,
    pub universe_size: u64,
}

impl From<OverlapTable> for VoaOverlapTable {
    fn from(t: OverlapTable) -> Self {
        VoaOverlapTable {
            both: t.both,
            only_x: t.only_x,
            only_y: t.only_y,
            neither: t.neither,
            universe_size: t.universe_size,
        }
    }
}

impl From<VoaOverlapTable> for OverlapTable {
    fn from(t: VoaOverlapTable) -> Self {
        OverlapTable {
            both: t.both,
            only_x: t.only_x,
            only_y: t.only_y,
            neither: t.neither,
            universe_size: t.universe_size,
        }
    }
}

/// Opaque post trace, sorted by creation time.
pub struct VoaTrace {
    posts: Vec<Post>,
}

/// Opaque impression log grouped into per-user snapshots.
pub struct VoaImpressionLog {
    log: ImpressionLog,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum FfiError {
    Null(&'static str),
    Utf8(&'static str),
    Core(VoaError),
}

impl From<VoaError> for FfiError {
    fn from(e: VoaError) -> Self {
        FfiError::Core(e)
    }
}

fn status_of(e: &VoaError) -> VoaStatus {
    match e {
        VoaError::Domain(_) => VoaStatus::Domain,
        VoaError::Convergence { .. } | VoaError::SearchBound { .. } => VoaStatus::Convergence,
        VoaError::Parse { .. } | VoaError::DuplicateId { .. } => VoaStatus::Parse,
        VoaError::IndexOutOfRange { .. } | VoaError::Empty(_) | VoaError::InvalidData(_) => VoaStatus::InvalidData,
        VoaError::Io(_) => VoaStatus::Io,
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> VoaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            VoaStatus::Ok
        }
        Ok(Err(FfiError::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            VoaStatus::NullPointer
        }
        Ok(Err(FfiError::Utf8(what))) => {
            set_last_error(format!("{what} is not valid UTF-8"));
            VoaStatus::InvalidUtf8
        }
        Ok(Err(FfiError::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            VoaStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(FfiError::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(s: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    if s.is_null() {
        return Err(FfiError::Null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| FfiError::Utf8(what))
}

unsafe fn handle<'a, T>(h: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    h.as_ref().ok_or(FfiError::Null(what))
}

fn truncation(k: usize) -> Option<usize> {
    (k > 0).then_some(k)
}

/// Message describing the last failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn voa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Closed-form VoA for exponential inter-access times. `out_fill` may be NULL.
///
/// # Safety
/// `out_mean` must be valid for writes; `out_fill` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn voa_exponential(
    lambda: f64,
    mu: f64,
    k: f64,
    out_mean: *mut f64,
    out_fill: *mut f64,
) -> VoaStatus {
    guard(|| {
        let est = model::voa_exponential(&ModelParams::new(lambda, mu, k, 0.0)?)?;
        write_out(out_mean, est.mean, "out_mean")?;
        if !out_fill.is_null() {
            out_fill.write(est.fill_probability.unwrap_or(f64::NAN));
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_summation_oracle(lambda: f64, mu: f64, k: f64, out: *mut f64) -> VoaStatus {
    guard(|| {
        let v = model::voa_summation_oracle(&ModelParams::new(lambda, mu, k, 0.0)?)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_quadrature_oracle(lambda: f64, mu: f64, k: f64, out: *mut f64) -> VoaStatus {
    guard(|| {
        let v = model::voa_quadrature_oracle(&ModelParams::new(lambda, mu, k, 0.0)?)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_deterministic(lambda: f64, tau: f64, k: u64, out: *mut f64) -> VoaStatus {
    guard(|| write_out(out, model::voa_deterministic(lambda, tau, k)?, "out"))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_poisson_k(lambda: f64, mu: f64, alpha: f64, out: *mut f64) -> VoaStatus {
    guard(|| write_out(out, model::voa_poisson_k(lambda, mu, alpha)?, "out"))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_average_k(lambda: f64, mu: f64, alpha: f64, out: *mut f64) -> VoaStatus {
    guard(|| write_out(out, model::voa_average_k(lambda, mu, alpha)?, "out"))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_utility(lambda: f64, mu: f64, k: f64, cost: f64, out: *mut f64) -> VoaStatus {
    guard(|| {
        let p = ModelParams { lambda, mu, k, cost };
        write_out(out, optimizer::utility(&p)?, "out")
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_utility_gradient(lambda: f64, mu: f64, k: f64, cost: f64, out: *mut f64) -> VoaStatus {
    guard(|| {
        let p = ModelParams { lambda, mu, k, cost };
        write_out(out, optimizer::utility_gradient(&p)?, "out")
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_optimal_access_rate(
    lambda: f64,
    k: u32,
    cost: f64,
    out: *mut VoaOptimalRate,
) -> VoaStatus {
    guard(|| {
        let r = optimizer::optimal_access_rate(lambda, k, cost)?;
        write_out(
            out,
            VoaOptimalRate {
                mu_star: r.mu_star,
                utility_at_star: r.utility_at_star,
                clamped: r.clamped,
            },
            "out",
        )
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_optimal_access_rate_numeric(
    lambda: f64,
    k: u32,
    cost: f64,
    search_upper: f64,
    out: *mut f64,
) -> VoaStatus {
    guard(|| {
        let v = optimizer::optimal_access_rate_numeric(lambda, k, cost, search_upper)?;
        write_out(out, v, "out")
    })
}

fn stats_out(s: simulator::RoundStats) -> VoaRoundStats {
    VoaRoundStats {
        mean: s.mean,
        std: s.std,
        standard_error: s.standard_error(),
        rounds: s.rounds,
    }
}

/// Monte Carlo VoA with Poisson arrivals and a clock access schedule.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_simulate_synthetic(
    lambda: f64,
    mu: f64,
    k: u64,
    accesses_per_round: usize,
    rounds: usize,
    seed: u64,
    schedule: VoaSchedule,
    out: *mut VoaRoundStats,
) -> VoaStatus {
    guard(|| {
        let params = ModelParams::new(lambda, mu, k as f64, 0.0)?;
        let s = simulator::simulate_synthetic(&params, accesses_per_round, rounds, seed, schedule.into())?;
        write_out(out, stats_out(s), "out")
    })
}

/// Reads a post trace (`.csv` or JSON lines) from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_trace_read_file(path: *const c_char, out: *mut *mut VoaTrace) -> VoaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let posts = trace_io::read_posts_file(Path::new(path))?;
        write_out(out, Box::into_raw(Box::new(VoaTrace { posts })), "out")
    })
}

/// Parses a post trace from an in-memory buffer.
///
/// # Safety
/// `data` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_trace_parse(data: *const c_char, csv: bool, out: *mut *mut VoaTrace) -> VoaStatus {
    guard(|| {
        let data = str_arg(data, "data")?;
        let format = if csv { InputFormat::Csv } else { InputFormat::JsonLines };
        let posts = trace_io::parse_posts(data.as_bytes(), format)?;
        write_out(out, Box::into_raw(Box::new(VoaTrace { posts })), "out")
    })
}

/// Number of posts in the trace; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voa_trace_len(trace: *const VoaTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.posts.len())
}

/// # Safety
/// `trace` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_trace_meta(trace: *const VoaTrace, out: *mut VoaTraceMeta) -> VoaStatus {
    guard(|| {
        let m = trace_io::trace_meta(&handle(trace, "trace")?.posts)?;
        write_out(
            out,
            VoaTraceMeta {
                post_count: m.post_count,
                publisher_count: m.publisher_count,
                time_span_hours: m.time_span_hours,
                estimated_lambda: m.estimated_lambda,
            },
            "out",
        )
    })
}

/// Trace-driven FIFO simulation.
///
/// # Safety
/// `trace` must be a live handle; `config` must point to a valid config and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_trace_simulate(
    trace: *const VoaTrace,
    config: *const VoaSimConfig,
    out: *mut VoaRoundStats,
) -> VoaStatus {
    guard(|| {
        let trace = handle(trace, "trace")?;
        let c = *handle(config, "config")?;
        let config = SimConfig {
            k: c.k,
            sample_interval_hours: c.sample_interval_hours,
            period_hours: c.period_hours,
            rounds: c.rounds,
            seed: c.seed,
            access_schedule: c.schedule.into(),
        };
        let s = simulator::simulate_trace_fifo(&trace.posts, &config)?;
        write_out(out, stats_out(s), "out")
    })
}

/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn voa_trace_free(trace: *mut VoaTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Reads an impression log (`.csv` or JSON lines) from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_impressions_read_file(path: *const c_char, out: *mut *mut VoaImpressionLog) -> VoaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let log = trace_io::read_impressions_file(Path::new(path))?;
        write_out(out, Box::into_raw(Box::new(VoaImpressionLog { log })), "out")
    })
}

/// # Safety
/// `data` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_impressions_parse(
    data: *const c_char,
    csv: bool,
    out: *mut *mut VoaImpressionLog,
) -> VoaStatus {
    guard(|| {
        let data = str_arg(data, "data")?;
        let format = if csv { InputFormat::Csv } else { InputFormat::JsonLines };
        let log = trace_io::parse_impressions(data.as_bytes(), format)?;
        write_out(out, Box::into_raw(Box::new(VoaImpressionLog { log })), "out")
    })
}

/// Number of distinct users; 0 for NULL.
///
/// # Safety
/// `log` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voa_impressions_user_count(log: *const VoaImpressionLog) -> usize {
    log.as_ref().map_or(0, |l| l.log.users().len())
}

/// Mean novel impressions per snapshot for `user`. `truncate_k == 0` keeps
/// every position.
///
/// # Safety
/// `log` must be a live handle, `user` a NUL-terminated string and `out_mean`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_impressions_snapshot_voa(
    log: *const VoaImpressionLog,
    user: *const c_char,
    truncate_k: usize,
    fifo_reorder: bool,
    out_mean: *mut f64,
) -> VoaStatus {
    guard(|| {
        let log = &handle(log, "log")?.log;
        let user = str_arg(user, "user")?;
        let snaps = log.snapshots_for(user);
        let result = if fifo_reorder {
            let reordered: Vec<_> = snaps.iter().map(analytics::reorder_fifo).collect();
            analytics::voa_from_snapshots(&reordered, truncation(truncate_k))?
        } else {
            analytics::voa_from_snapshots(snaps, truncation(truncate_k))?
        };
        write_out(out_mean, result.mean, "out_mean")
    })
}

/// Overlap table of posts seen by users `x` and `y`, over the union of posts
/// seen by every user in the log.
///
/// # Safety
/// `log` must be a live handle, `x` and `y` NUL-terminated strings and `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_impressions_overlap(
    log: *const VoaImpressionLog,
    x: *const c_char,
    y: *const c_char,
    truncate_k: usize,
    out: *mut VoaOverlapTable,
) -> VoaStatus {
    guard(|| {
        let log = &handle(log, "log")?.log;
        let (x, y) = (str_arg(x, "x")?, str_arg(y, "y")?);
        let k = truncation(truncate_k);
        let universe: HashSet<String> = log.users().iter().flat_map(|u| log.posts_seen_by(u, k)).collect();
        let table = analytics::overlap_table(&log.posts_seen_by(x, k), &log.posts_seen_by(y, k), &universe)?;
        write_out(out, table.into(), "out")
    })
}

/// # Safety
/// `log` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn voa_impressions_free(log: *mut VoaImpressionLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// `both / (both + only_y)`.
///
/// # Safety
/// `table` must point to a valid table; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_coverage_fraction(table: *const VoaOverlapTable, out: *mut f64) -> VoaStatus {
    guard(|| {
        let t: OverlapTable = (*handle(table, "table")?).into();
        write_out(out, analytics::coverage_fraction(&t)?, "out")
    })
}

/// Larger of the two directional coverage fractions.
///
/// # Safety
/// `table` must point to a valid table; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn voa_pairwise_overlap(table: *const VoaOverlapTable, out: *mut f64) -> VoaStatus {
    guard(|| {
        let t: OverlapTable = (*handle(table, "table")?).into();
        write_out(out, analytics::pairwise_overlap_of(&t)?, "out")
    })
}
