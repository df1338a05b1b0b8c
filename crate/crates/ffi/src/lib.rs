//! C ABI for `metric_gff`.
//!
//! Every fallible function returns an [`MgffStatus`] and writes results through
//! out-pointers. On failure the message is available from
//! [`mgff_last_error`] on the calling thread. Objects are opaque handles
//! released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use metric_gff::green::{green_dirichlet_with, green_infinite, GreenMode, GreenTable};
use metric_gff::harness::{self, ExperimentConfig, RunOptions};
use metric_gff::laws;
use metric_gff::percolation::{chemical_distance, connects};
use metric_gff::rng::replica_rng;
use metric_gff::sampler::{edge_open_prob, sample_field, sample_level_set, Field, MetricLevelSet, SamplerMode};
use metric_gff::{BoxSpec, GffError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgffStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Capacity = 3,
    Numeric = 4,
    Domain = 5,
    NullPointer = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgffGreenMode {
    Auto = 0,
    Dense = 1,
    Banded = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgffSampler {
    Dirichlet = 0,
    InfiniteRestricted = 1,
    DirichletProxy = 2,
}

/// Opaque Green's function table.
pub struct MgffGreenTable {
    inner: GreenTable,
}

/// Opaque field sample.
pub struct MgffField {
    inner: Field,
}

/// Opaque metric level set.
pub struct MgffLevelSet {
    inner: MetricLevelSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &GffError) -> MgffStatus {
    match e {
        GffError::Config { .. } | GffError::Serde(_) => MgffStatus::Config,
        GffError::Capacity(_) => MgffStatus::Capacity,
        GffError::Numeric(_) | GffError::Fit(_) => MgffStatus::Numeric,
        GffError::Domain(_) => MgffStatus::Domain,
        GffError::Io(_) | GffError::Csv(_) => MgffStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MgffFail>) -> MgffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MgffStatus::Ok,
        Ok(Err(MgffFail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(MgffFail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MgffStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MgffStatus::Panic
        }
    }
}

enum MgffFail {
    Lib(GffError),
    Null(&'static str),
}

impl From<GffError> for MgffFail {
    fn from(e: GffError) -> Self {
        MgffFail::Lib(e)
    }
}

fn nonnull<T>(p: *const T, what: &'static str) -> Result<(), MgffFail> {
    if p.is_null() {
        Err(MgffFail::Null(what))
    } else {
        Ok(())
    }
}

unsafe fn coords<'a>(p: *const i64, d: usize, what: &'static str) -> Result<&'a [i64], MgffFail> {
    nonnull(p, what)?;
    Ok(std::slice::from_raw_parts(p, d))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn mgff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Green's function of the box `V_n` in `Z^d` killed on its boundary.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mgff_green_dirichlet(
    d: usize,
    n: usize,
    mode: MgffGreenMode,
    out: *mut *mut MgffGreenTable,
) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        let spec = BoxSpec::new(d, n)?;
        let mode = match mode {
            MgffGreenMode::Auto => GreenMode::Auto,
            MgffGreenMode::Dense => GreenMode::Dense,
            MgffGreenMode::Banded => GreenMode::Banded,
        };
        let inner = green_dirichlet_with(&spec, mode)?;
        *out = Box::into_raw(Box::new(MgffGreenTable { inner }));
        Ok(())
    })
}

/// `G(u, v)` for coordinate arrays of length `d`.
///
/// # Safety
/// `table` must come from [`mgff_green_dirichlet`]; `u` and `v` must hold `d`
/// entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_green_get(
    table: *const MgffGreenTable,
    u: *const i64,
    v: *const i64,
    out: *mut f64,
) -> MgffStatus {
    guard(|| {
        nonnull(table, "table")?;
        nonnull(out, "out")?;
        let t = &(*table).inner;
        let spec = t.spec();
        let d = spec.dim();
        let iu = spec.index_of(coords(u, d, "u")?).ok_or_else(|| GffError::domain("u outside the box"))?;
        let iv = spec.index_of(coords(v, d, "v")?).ok_or_else(|| GffError::domain("v outside the box"))?;
        *out = t.get(iu, iv);
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`mgff_green_dirichlet`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mgff_green_free(table: *mut MgffGreenTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// `G(0, x)` on `Z^d`, `d >= 3`.
///
/// # Safety
/// `x` must hold `d` entries and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_green_infinite(d: usize, x: *const i64, out: *mut f64) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = green_infinite(d, coords(x, d, "x")?)?;
        Ok(())
    })
}

/// One field sample on `V_n` from replica stream `(seed, replica)`. `kappa` is
/// read only for the proxy sampler.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_field_sample(
    d: usize,
    n: usize,
    sampler: MgffSampler,
    kappa: f64,
    seed: u64,
    replica: u64,
    out: *mut *mut MgffField,
) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        let spec = BoxSpec::new(d, n)?;
        let mode = match sampler {
            MgffSampler::Dirichlet => SamplerMode::Dirichlet,
            MgffSampler::InfiniteRestricted => SamplerMode::InfiniteRestricted,
            MgffSampler::DirichletProxy => SamplerMode::DirichletProxy { kappa },
        };
        let mut rng = replica_rng(seed, replica);
        let inner = sample_field(&spec, mode, &mut rng)?;
        *out = Box::into_raw(Box::new(MgffField { inner }));
        Ok(())
    })
}

/// Number of vertices of the field's box.
///
/// # Safety
/// `field` must come from [`mgff_field_sample`].
#[no_mangle]
pub unsafe extern "C" fn mgff_field_len(field: *const MgffField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).inner.values.len()
}

/// Copies the field values in vertex index order into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles, `len >= mgff_field_len(field)`.
#[no_mangle]
pub unsafe extern "C" fn mgff_field_values(field: *const MgffField, buf: *mut f64, len: usize) -> MgffStatus {
    guard(|| {
        nonnull(field, "field")?;
        nonnull(buf, "buf")?;
        let v = &(*field).inner.values;
        if len < v.len() {
            return Err(GffError::Capacity(format!("buffer of {len} for {} values", v.len())).into());
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `field` must come from [`mgff_field_sample`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mgff_field_free(field: *mut MgffField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Level set of `field` at `h` with bridge uniforms from stream `(seed, replica)`.
///
/// # Safety
/// `field` must come from [`mgff_field_sample`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_level_set_new(
    field: *const MgffField,
    h: f64,
    seed: u64,
    replica: u64,
    out: *mut *mut MgffLevelSet,
) -> MgffStatus {
    guard(|| {
        nonnull(field, "field")?;
        nonnull(out, "out")?;
        let mut rng = replica_rng(seed, replica);
        let inner = sample_level_set(&(*field).inner, h, &mut rng);
        *out = Box::into_raw(Box::new(MgffLevelSet { inner }));
        Ok(())
    })
}

/// Whether the origin connects to the box boundary.
///
/// # Safety
/// `ls` must come from [`mgff_level_set_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_level_set_origin_connected(ls: *const MgffLevelSet, out: *mut bool) -> MgffStatus {
    guard(|| {
        nonnull(ls, "ls")?;
        nonnull(out, "out")?;
        let ls = &(*ls).inner;
        *out = connects(ls, &[ls.spec.origin()], &ls.spec.internal_boundary())?;
        Ok(())
    })
}

/// Hop distance between two vertices inside the level set, `-1` if they are
/// not connected.
///
/// # Safety
/// `a` and `b` must hold `d` entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_level_set_chemical_distance(
    ls: *const MgffLevelSet,
    a: *const i64,
    b: *const i64,
    out: *mut i64,
) -> MgffStatus {
    guard(|| {
        nonnull(ls, "ls")?;
        nonnull(out, "out")?;
        let ls = &(*ls).inner;
        let d = ls.spec.dim();
        let ia = ls.spec.index_of(coords(a, d, "a")?).ok_or_else(|| GffError::domain("a outside the box"))?;
        let ib = ls.spec.index_of(coords(b, d, "b")?).ok_or_else(|| GffError::domain("b outside the box"))?;
        let cd = chemical_distance(ls, &[ia], &[ib], false)?;
        *out = cd.distance.map_or(-1, |x| x as i64);
        Ok(())
    })
}

/// # Safety
/// `ls` must come from [`mgff_level_set_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mgff_level_set_free(ls: *mut MgffLevelSet) {
    if !ls.is_null() {
        drop(Box::from_raw(ls));
    }
}

/// `P(τ <= T)` for the first time Brownian motion meets `m t − b`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_drift_hit_cdf(m: f64, b: f64, t: f64, out: *mut f64) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = laws::drift_hit_cdf(m, b, t)?;
        Ok(())
    })
}

/// `f(x, y)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_f_bound(x: f64, y: f64, out: *mut f64) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = laws::f_bound(x, y)?;
        Ok(())
    })
}

/// `g(x, y)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_g_bound(x: f64, y: f64, out: *mut f64) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = laws::g_bound(x, y)?;
        Ok(())
    })
}

/// Supercritical limit at level `−h` for variance `sigma2`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_supercritical_limit(h: f64, sigma2: f64, out: *mut f64) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = laws::supercritical_limit(h, sigma2)?;
        Ok(())
    })
}

/// `1 − exp(−(a−h)(b−h)/d)` when both endpoints exceed `h`, else `0`.
#[no_mangle]
pub extern "C" fn mgff_edge_open_prob(a: f64, b: f64, h: f64, d: usize) -> f64 {
    edge_open_prob(a, b, h, d.max(1))
}

/// Runs a JSON experiment config and returns the CSV text in `out_csv`, to be
/// released with [`mgff_string_free`]. Wall times are left empty when
/// `wall_time` is false.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_csv` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_run_config(
    config_json: *const c_char,
    wall_time: bool,
    out_csv: *mut *mut c_char,
) -> MgffStatus {
    guard(|| {
        nonnull(config_json, "config_json")?;
        nonnull(out_csv, "out_csv")?;
        let text =
            CStr::from_ptr(config_json).to_str().map_err(|e| GffError::config("config", format!("not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_json(text)?;
        let records = harness::run_with(&cfg, RunOptions { wall_time })?;
        let mut buf = Vec::new();
        harness::write_csv(&records, &mut buf)?;
        let s = CString::new(buf).map_err(|e| GffError::Numeric(e.to_string()))?;
        *out_csv = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn mgff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// JSON description of `σ_d²` and `c_d`, released with [`mgff_string_free`].
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mgff_lattice_constants(d: usize, out: *mut *mut c_char) -> MgffStatus {
    guard(|| {
        nonnull(out, "out")?;
        let c = metric_gff::green::LatticeConstants::new(d)?;
        let s = serde_json::to_string(&c).map_err(GffError::from)?;
        *out = CString::new(s).map_err(|e| GffError::Numeric(e.to_string()))?.into_raw();
        Ok(())
    })
}
