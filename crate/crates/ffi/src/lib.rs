//! C ABI for the fragex exploration engine.
//!
//! Handles (`FragexRepo`, `FragexScope`) are opaque and owned by the caller,
//! who releases them with the matching `*_free` function. Every fallible call
//! returns a `FragexStatus`; on failure `fragex_last_error` describes it.
//! Strings returned through out-pointers are NUL-terminated UTF-8 and must be
//! released with `fragex_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use fragex::fragments::{self, Fragment};
use fragex::scope::{self, ClusterMode, Scope, ScopeFilter, ScopeOptions};
use fragex::stem::{build_stem, StemSequence};
use fragex::table::{build_table, Dimension};
use fragex::{ingest, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    IngestFailed = 4,
    EmptyScope = 5,
    UnknownRelease = 6,
    GitFailed = 7,
    PersistenceFailed = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragexFormat {
    Json = 0,
    Csv = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragexClusterMode {
    Similarity = 0,
    Release = 1,
}

/// A loaded repository and its stem.
pub struct FragexRepo {
    stem: Arc<StemSequence>,
}

/// A materialised scope bound to the repository it was resolved on.
pub struct FragexScope {
    stem: Arc<StemSequence>,
    scope: Scope,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (FragexStatus, String);

fn status_of(e: &Error) -> FragexStatus {
    match e.code() {
        "InvalidArgument" => FragexStatus::InvalidArgument,
        "EmptyScope" => FragexStatus::EmptyScope,
        "UnknownRelease" => FragexStatus::UnknownRelease,
        "GitInvocationFailed" | "NotARepository" => FragexStatus::GitFailed,
        "PersistenceFailure" => FragexStatus::PersistenceFailed,
        "Io" => FragexStatus::Io,
        _ => FragexStatus::IngestFailed,
    }
}

fn engine(e: impl Into<Error>) -> Failure {
    let e = e.into();
    (status_of(&e), format!("{}: {e}", e.code()))
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("interior NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FragexStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(None);
            FragexStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(Some(message));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            FragexStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((FragexStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FragexStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

fn nonnull<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err((FragexStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `out` is a valid, writable pointer.
unsafe fn emit_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| (FragexStatus::InvalidArgument, "output contains NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("payload serialises")
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next fragex call on the same thread.
#[no_mangle]
pub extern "C" fn fragex_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn fragex_status_name(status: FragexStatus) -> *const c_char {
    let name: &'static CStr = match status {
        FragexStatus::Ok => c"Ok",
        FragexStatus::NullArgument => c"NullArgument",
        FragexStatus::InvalidUtf8 => c"InvalidUtf8",
        FragexStatus::InvalidArgument => c"InvalidArgument",
        FragexStatus::IngestFailed => c"IngestFailed",
        FragexStatus::EmptyScope => c"EmptyScope",
        FragexStatus::UnknownRelease => c"UnknownRelease",
        FragexStatus::GitFailed => c"GitFailed",
        FragexStatus::PersistenceFailed => c"PersistenceFailed",
        FragexStatus::Io => c"Io",
        FragexStatus::Panic => c"Panic",
    };
    name.as_ptr()
}

/// Opens a canonical dump file, or a git repository when `path` is a directory.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_repo_open(path: *const c_char, out: *mut *mut FragexRepo) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let path = text(path, "path")?;
        let stem = fragex::open(Path::new(path)).map_err(engine)?;
        *out = Box::into_raw(Box::new(FragexRepo { stem: Arc::new(stem) }));
        Ok(())
    })
}

/// Parses an in-memory canonical dump.
///
/// # Safety
/// `dump` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_repo_from_dump(dump: *const c_char, out: *mut *mut FragexRepo) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let dump = text(dump, "dump")?;
        let snapshot = ingest::parse_dump_str(dump).map_err(engine)?;
        let stem = build_stem(Arc::new(snapshot)).map_err(engine)?;
        *out = Box::into_raw(Box::new(FragexRepo { stem: Arc::new(stem) }));
        Ok(())
    })
}

/// # Safety
/// `repo` is null or a handle from `fragex_repo_open`/`fragex_repo_from_dump`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fragex_repo_free(repo: *mut FragexRepo) {
    if !repo.is_null() {
        drop(Box::from_raw(repo));
    }
}

/// Number of stem nodes; 0 for a null handle.
///
/// # Safety
/// `repo` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fragex_repo_node_count(repo: *const FragexRepo) -> usize {
    repo.as_ref().map_or(0, |r| r.stem.len())
}

/// Number of commits on the stem (leads plus squashed); 0 for a null handle.
///
/// # Safety
/// `repo` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fragex_repo_commit_count(repo: *const FragexRepo) -> usize {
    repo.as_ref().map_or(0, |r| r.stem.total_commits())
}

/// Resolves a scope. `filter_json` is NULL (whole stem) or a JSON object with
/// the scope filter fields.
///
/// # Safety
/// `repo` is a live handle, `filter_json` is null or NUL-terminated, `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_new(
    repo: *const FragexRepo,
    filter_json: *const c_char,
    granularity: f64,
    mode: FragexClusterMode,
    out: *mut *mut FragexScope,
) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let repo = repo
            .as_ref()
            .ok_or((FragexStatus::NullArgument, "repo is null".to_string()))?;
        let filter: ScopeFilter = match optional_text(filter_json, "filter_json")? {
            Some(s) => serde_json::from_str(s).map_err(|e| (FragexStatus::InvalidArgument, e.to_string()))?,
            None => ScopeFilter::default(),
        };
        let options = ScopeOptions {
            mode: match mode {
                FragexClusterMode::Similarity => ClusterMode::Similarity,
                FragexClusterMode::Release => ClusterMode::Release,
            },
            ..Default::default()
        };
        let scope = scope::resolve_scope_with(&repo.stem, &filter, granularity, &options).map_err(engine)?;
        *out = Box::into_raw(Box::new(FragexScope {
            stem: repo.stem.clone(),
            scope,
        }));
        Ok(())
    })
}

/// Re-cuts the scope's clusters at a new granularity in place.
///
/// # Safety
/// `scope` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_set_granularity(scope: *mut FragexScope, granularity: f64) -> FragexStatus {
    guard(|| {
        let handle = scope
            .as_mut()
            .ok_or((FragexStatus::NullArgument, "scope is null".to_string()))?;
        handle.scope = scope::rescope(&handle.scope, granularity).map_err(engine)?;
        Ok(())
    })
}

/// # Safety
/// `scope` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_cluster_count(scope: *const FragexScope) -> usize {
    scope.as_ref().map_or(0, |s| s.scope.clusters.len())
}

/// Writes the scope's JSON description (id, range, clusters) to `out`.
///
/// # Safety
/// `scope` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_json(scope: *const FragexScope, out: *mut *mut c_char) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let handle = scope
            .as_ref()
            .ok_or((FragexStatus::NullArgument, "scope is null".to_string()))?;
        emit_string(out, json(&handle.scope))
    })
}

/// # Safety
/// `scope` is null or a handle from `fragex_scope_new` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_free(scope: *mut FragexScope) {
    if !scope.is_null() {
        drop(Box::from_raw(scope));
    }
}

/// Dimension value table of the scope as JSON or CSV. `dims` is NULL for all
/// dimensions or a comma-separated list.
///
/// # Safety
/// `scope` is a live handle, `dims` is null or NUL-terminated, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_table(
    scope: *const FragexScope,
    k: usize,
    dims: *const c_char,
    format: FragexFormat,
    out: *mut *mut c_char,
) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let handle = scope
            .as_ref()
            .ok_or((FragexStatus::NullArgument, "scope is null".to_string()))?;
        let dims = match optional_text(dims, "dims")? {
            Some(list) => Some(Dimension::parse_list(list).map_err(engine)?),
            None => None,
        };
        let table = build_table(&handle.stem, &handle.scope, k, dims.as_deref()).map_err(engine)?;
        let body = match format {
            FragexFormat::Json => json(&table),
            FragexFormat::Csv => table.to_csv(),
        };
        emit_string(out, body)
    })
}

/// Inspection matrix as JSON. `fragments_json` is an array of
/// `{"dimension": ..., "value": ...}` objects.
///
/// # Safety
/// `scope` is a live handle, `fragments_json` is NUL-terminated, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_scope_inspect(
    scope: *const FragexScope,
    fragments_json: *const c_char,
    out: *mut *mut c_char,
) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let handle = scope
            .as_ref()
            .ok_or((FragexStatus::NullArgument, "scope is null".to_string()))?;
        let list: Vec<Fragment> = serde_json::from_str(text(fragments_json, "fragments_json")?)
            .map_err(|e| (FragexStatus::InvalidArgument, e.to_string()))?;
        let matrix = fragments::inspect(&handle.stem, &handle.scope, &list).map_err(engine)?;
        emit_string(out, json(&matrix))
    })
}

/// Stem-wide history of a `dimension=value` fragment as JSON. `scope` may be
/// NULL; when given, occurrences inside it are flagged.
///
/// # Safety
/// `repo` is a live handle, `fragment` is NUL-terminated, `scope` is null or a
/// live handle, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fragex_history(
    repo: *const FragexRepo,
    fragment: *const c_char,
    scope: *const FragexScope,
    out: *mut *mut c_char,
) -> FragexStatus {
    guard(|| {
        nonnull(out, "out")?;
        let repo = repo
            .as_ref()
            .ok_or((FragexStatus::NullArgument, "repo is null".to_string()))?;
        let fragment: Fragment = text(fragment, "fragment")?.parse().map_err(engine)?;
        let scope = scope.as_ref().map(|s| &s.scope);
        emit_string(out, json(&fragments::history(&repo.stem, &fragment, scope)))
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is null or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fragex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
