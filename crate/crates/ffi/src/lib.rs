//! C ABI for `fico`.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `fico_*_new`/`_read`/`_build` call and released by the matching
//! `fico_*_free`. Fallible calls return a [`FicoStatus`] and write their
//! result through an out-pointer; on failure the message is available from
//! [`fico_last_error`] on the same thread. Enumerations passed *into* the
//! library are plain `uint32_t` values so that out-of-range input is an
//! error rather than undefined behaviour.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use fico::ann::{AnyIndex, BinaryFlatIndex, BinaryIvfIndex, FlatIndex, HnswIndex, HnswParams, SearchParams};
use fico::eval::{eval_category, eval_instance, CategoryOptions};
use fico::model::{BinaryCodeSet, Direction, Dtype, EmbeddingSet, EvalReport, InstanceGroups, LabelMatrix, RankedRetrieval, SimilarityMatrix, Values, MISSING};
use fico::similarity::{hamming_distance, pairwise, Measure, Representation};
use fico::{codec, FicoError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FicoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Validation = 5,
    DimensionMismatch = 6,
    DigestMismatch = 7,
    Panic = 8,
}

/// Values accepted wherever a `measure` argument is taken.
#[repr(u32)]
pub enum FicoMeasure {
    Hamming = 0,
    InnerProduct = 1,
    Cosine = 2,
    Euclidean = 3,
}

#[repr(u32)]
pub enum FicoDirection {
    I2T = 0,
    T2I = 1,
}

#[repr(u32)]
pub enum FicoDtype {
    F32 = 0,
    F64 = 1,
}

pub struct FicoEmbeddings(EmbeddingSet);
pub struct FicoCodes(BinaryCodeSet);
pub struct FicoSim(SimilarityMatrix);
pub struct FicoGroups(InstanceGroups);
pub struct FicoLabels(LabelMatrix);
pub struct FicoReport(EvalReport);
pub struct FicoIndex(AnyIndex);

/// Search results with the candidate IDs needed to resolve columns.
pub struct FicoRanked {
    ranked: RankedRetrieval,
    candidate_ids: Vec<u64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Lib(FicoError),
}

impl From<FicoError> for Fail {
    fn from(e: FicoError) -> Self {
        Fail::Lib(e)
    }
}

type R<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> R<()>) -> FicoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FicoStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FicoStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            match e {
                FicoError::Io { .. } => FicoStatus::Io,
                FicoError::Format(_) => FicoStatus::Format,
                FicoError::Validation(_) => FicoStatus::Validation,
                FicoError::InvalidArgument(_) => FicoStatus::InvalidArgument,
                FicoError::DimensionMismatch(_) => FicoStatus::DimensionMismatch,
                FicoError::DigestMismatch => FicoStatus::DigestMismatch,
            }
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            FicoStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &'static str) -> R<&'a T> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> R<()> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> R<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path(p: *const c_char) -> R<PathBuf> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| FicoError::invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn ids_or_sequential(ids: *const u64, n: usize) -> R<Vec<u64>> {
    if ids.is_null() {
        Ok((0..n as u64).collect())
    } else {
        Ok(slice(ids, n, "ids")?.to_vec())
    }
}

fn measure(m: u32) -> R<Measure> {
    Ok(match m {
        0 => Measure::Hamming,
        1 => Measure::InnerProduct,
        2 => Measure::Cosine,
        3 => Measure::Euclidean,
        other => return Err(FicoError::invalid(format!("unknown measure {other}")).into()),
    })
}

fn dtype(d: u32) -> R<Dtype> {
    Ok(match d {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(FicoError::invalid(format!("unknown dtype {other}")).into()),
    })
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fico_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fico_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fico_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// embeddings and codes

/// Copies `n * dim` row-major f32 values. `ids` may be NULL for 0..n.
///
/// # Safety
/// `ids` (if non-NULL) must hold `n` values and `values` `n * dim`.
#[no_mangle]
pub unsafe extern "C" fn fico_embeddings_new_f32(
    ids: *const u64,
    n: usize,
    dim: usize,
    values: *const f32,
    out: *mut *mut FicoEmbeddings,
) -> FicoStatus {
    guard(|| {
        let n_values = n.checked_mul(dim).ok_or_else(|| FicoError::invalid("n * dim overflows"))?;
        let v = slice(values, n_values, "values")?.to_vec();
        let set = EmbeddingSet::new(ids_or_sequential(ids, n)?, dim, Values::F32(v))?;
        put(out, FicoEmbeddings(set))
    })
}

/// Reads an fvecs (`dtype` 0) or dvecs (`dtype` 1) file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_embeddings_read(path_: *const c_char, dtype_: u32, out: *mut *mut FicoEmbeddings) -> FicoStatus {
    guard(|| {
        let p = path(path_)?;
        let ids = codec::read_ids(&codec::sidecar_path(&p)).ok();
        put(out, FicoEmbeddings(codec::read_vectors(&p, dtype(dtype_)?, ids.as_deref())?))
    })
}

/// # Safety
/// `e` must be a live handle or NULL; `n` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_embeddings_shape(e: *const FicoEmbeddings, n: *mut usize, dim: *mut usize) -> FicoStatus {
    guard(|| {
        let e = obj(e, "embeddings")?;
        if n.is_null() || dim.is_null() {
            return Err(Fail::Null("out"));
        }
        *n = e.0.len();
        *dim = e.0.dim();
        Ok(())
    })
}

/// # Safety
/// `e` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_embeddings_free(e: *mut FicoEmbeddings) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Copies `n` codes of `bits` bits, each `ceil(bits / 64)` LSB-first words.
///
/// # Safety
/// `ids` (if non-NULL) must hold `n` values and `words` the packed codes.
#[no_mangle]
pub unsafe extern "C" fn fico_codes_new(
    ids: *const u64,
    n: usize,
    bits: usize,
    words: *const u64,
    out: *mut *mut FicoCodes,
) -> FicoStatus {
    guard(|| {
        let per = bits.div_ceil(64);
        let w = slice(words, n * per, "words")?.to_vec();
        put(out, FicoCodes(BinaryCodeSet::new(ids_or_sequential(ids, n)?, bits, w)?))
    })
}

/// Reads a packed bvecs file of `bits`-bit codes.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_codes_read(path_: *const c_char, bits: usize, out: *mut *mut FicoCodes) -> FicoStatus {
    guard(|| {
        let p = path(path_)?;
        let ids = codec::read_ids(&codec::sidecar_path(&p)).ok();
        put(out, FicoCodes(codec::read_codes(&p, bits, ids.as_deref())?))
    })
}

/// # Safety
/// `c` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_codes_free(c: *mut FicoCodes) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Hamming distance between two codes of `words` 64-bit words each.
///
/// # Safety
/// `a` and `b` must hold `words` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_hamming(a: *const u64, b: *const u64, words: usize, out: *mut u32) -> FicoStatus {
    guard(|| {
        let d = hamming_distance(slice(a, words, "a")?, slice(b, words, "b")?)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = d;
        Ok(())
    })
}

// similarity

/// Dense query x candidate similarity under `measure` (a `FicoMeasure`).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_pairwise_dense(
    queries: *const FicoEmbeddings,
    candidates: *const FicoEmbeddings,
    measure_: u32,
    out: *mut *mut FicoSim,
) -> FicoStatus {
    guard(|| {
        let q = obj(queries, "queries")?;
        let c = obj(candidates, "candidates")?;
        put(out, FicoSim(pairwise(Representation::Dense(&q.0), Representation::Dense(&c.0), measure(measure_)?)?))
    })
}

/// Code similarity: Hamming, or a dense measure over the ±1 view.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_pairwise_codes(
    queries: *const FicoCodes,
    candidates: *const FicoCodes,
    measure_: u32,
    out: *mut *mut FicoSim,
) -> FicoStatus {
    guard(|| {
        let q = obj(queries, "queries")?;
        let c = obj(candidates, "candidates")?;
        put(out, FicoSim(pairwise(Representation::Codes(&q.0), Representation::Codes(&c.0), measure(measure_)?)?))
    })
}

/// Wraps `n_queries * n_candidates` row-major scores.
///
/// # Safety
/// ID arrays (if non-NULL) and `scores` must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fico_sim_new(
    query_ids: *const u64,
    n_queries: usize,
    candidate_ids: *const u64,
    n_candidates: usize,
    scores: *const f32,
    out: *mut *mut FicoSim,
) -> FicoStatus {
    guard(|| {
        let s = slice(scores, n_queries * n_candidates, "scores")?.to_vec();
        let m = SimilarityMatrix::new(
            ids_or_sequential(query_ids, n_queries)?,
            ids_or_sequential(candidate_ids, n_candidates)?,
            s,
            "external",
        )?;
        put(out, FicoSim(m))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_sim_read(path_: *const c_char, out: *mut *mut FicoSim) -> FicoStatus {
    guard(|| put(out, FicoSim(codec::read_sim(&path(path_)?)?)))
}

/// # Safety
/// `sim` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fico_sim_write(sim: *const FicoSim, path_: *const c_char) -> FicoStatus {
    guard(|| Ok(codec::write_sim(&obj(sim, "sim")?.0, &path(path_)?)?))
}

/// Shape and a borrowed pointer to the row-major scores, valid while `sim` lives.
///
/// # Safety
/// `sim` must be live; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_sim_scores(
    sim: *const FicoSim,
    n_queries: *mut usize,
    n_candidates: *mut usize,
    scores: *mut *const f32,
) -> FicoStatus {
    guard(|| {
        let s = obj(sim, "sim")?;
        if n_queries.is_null() || n_candidates.is_null() || scores.is_null() {
            return Err(Fail::Null("out"));
        }
        *n_queries = s.0.n_queries();
        *n_candidates = s.0.n_candidates();
        *scores = s.0.scores().as_ptr();
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_sim_free(s: *mut FicoSim) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

// ground truth

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_groups_read(path_: *const c_char, out: *mut *mut FicoGroups) -> FicoStatus {
    guard(|| put(out, FicoGroups(codec::read_groups(&path(path_)?)?)))
}

/// # Safety
/// `g` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_groups_free(g: *mut FicoGroups) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Reads labels-jsonl; `num_categories` 0 infers it from the data.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_labels_read(path_: *const c_char, num_categories: u32, out: *mut *mut FicoLabels) -> FicoStatus {
    guard(|| {
        let c = (num_categories > 0).then_some(num_categories);
        put(out, FicoLabels(codec::read_labels(&path(path_)?, c)?))
    })
}

/// # Safety
/// `l` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_labels_free(l: *mut FicoLabels) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

// evaluation

/// Instance-level recall at each of `ks`; `direction` is a `FicoDirection`.
///
/// # Safety
/// Handles must be live, `ks` must hold `n_ks` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_eval_instance(
    sim: *const FicoSim,
    groups: *const FicoGroups,
    direction: u32,
    ks: *const usize,
    n_ks: usize,
    out: *mut *mut FicoReport,
) -> FicoStatus {
    guard(|| {
        let d = match direction {
            0 => Direction::I2T,
            1 => Direction::T2I,
            other => return Err(FicoError::invalid(format!("unknown direction {other}")).into()),
        };
        let r = eval_instance(&obj(sim, "sim")?.0, &obj(groups, "groups")?.0, d, slice(ks, n_ks, "ks")?)?;
        put(out, FicoReport(r))
    })
}

/// Category-level mAP@k and P@k, optionally mAP@N and the 11-point curve.
///
/// # Safety
/// Handles must be live, `ks` must hold `n_ks` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_eval_category(
    sim: *const FicoSim,
    query_labels: *const FicoLabels,
    candidate_labels: *const FicoLabels,
    ks: *const usize,
    n_ks: usize,
    include_n: bool,
    pr_curve: bool,
    out: *mut *mut FicoReport,
) -> FicoStatus {
    guard(|| {
        let opts = CategoryOptions { include_n, pr_curve, ..Default::default() };
        let r = eval_category(
            &obj(sim, "sim")?.0,
            &obj(query_labels, "query_labels")?.0,
            &obj(candidate_labels, "candidate_labels")?.0,
            slice(ks, n_ks, "ks")?,
            &opts,
        )?;
        put(out, FicoReport(r))
    })
}

/// Looks up a metric such as `R@10` or `mAP@N`.
///
/// # Safety
/// `report` must be live, `name` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_report_metric(report: *const FicoReport, name: *const c_char, out: *mut f64) -> FicoStatus {
    guard(|| {
        let r = obj(report, "report")?;
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = CStr::from_ptr(name).to_string_lossy();
        let v = r.0.metric(&name).ok_or_else(|| FicoError::invalid(format!("no metric {name:?} in report")))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = v;
        Ok(())
    })
}

/// Canonical JSON of the report; release with [`fico_string_free`].
///
/// # Safety
/// `report` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_report_json(report: *const FicoReport, out: *mut *mut c_char) -> FicoStatus {
    guard(|| {
        let s = codec::report_to_json(&obj(report, "report")?.0)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = CString::new(s).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fico_report_write(report: *const FicoReport, path_: *const c_char) -> FicoStatus {
    guard(|| Ok(codec::write_report(&obj(report, "report")?.0, &path(path_)?)?))
}

/// # Safety
/// `r` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_report_free(r: *mut FicoReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

// indexes

/// Exhaustive index; copies the data.
///
/// # Safety
/// `data` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_build_flat(data: *const FicoEmbeddings, measure_: u32, out: *mut *mut FicoIndex) -> FicoStatus {
    guard(|| {
        let idx = FlatIndex::build(obj(data, "data")?.0.clone(), measure(measure_)?)?;
        put(out, FicoIndex(AnyIndex::Flat(idx)))
    })
}

/// # Safety
/// `data` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_build_hnsw(
    data: *const FicoEmbeddings,
    measure_: u32,
    m: usize,
    ef_construction: usize,
    seed: u64,
    out: *mut *mut FicoIndex,
) -> FicoStatus {
    guard(|| {
        let params = HnswParams { m, ef_construction, seed };
        let idx = HnswIndex::build(obj(data, "data")?.0.clone(), measure(measure_)?, params)?;
        put(out, FicoIndex(AnyIndex::Hnsw(idx)))
    })
}

/// # Safety
/// `codes` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_build_binary_flat(codes: *const FicoCodes, out: *mut *mut FicoIndex) -> FicoStatus {
    guard(|| put(out, FicoIndex(AnyIndex::BinaryFlat(BinaryFlatIndex::build(obj(codes, "codes")?.0.clone())))))
}

/// # Safety
/// `codes` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_build_binary_ivf(
    codes: *const FicoCodes,
    nlist: usize,
    iters: usize,
    seed: u64,
    out: *mut *mut FicoIndex,
) -> FicoStatus {
    guard(|| {
        let idx = BinaryIvfIndex::train(obj(codes, "codes")?.0.clone(), nlist, iters, seed)?;
        put(out, FicoIndex(AnyIndex::BinaryIvf(idx)))
    })
}

fn finish_search(index: &AnyIndex, ranked: RankedRetrieval) -> FicoRanked {
    FicoRanked { ranked, candidate_ids: index.candidate_ids().to_vec() }
}

/// Top-`k` search with dense queries (flat and HNSW indexes).
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_search_dense(
    index: *const FicoIndex,
    queries: *const FicoEmbeddings,
    k: usize,
    ef_search: usize,
    out: *mut *mut FicoRanked,
) -> FicoStatus {
    guard(|| {
        let idx = &obj(index, "index")?.0;
        let params = SearchParams { ef_search, ..SearchParams::default() };
        let r = idx.search(Representation::Dense(&obj(queries, "queries")?.0), k, &params)?;
        put(out, finish_search(idx, r))
    })
}

/// Top-`k` search with code queries (binary flat and IVF indexes).
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_search_codes(
    index: *const FicoIndex,
    queries: *const FicoCodes,
    k: usize,
    nprobe: usize,
    out: *mut *mut FicoRanked,
) -> FicoStatus {
    guard(|| {
        let idx = &obj(index, "index")?.0;
        let params = SearchParams { nprobe, ..SearchParams::default() };
        let r = idx.search(Representation::Codes(&obj(queries, "queries")?.0), k, &params)?;
        put(out, finish_search(idx, r))
    })
}

/// # Safety
/// `index` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fico_index_save(index: *const FicoIndex, path_: *const c_char) -> FicoStatus {
    guard(|| Ok(obj(index, "index")?.0.save(&path(path_)?)?))
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_load(path_: *const c_char, out: *mut *mut FicoIndex) -> FicoStatus {
    guard(|| put(out, FicoIndex(AnyIndex::load(&path(path_)?)?)))
}

/// Estimated resident size of the index in bytes.
///
/// # Safety
/// `index` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fico_index_memory_bytes(index: *const FicoIndex, out: *mut u64) -> FicoStatus {
    guard(|| {
        let b = obj(index, "index")?.0.memory_bytes();
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = b;
        Ok(())
    })
}

/// # Safety
/// `i` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_index_free(i: *mut FicoIndex) {
    if !i.is_null() {
        drop(Box::from_raw(i));
    }
}

/// # Safety
/// `r` must be live; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn fico_ranked_shape(r: *const FicoRanked, n_queries: *mut usize, k: *mut usize) -> FicoStatus {
    guard(|| {
        let r = obj(r, "ranked")?;
        if n_queries.is_null() || k.is_null() {
            return Err(Fail::Null("out"));
        }
        *n_queries = r.ranked.n_queries();
        *k = r.ranked.k();
        Ok(())
    })
}

/// Copies `n_queries * k` candidate IDs and scores, best first per query.
/// Unfilled slots get ID `UINT64_MAX` and score NaN. Either output may be NULL.
///
/// # Safety
/// `r` must be live; non-NULL outputs must hold `n_queries * k` values.
#[no_mangle]
pub unsafe extern "C" fn fico_ranked_copy(r: *const FicoRanked, ids: *mut u64, scores: *mut f32) -> FicoStatus {
    guard(|| {
        let r = obj(r, "ranked")?;
        let cols = r.ranked.columns();
        if !ids.is_null() {
            let out = std::slice::from_raw_parts_mut(ids, cols.len());
            for (o, &c) in out.iter_mut().zip(cols) {
                *o = if c == MISSING { u64::MAX } else { r.candidate_ids[c as usize] };
            }
        }
        if !scores.is_null() {
            let out = std::slice::from_raw_parts_mut(scores, cols.len());
            for ((o, &c), &s) in out.iter_mut().zip(cols).zip(r.ranked.scores()) {
                *o = if c == MISSING { f32::NAN } else { s };
            }
        }
        Ok(())
    })
}

/// # Safety
/// `r` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fico_ranked_free(r: *mut FicoRanked) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Exact bytes and GiB (two decimals) to store `n * dim` values of `dtype_bytes` each.
///
/// # Safety
/// Out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fico_storage_cost(n: u64, dim: u64, dtype_bytes: u64, bytes: *mut u64, gib: *mut f64) -> FicoStatus {
    guard(|| {
        if bytes.is_null() || gib.is_null() {
            return Err(Fail::Null("out"));
        }
        let c = fico::bench::storage_cost(n, dim, dtype_bytes);
        *bytes = u64::try_from(c.bytes).map_err(|_| FicoError::invalid("byte count exceeds 64 bits"))?;
        *gib = c.gib;
        Ok(())
    })
}
