//! C ABI for the ordinal embedding toolkit.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! every fallible call returns an [`OeStatus`] and leaves a descriptive
//! message retrievable with [`oe_last_error`]. All functions are
//! panic-safe at the FFI boundary. Handles must not be shared across
//! threads without external synchronization; distinct handles are
//! independent.
//!
//! The generated header lives at `include/ordembed.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ordembed::data_io;
use ordembed::eval::{self, KnnSplit};
use ordembed::oenn::{oenn_train, OennConfig};
use ordembed::optim;
use ordembed::triplets;
use ordembed::types::{AlgoConfig, Algorithm, Dataset, Embedding, TripletSet};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IoError = 3,
    NumericalError = 4,
    BufferTooSmall = 5,
    InternalError = 6,
}

/// Algorithm selector for `oe_train`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OeAlgorithm {
    Soe = 0,
    Ste = 1,
    Tste = 2,
    Ckl = 3,
    Cklx = 4,
    Gnmds = 5,
    Forte = 6,
    Oenn = 7,
}

impl From<OeAlgorithm> for Algorithm {
    fn from(a: OeAlgorithm) -> Self {
        match a {
            OeAlgorithm::Soe => Algorithm::Soe,
            OeAlgorithm::Ste => Algorithm::Ste,
            OeAlgorithm::Tste => Algorithm::Tste,
            OeAlgorithm::Ckl => Algorithm::Ckl,
            OeAlgorithm::Cklx => Algorithm::Cklx,
            OeAlgorithm::Gnmds => Algorithm::Gnmds,
            OeAlgorithm::Forte => Algorithm::Forte,
            OeAlgorithm::Oenn => Algorithm::Oenn,
        }
    }
}

/// Opaque ground-truth dataset handle.
pub struct OeDataset {
    inner: Dataset,
}

/// Opaque triplet set handle.
pub struct OeTripletSet {
    inner: TripletSet,
}

/// Opaque embedding handle (row-major `n x d` coordinates).
pub struct OeEmbedding {
    inner: Embedding,
}

/// Training configuration passed by value; obtain defaults from
/// `oe_train_options_default` and adjust fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OeTrainOptions {
    pub algorithm: OeAlgorithm,
    pub learning_rate: f64,
    /// Mini-batch cap; the effective batch is `min(batch_size, |T|)`.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// SOE hinge margin.
    pub margin: f64,
    /// CKL/CKLx scale parameter.
    pub mu: f64,
    /// t-STE degrees of freedom; values <= 0 select `max(d - 1, 1)`.
    pub alpha: f64,
    /// GNMDS/CKL trace regularizer.
    pub trace_reg: f64,
    /// FORTE backtracking factor.
    pub rho: f64,
    /// FORTE Armijo constant.
    pub c1: f64,
    /// OENN hidden width; 0 selects `max(120, ceil(2 d ln n))`.
    pub oenn_width: usize,
    /// OENN input code length; 0 selects `ceil(log2 n)`.
    pub oenn_encoding_length: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl AsRef<str>) {
    let sanitized = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &ordembed::Error) -> OeStatus {
    match err {
        ordembed::Error::Io(_) | ordembed::Error::Parse { .. } | ordembed::Error::Json(_) => {
            OeStatus::IoError
        }
        ordembed::Error::InvalidValue(_) => OeStatus::NumericalError,
        _ => OeStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> OeStatus) -> OeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            OeStatus::InternalError
        }
    }
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length
/// in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn oe_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let copy = bytes.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), copy);
                *buf.add(copy) = 0;
            }
        }
        bytes.len()
    })
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, OeStatus> {
    if ptr.is_null() {
        set_last_error("path is null");
        return Err(OeStatus::NullPointer);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_last_error("path is not valid UTF-8");
            Err(OeStatus::InvalidArgument)
        }
    }
}

fn emit<T>(value: T, out: *mut *mut T) -> OeStatus {
    if out.is_null() {
        set_last_error("output pointer is null");
        return OeStatus::NullPointer;
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    OeStatus::Ok
}

macro_rules! try_ffi {
    ($expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(e) => {
                let status = status_of(&e);
                set_last_error(e.to_string());
                return status;
            }
        }
    };
}

macro_rules! deref {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(v) => v,
            None => {
                set_last_error("handle is null");
                return OeStatus::NullPointer;
            }
        }
    };
}

// ---------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------

/// Generate `n` points uniform on `[0, 10]^dim` (unlabeled).
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn oe_dataset_uniform(
    n: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut OeDataset,
) -> OeStatus {
    guard(|| {
        let ds = try_ffi!(data_io::gen_uniform(n, dim, seed));
        emit(OeDataset { inner: ds }, out)
    })
}

/// Generate two separated unit-variance Gaussian blobs, labeled 0/1.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn oe_dataset_gmm2(
    n: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut OeDataset,
) -> OeStatus {
    guard(|| {
        let ds = try_ffi!(data_io::gen_gmm2(n, dim, seed));
        emit(OeDataset { inner: ds }, out)
    })
}

/// Read a dataset CSV (header `x0,x1,...[,label]`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oe_dataset_read_csv(
    path: *const c_char,
    out: *mut *mut OeDataset,
) -> OeStatus {
    guard(|| {
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        let ds = try_ffi!(data_io::read_dataset(path));
        emit(OeDataset { inner: ds }, out)
    })
}

/// Write a dataset as CSV.
///
/// # Safety
/// `ds` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn oe_dataset_write_csv(
    ds: *const OeDataset,
    path: *const c_char,
) -> OeStatus {
    guard(|| {
        let ds = deref!(ds);
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        try_ffi!(data_io::write_dataset(path, &ds.inner));
        OeStatus::Ok
    })
}

/// Item count, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn oe_dataset_n(ds: *const OeDataset) -> usize {
    unsafe { ds.as_ref() }.map_or(0, |d| d.inner.n())
}

/// Input dimension, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn oe_dataset_dim(ds: *const OeDataset) -> usize {
    unsafe { ds.as_ref() }.map_or(0, |d| d.inner.dim())
}

/// 1 when the dataset carries class labels.
#[no_mangle]
pub extern "C" fn oe_dataset_has_labels(ds: *const OeDataset) -> i32 {
    unsafe { ds.as_ref() }.map_or(0, |d| i32::from(d.inner.labels().is_some()))
}

/// Destroy a dataset handle (null is a no-op).
///
/// # Safety
/// `ds` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn oe_dataset_free(ds: *mut OeDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

// ---------------------------------------------------------------------
// Triplets
// ---------------------------------------------------------------------

/// `round(multiplier * n * d * ln n)`, at least 1: the canonical
/// training-triplet budget (the benchmark default is `multiplier = 2`).
#[no_mangle]
pub extern "C" fn oe_default_triplet_count(n: usize, d: usize, multiplier: f64) -> usize {
    triplets::default_triplet_count(n, d, multiplier)
}

/// Sample `count` ground-truth-consistent triplets.
///
/// # Safety
/// `ds` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oe_triplets_generate(
    ds: *const OeDataset,
    count: usize,
    seed: u64,
    out: *mut *mut OeTripletSet,
) -> OeStatus {
    guard(|| {
        let ds = deref!(ds);
        let ts = try_ffi!(triplets::generate_triplets(&ds.inner, count, seed));
        emit(OeTripletSet { inner: ts }, out)
    })
}

/// Sample the standard 10,000 held-out test triplets (stream disjoint
/// from the training stream of the same seed).
///
/// # Safety
/// `ds` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oe_triplets_test_sample(
    ds: *const OeDataset,
    seed: u64,
    out: *mut *mut OeTripletSet,
) -> OeStatus {
    guard(|| {
        let ds = deref!(ds);
        let ts = triplets::sample_test_triplets(&ds.inner, seed);
        emit(OeTripletSet { inner: ts }, out)
    })
}

/// Read a triplet file (`n=<N>` header, `i,j,k` lines).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oe_triplets_read(
    path: *const c_char,
    out: *mut *mut OeTripletSet,
) -> OeStatus {
    guard(|| {
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        let ts = try_ffi!(data_io::read_triplets(path));
        emit(OeTripletSet { inner: ts }, out)
    })
}

/// Write a triplet file.
///
/// # Safety
/// `ts` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn oe_triplets_write(
    ts: *const OeTripletSet,
    path: *const c_char,
) -> OeStatus {
    guard(|| {
        let ts = deref!(ts);
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        try_ffi!(data_io::write_triplets(path, &ts.inner));
        OeStatus::Ok
    })
}

/// Number of triplets, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn oe_triplets_len(ts: *const OeTripletSet) -> usize {
    unsafe { ts.as_ref() }.map_or(0, |t| t.inner.len())
}

/// Item count the triplets index, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn oe_triplets_n(ts: *const OeTripletSet) -> usize {
    unsafe { ts.as_ref() }.map_or(0, |t| t.inner.n())
}

/// Destroy a triplet-set handle (null is a no-op).
///
/// # Safety
/// `ts` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn oe_triplets_free(ts: *mut OeTripletSet) {
    if !ts.is_null() {
        drop(unsafe { Box::from_raw(ts) });
    }
}

// ---------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------

/// Per-algorithm default hyperparameters.
#[no_mangle]
pub extern "C" fn oe_train_options_default(algorithm: OeAlgorithm, seed: u64) -> OeTrainOptions {
    let cfg = AlgoConfig::for_algorithm(algorithm.into(), seed);
    OeTrainOptions {
        algorithm,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        seed,
        margin: cfg.margin,
        mu: cfg.mu,
        alpha: 0.0,
        trace_reg: cfg.trace_reg,
        rho: cfg.rho,
        c1: cfg.c1,
        oenn_width: 0,
        oenn_encoding_length: 0,
    }
}

/// Train an embedding of dimension `d` from a triplet set.
///
/// # Safety
/// `ts` and `options` must be live pointers; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oe_train(
    ts: *const OeTripletSet,
    d: usize,
    options: *const OeTrainOptions,
    out: *mut *mut OeEmbedding,
) -> OeStatus {
    guard(|| {
        let ts = deref!(ts);
        let opts = match unsafe { options.as_ref() } {
            Some(o) => *o,
            None => {
                set_last_error("options pointer is null");
                return OeStatus::NullPointer;
            }
        };
        let embedding = if opts.algorithm == OeAlgorithm::Oenn {
            let mut cfg = OennConfig::new(ts.inner.n(), d, opts.seed);
            cfg.learning_rate = opts.learning_rate;
            cfg.batch_size = opts.batch_size;
            cfg.max_epochs = opts.max_epochs;
            if opts.oenn_width > 0 {
                cfg.width = opts.oenn_width;
            }
            if opts.oenn_encoding_length > 0 {
                cfg.encoding_length = opts.oenn_encoding_length;
            }
            try_ffi!(oenn_train(&ts.inner, &cfg)).0.embedding
        } else {
            let mut cfg = AlgoConfig::for_algorithm(opts.algorithm.into(), opts.seed);
            cfg.learning_rate = opts.learning_rate;
            cfg.batch_size = opts.batch_size;
            cfg.max_epochs = opts.max_epochs;
            cfg.margin = opts.margin;
            cfg.mu = opts.mu;
            cfg.alpha = (opts.alpha > 0.0).then_some(opts.alpha);
            cfg.trace_reg = opts.trace_reg;
            cfg.rho = opts.rho;
            cfg.c1 = opts.c1;
            try_ffi!(optim::train(&ts.inner, &cfg, d)).embedding
        };
        emit(OeEmbedding { inner: embedding }, out)
    })
}

// ---------------------------------------------------------------------
// Embeddings and evaluation
// ---------------------------------------------------------------------

/// Row count, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn oe_embedding_rows(emb: *const OeEmbedding) -> usize {
    unsafe { emb.as_ref() }.map_or(0, |e| e.inner.n())
}

/// Column count, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn oe_embedding_cols(emb: *const OeEmbedding) -> usize {
    unsafe { emb.as_ref() }.map_or(0, |e| e.inner.d())
}

/// Copy the coordinates row-major into `buf` (`len` must be at least
/// `rows * cols`).
///
/// # Safety
/// `emb` must be a live handle; `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn oe_embedding_copy_coords(
    emb: *const OeEmbedding,
    buf: *mut f64,
    len: usize,
) -> OeStatus {
    guard(|| {
        let emb = deref!(emb);
        if buf.is_null() {
            set_last_error("buffer is null");
            return OeStatus::NullPointer;
        }
        let (rows, cols) = (emb.inner.n(), emb.inner.d());
        if len < rows * cols {
            set_last_error(format!("buffer holds {len} values, need {}", rows * cols));
            return OeStatus::BufferTooSmall;
        }
        let coords = emb.inner.coords();
        for r in 0..rows {
            for c in 0..cols {
                unsafe { *buf.add(r * cols + c) = coords[(r, c)] };
            }
        }
        OeStatus::Ok
    })
}

/// Write an embedding as CSV (dataset format without labels).
///
/// # Safety
/// `emb` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn oe_embedding_write_csv(
    emb: *const OeEmbedding,
    path: *const c_char,
) -> OeStatus {
    guard(|| {
        let emb = deref!(emb);
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        try_ffi!(data_io::write_embedding(path, &emb.inner));
        OeStatus::Ok
    })
}

/// Read an embedding from CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oe_embedding_read_csv(
    path: *const c_char,
    out: *mut *mut OeEmbedding,
) -> OeStatus {
    guard(|| {
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        let emb = try_ffi!(data_io::read_embedding(path));
        emit(OeEmbedding { inner: emb }, out)
    })
}

/// Destroy an embedding handle (null is a no-op).
///
/// # Safety
/// `emb` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn oe_embedding_free(emb: *mut OeEmbedding) {
    if !emb.is_null() {
        drop(unsafe { Box::from_raw(emb) });
    }
}

/// Fraction of triplets the embedding violates (ties satisfied).
///
/// # Safety
/// `emb` and `ts` must be live handles; `out` must point to a double.
#[no_mangle]
pub unsafe extern "C" fn oe_triplet_error(
    emb: *const OeEmbedding,
    ts: *const OeTripletSet,
    out: *mut f64,
) -> OeStatus {
    guard(|| {
        let emb = deref!(emb);
        let ts = deref!(ts);
        if out.is_null() {
            set_last_error("output pointer is null");
            return OeStatus::NullPointer;
        }
        let v = try_ffi!(eval::triplet_error(&emb.inner, &ts.inner));
        unsafe { *out = v };
        OeStatus::Ok
    })
}

/// Standardized Procrustes disparity between an embedding and the
/// dataset's ground-truth coordinates.
///
/// # Safety
/// `emb` and `ds` must be live handles; `out` must point to a double.
#[no_mangle]
pub unsafe extern "C" fn oe_procrustes_disparity(
    emb: *const OeEmbedding,
    ds: *const OeDataset,
    out: *mut f64,
) -> OeStatus {
    guard(|| {
        let emb = deref!(emb);
        let ds = deref!(ds);
        if out.is_null() {
            set_last_error("output pointer is null");
            return OeStatus::NullPointer;
        }
        let v = try_ffi!(eval::procrustes_disparity(&emb.inner, ds.inner.points()));
        unsafe { *out = v };
        OeStatus::Ok
    })
}

/// kNN misclassification rate on a seeded 70/30 split with
/// `k = max(1, floor(ln n))`. Fails on unlabeled datasets.
///
/// # Safety
/// `emb` and `ds` must be live handles; `out` must point to a double.
#[no_mangle]
pub unsafe extern "C" fn oe_knn_error(
    emb: *const OeEmbedding,
    ds: *const OeDataset,
    seed: u64,
    out: *mut f64,
) -> OeStatus {
    guard(|| {
        let emb = deref!(emb);
        let ds = deref!(ds);
        if out.is_null() {
            set_last_error("output pointer is null");
            return OeStatus::NullPointer;
        }
        let Some(labels) = ds.inner.labels() else {
            set_last_error("dataset has no labels");
            return OeStatus::InvalidArgument;
        };
        let v = try_ffi!(eval::knn_error(
            &emb.inner,
            labels,
            &KnnSplit::for_n(ds.inner.n(), seed)
        ));
        unsafe { *out = v };
        OeStatus::Ok
    })
}
