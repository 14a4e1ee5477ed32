//! C ABI over the mvseq library.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns an
//! [`MvseqStatus`]; the message for the most recent failure on the calling
//! thread is available from [`mvseq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mvseq::compress::{compress_corpus, compress_document, CompressionConfig, Method};
use mvseq::{Corpus, DocumentRecord, Error, IdfTable, TokenMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvseqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    Data = 6,
    Panic = 7,
}

impl From<&Error> for MvseqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => MvseqStatus::Io,
            Error::Manifest { .. }
            | Error::UnsupportedVersion(_)
            | Error::SizeMismatch { .. }
            | Error::Parse { .. }
            | Error::Json { .. } => MvseqStatus::Format,
            Error::DimMismatch { .. } => MvseqStatus::DimensionMismatch,
            Error::InvalidArgument(_) => MvseqStatus::InvalidArgument,
            Error::Document { source, .. } | Error::SweepCell { source, .. } => (&**source).into(),
            _ => MvseqStatus::Data,
        }
    }
}

/// Dense row-major `f32` matrix.
pub struct MvseqMatrix(TokenMatrix);

/// Read-only corpus directory.
pub struct MvseqCorpus(Corpus);

/// Corpus-level document frequencies for IDF scoring.
pub struct MvseqIdfTable(IdfTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: MvseqStatus, message: impl Into<String>) -> MvseqStatus {
    set_error(message.into());
    status
}

/// Runs `f`, recording its error message and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), MvseqStatus>) -> MvseqStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MvseqStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(MvseqStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> MvseqStatus {
    fail((&e).into(), e.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, MvseqStatus> {
    p.as_ref()
        .ok_or_else(|| fail(MvseqStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, MvseqStatus> {
    p.as_mut()
        .ok_or_else(|| fail(MvseqStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, MvseqStatus> {
    if p.is_null() {
        return Err(fail(MvseqStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(MvseqStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], MvseqStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MvseqStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next mvseq call on the same thread.
#[no_mangle]
pub extern "C" fn mvseq_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of vectors kept for `len` tokens at keep ratio `ratio`, or 0 when
/// the ratio is outside (0, 1].
#[no_mangle]
pub extern "C" fn mvseq_budget(len: usize, ratio: f64) -> usize {
    if mvseq::compress::check_ratio(ratio).is_err() {
        return 0;
    }
    mvseq::budget(len, ratio)
}

/// Copies `rows * dim` floats from `data` into a new matrix.
///
/// # Safety
/// `data` must point to `rows * dim` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvseq_matrix_new(
    data: *const f32,
    rows: usize,
    dim: usize,
    out: *mut *mut MvseqMatrix,
) -> MvseqStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = rows
            .checked_mul(dim)
            .ok_or_else(|| fail(MvseqStatus::InvalidArgument, "rows * dim overflows"))?;
        let values = slice(data, n, "data")?.to_vec();
        let m = TokenMatrix::new(rows, dim, values).map_err(lib)?;
        *out = boxed(MvseqMatrix(m));
        Ok(())
    })
}

/// # Safety
/// `matrix` must be null or a handle from this library that was not freed.
#[no_mangle]
pub unsafe extern "C" fn mvseq_matrix_free(matrix: *mut MvseqMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_matrix_rows(matrix: *const MvseqMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_matrix_dim(matrix: *const MvseqMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.dim())
}

/// Row-major values, `rows * dim` long, owned by the handle.
///
/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_matrix_data(matrix: *const MvseqMatrix) -> *const f32 {
    matrix.as_ref().map_or(ptr::null(), |m| m.0.values().as_ptr())
}

/// `Σ_i max_j <q_i, d_j>` in double precision.
///
/// # Safety
/// `query` and `doc` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvseq_maxsim(
    query: *const MvseqMatrix,
    doc: *const MvseqMatrix,
    out: *mut f64,
) -> MvseqStatus {
    guard(|| {
        let q = deref(query, "query")?;
        let d = deref(doc, "doc")?;
        let out = out_ptr(out, "out")?;
        *out = mvseq::maxsim(&q.0, &d.0).map_err(lib)?;
        Ok(())
    })
}

/// Compresses one document. `method` is a method name such as
/// `"pool_hierarchical"`. `attention` (length = rows) and `token_ids` with
/// `idf` are optional and only read by the methods that need them. The
/// result is unit-normalized with row 0 kept as is.
///
/// # Safety
/// Pointer arguments must be null or valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mvseq_compress(
    embeddings: *const MvseqMatrix,
    attention: *const f32,
    token_ids: *const u32,
    idf: *const MvseqIdfTable,
    method: *const c_char,
    ratio: f64,
    seed: u64,
    out: *mut *mut MvseqMatrix,
) -> MvseqStatus {
    guard(|| {
        let m = deref(embeddings, "embeddings")?;
        let out = out_ptr(out, "out")?;
        let method: Method = string(method, "method")?.parse().map_err(lib)?;
        let rows = m.0.rows();
        let mut doc = DocumentRecord::new("ffi", m.0.clone());
        if !attention.is_null() {
            doc = doc.with_attention(slice(attention, rows, "attention")?.to_vec());
        }
        if !token_ids.is_null() {
            doc = doc.with_token_ids(slice(token_ids, rows, "token_ids")?.to_vec());
        }
        let config = CompressionConfig::new(method, ratio).with_seed(seed);
        config.validate().map_err(lib)?;
        let table = idf.as_ref().map(|t| &t.0);
        let compressed = compress_document(&doc, &config, table).map_err(lib)?;
        *out = boxed(MvseqMatrix(compressed.embeddings));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvseq_corpus_open(path: *const c_char, out: *mut *mut MvseqCorpus) -> MvseqStatus {
    guard(|| {
        let path = PathBuf::from(string(path, "path")?);
        let out = out_ptr(out, "out")?;
        *out = boxed(MvseqCorpus(Corpus::open(&path).map_err(lib)?));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_corpus_free(corpus: *mut MvseqCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_corpus_len(corpus: *const MvseqCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_corpus_dim(corpus: *const MvseqCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.dim())
}

/// Reads the embeddings of the document at manifest position `index`.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvseq_corpus_embeddings(
    corpus: *const MvseqCorpus,
    index: usize,
    out: *mut *mut MvseqMatrix,
) -> MvseqStatus {
    guard(|| {
        let c = deref(corpus, "corpus")?;
        let out = out_ptr(out, "out")?;
        if index >= c.0.len() {
            return Err(fail(
                MvseqStatus::InvalidArgument,
                format!("index {index} out of range for {} documents", c.0.len()),
            ));
        }
        let doc = c.0.get_at(index).map_err(lib)?;
        *out = boxed(MvseqMatrix(doc.embeddings));
        Ok(())
    })
}

/// Compresses every document of the corpus at `input` into a new corpus
/// directory `output`. IDF methods build their table from the input.
///
/// # Safety
/// `input`, `output` and `method` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mvseq_compress_corpus(
    input: *const c_char,
    output: *const c_char,
    method: *const c_char,
    ratio: f64,
    seed: u64,
) -> MvseqStatus {
    guard(|| {
        let input = PathBuf::from(string(input, "input")?);
        let output = PathBuf::from(string(output, "output")?);
        let method: Method = string(method, "method")?.parse().map_err(lib)?;
        let corpus = Corpus::open(&input).map_err(lib)?;
        let config = CompressionConfig::new(method, ratio).with_seed(seed);
        compress_corpus(&corpus, &config, None, &output).map_err(lib)?;
        Ok(())
    })
}

/// Builds the IDF table of an opened corpus.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvseq_idf_build(corpus: *const MvseqCorpus, out: *mut *mut MvseqIdfTable) -> MvseqStatus {
    guard(|| {
        let c = deref(corpus, "corpus")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(MvseqIdfTable(mvseq::build_idf_table(&c.0).map_err(lib)?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvseq_idf_load(path: *const c_char, out: *mut *mut MvseqIdfTable) -> MvseqStatus {
    guard(|| {
        let path = PathBuf::from(string(path, "path")?);
        let out = out_ptr(out, "out")?;
        *out = boxed(MvseqIdfTable(IdfTable::load(&path).map_err(lib)?));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvseq_idf_free(table: *mut MvseqIdfTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}
