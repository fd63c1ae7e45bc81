//! C ABI over the `laqfuse` engine.
//!
//! Every fallible function returns an [`LqfStatus`]; on failure the message
//! is available from [`lqf_last_error`] on the same thread until the next
//! call. Handles are opaque and must be released with their `_free`
//! function. Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use laqfuse::fusion::{
    apply_fused_linear, decide_fusion, prefuse_linear, speedup_ratio_linear, speedup_ratio_tree,
    CostInputs, FusedLinear,
};
use laqfuse::laqops::{mm_join, ColumnMap, RowMatch};
use laqfuse::mlops::{compile_tree, predict_tree, LinearOperator, TreeLA, TreeModel};
use laqfuse::{DenseMat, Error, SparseCsr};

/// Result codes. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqfStatus {
    Ok = 0,
    NullPointer = 1,
    Index = 2,
    Shape = 3,
    Format = 4,
    Name = 5,
    Mapping = 6,
    Type = 7,
    Domain = 8,
    DuplicateKey = 9,
    Tree = 10,
    Model = 11,
    Capacity = 12,
    Gen = 13,
    Verification = 14,
    Io = 15,
    Utf8 = 16,
    Panic = 17,
}

impl From<&Error> for LqfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Index(_) => LqfStatus::Index,
            Error::Shape(_) => LqfStatus::Shape,
            Error::Format { .. } => LqfStatus::Format,
            Error::Name(_) => LqfStatus::Name,
            Error::Mapping(_) => LqfStatus::Mapping,
            Error::Type(_) => LqfStatus::Type,
            Error::Domain(_) => LqfStatus::Domain,
            Error::DuplicateKey { .. } => LqfStatus::DuplicateKey,
            Error::Tree(_) => LqfStatus::Tree,
            Error::Model(_) => LqfStatus::Model,
            Error::Capacity(_) => LqfStatus::Capacity,
            Error::Gen(_) => LqfStatus::Gen,
            Error::Verification(_) => LqfStatus::Verification,
            Error::Io(_) => LqfStatus::Io,
        }
    }
}

/// Join result: matching `(left row, right row)` pairs.
pub struct LqfRowMatch(RowMatch);

/// Compiled decision tree.
pub struct LqfTree(TreeLA);

/// Linear model pre-fused with its dimension tables.
pub struct LqfFusedLinear(FusedLinear);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Utf8,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LqfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LqfStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LqfStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("input is not valid UTF-8".into());
            LqfStatus::Utf8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            LqfStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            LqfStatus::Panic
        }
    }
}

/// Builds a slice, allowing a null pointer only when `len == 0`.
unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn boxed_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn lqf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Equi-join of two key columns.
///
/// # Safety
/// `left` and `right` must point to `n_left` and `n_right` keys; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn lqf_mm_join(
    left: *const i64,
    n_left: usize,
    right: *const i64,
    n_right: usize,
    out: *mut *mut LqfRowMatch,
) -> LqfStatus {
    guard(|| {
        let l = slice_in(left, n_left, "left")?;
        let r = slice_in(right, n_right, "right")?;
        boxed_out(out, LqfRowMatch(mm_join(l, r)?))
    })
}

/// Number of matching pairs, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lqf_row_match_nnz(m: *const LqfRowMatch) -> usize {
    m.as_ref().map_or(0, |m| m.0.nnz())
}

/// Copies up to `cap` pairs, in join output order, and stores the count in
/// `written`.
///
/// # Safety
/// `left_rows` and `right_rows` must have room for `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn lqf_row_match_pairs(
    m: *const LqfRowMatch,
    left_rows: *mut usize,
    right_rows: *mut usize,
    cap: usize,
    written: *mut usize,
) -> LqfStatus {
    guard(|| {
        let m = handle(m, "row match")?;
        let n = cap.min(m.0.nnz());
        let lo = slice_out(left_rows, n, "left_rows")?;
        let ro = slice_out(right_rows, n, "right_rows")?;
        for (i, (r, s)) in m.0.pairs().take(n).enumerate() {
            lo[i] = r;
            ro[i] = s;
        }
        if written.is_null() {
            return Err(Fail::Null("written"));
        }
        *written = n;
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lqf_row_match_free(m: *mut LqfRowMatch) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Parses a tree in text form and compiles it for inputs of width `k`.
///
/// # Safety
/// `text` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lqf_tree_compile(
    text: *const c_char,
    k: usize,
    out: *mut *mut LqfTree,
) -> LqfStatus {
    guard(|| {
        if text.is_null() {
            return Err(Fail::Null("text"));
        }
        let s = CStr::from_ptr(text).to_str().map_err(|_| Fail::Utf8)?;
        let model = TreeModel::parse(s)?;
        boxed_out(out, LqfTree(compile_tree(&model, k)?))
    })
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lqf_tree_leaf_count(t: *const LqfTree) -> usize {
    t.as_ref().map_or(0, |t| t.0.leaf_count())
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lqf_tree_input_width(t: *const LqfTree) -> usize {
    t.as_ref().map_or(0, |t| t.0.input_width())
}

/// Predicts a leaf label for each of `rows` inputs of width `cols`.
///
/// # Safety
/// `x` must hold `rows * cols` values and `labels` room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn lqf_tree_predict(
    t: *const LqfTree,
    x: *const f64,
    rows: usize,
    cols: usize,
    labels: *mut i64,
) -> LqfStatus {
    guard(|| {
        let t = handle(t, "tree")?;
        let n = rows
            .checked_mul(cols)
            .ok_or(Fail::Lib(Error::Shape("rows * cols overflows".into())))?;
        let data = slice_in(x, n, "x")?.to_vec();
        let out = slice_out(labels, rows, "labels")?;
        let pred = predict_tree(&DenseMat::new(rows, cols, data)?, &t.0)?;
        out.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lqf_tree_free(t: *mut LqfTree) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Pre-fuses a `k x l` weight matrix with `n_dims` dimension tables.
/// Column `c` of dimension `j` feeds model input `targets[j][c]`.
///
/// # Safety
/// `weights` must hold `k * l` values. Each of `dim_data`, `dim_rows`,
/// `dim_cols` and `targets` must hold `n_dims` entries, with `dim_data[j]`
/// holding `dim_rows[j] * dim_cols[j]` values and `targets[j]` holding
/// `dim_cols[j]` positions.
#[no_mangle]
pub unsafe extern "C" fn lqf_fused_linear_new(
    weights: *const f64,
    k: usize,
    l: usize,
    n_dims: usize,
    dim_data: *const *const f64,
    dim_rows: *const usize,
    dim_cols: *const usize,
    targets: *const *const usize,
    out: *mut *mut LqfFusedLinear,
) -> LqfStatus {
    guard(|| {
        let w = slice_in(weights, k * l, "weights")?.to_vec();
        let op = LinearOperator::new(DenseMat::new(k, l, w)?)?;
        let data = slice_in(dim_data, n_dims, "dim_data")?;
        let rows = slice_in(dim_rows, n_dims, "dim_rows")?;
        let cols = slice_in(dim_cols, n_dims, "dim_cols")?;
        let tgts = slice_in(targets, n_dims, "targets")?;
        let mut mats = Vec::with_capacity(n_dims);
        let mut maps = Vec::with_capacity(n_dims);
        for j in 0..n_dims {
            let d = slice_in(data[j], rows[j] * cols[j], "dim_data[j]")?.to_vec();
            mats.push(DenseMat::new(rows[j], cols[j], d)?);
            let pairs: Vec<(usize, usize)> = slice_in(tgts[j], cols[j], "targets[j]")?
                .iter()
                .copied()
                .enumerate()
                .collect();
            maps.push(ColumnMap::placement(cols[j], k, &pairs)?);
        }
        boxed_out(out, LqfFusedLinear(prefuse_linear(&mats, &maps, &op)?))
    })
}

/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lqf_fused_linear_output_width(f: *const LqfFusedLinear) -> usize {
    f.as_ref().map_or(0, |f| f.0.output_width())
}

/// Evaluates the fused model for `n` joined rows. `dim_row[j][t]` is the
/// row of dimension `j` matched by output row `t`. Writes `n * l` values.
///
/// # Safety
/// `dim_row` must hold one array of `n` indices per dimension the handle
/// was built with; `out` must have room for `n * l` values.
#[no_mangle]
pub unsafe extern "C" fn lqf_fused_linear_apply(
    f: *const LqfFusedLinear,
    n: usize,
    dim_row: *const *const usize,
    out: *mut f64,
) -> LqfStatus {
    guard(|| {
        let f = handle(f, "fused model")?;
        let parts = f.0.partials();
        let rows = slice_in(dim_row, parts.len(), "dim_row")?;
        let mut maps = Vec::with_capacity(parts.len());
        for (j, p) in parts.iter().enumerate() {
            let idx = slice_in(rows[j], n, "dim_row[j]")?;
            let trips: Vec<(usize, usize, f64)> =
                idx.iter().enumerate().map(|(t, &r)| (t, r, 1.0)).collect();
            maps.push(SparseCsr::from_triplets(n, p.rows(), &trips)?);
        }
        let res = apply_fused_linear(&maps, &f.0)?;
        slice_out(out, res.rows() * res.cols(), "out")?.copy_from_slice(res.data());
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lqf_fused_linear_free(f: *mut LqfFusedLinear) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

unsafe fn cost_inputs(
    i: f64,
    k: f64,
    l: f64,
    p: f64,
    r: *const f64,
    n_r: usize,
) -> Result<CostInputs, Fail> {
    Ok(CostInputs {
        i,
        k,
        l,
        p: (p > 0.0).then_some(p),
        r: slice_in(r, n_r, "r")?.to_vec(),
    })
}

/// Predicted non-fused / fused cost ratio for a linear model.
///
/// # Safety
/// `r` must hold `n_r` dimension row counts; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lqf_speedup_ratio_linear(
    i: f64,
    k: f64,
    l: f64,
    r: *const f64,
    n_r: usize,
    out: *mut f64,
) -> LqfStatus {
    guard(|| {
        let v = speedup_ratio_linear(&cost_inputs(i, k, l, 0.0, r, n_r)?)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// Same for a tree with `l` leaves and `p` internal nodes; `p <= 0` means
/// `p = k`.
///
/// # Safety
/// As for [`lqf_speedup_ratio_linear`].
#[no_mangle]
pub unsafe extern "C" fn lqf_speedup_ratio_tree(
    i: f64,
    k: f64,
    l: f64,
    p: f64,
    r: *const f64,
    n_r: usize,
    out: *mut f64,
) -> LqfStatus {
    guard(|| {
        let v = speedup_ratio_tree(&cost_inputs(i, k, l, p, r, n_r)?)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// True when `ratio` exceeds `threshold`.
#[no_mangle]
pub extern "C" fn lqf_decide_fusion(ratio: f64, threshold: f64) -> bool {
    decide_fusion(ratio, threshold)
}
