use std::ffi::{CStr, CString};
use std::ptr;

use laqfuse_ffi::*;

fn last_error() -> String {
    let p = lqf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn join_pairs_roundtrip() {
    let r = [2i64, 3, 4];
    let s = [4i64, 2, 7, 2];
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            lqf_mm_join(r.as_ptr(), r.len(), s.as_ptr(), s.len(), &mut m),
            LqfStatus::Ok
        );
        assert_eq!(lqf_row_match_nnz(m), 3);
        let (mut a, mut b, mut n) = ([0usize; 8], [0usize; 8], 0usize);
        assert_eq!(
            lqf_row_match_pairs(m, a.as_mut_ptr(), b.as_mut_ptr(), 8, &mut n),
            LqfStatus::Ok
        );
        let mut pairs: Vec<(usize, usize)> =
            a[..n].iter().copied().zip(b[..n].iter().copied()).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, [(0, 1), (0, 3), (2, 0)]);
        assert_eq!(
            lqf_row_match_pairs(m, a.as_mut_ptr(), b.as_mut_ptr(), 1, &mut n),
            LqfStatus::Ok
        );
        assert_eq!(n, 1);
        lqf_row_match_free(m);
    }
}

#[test]
fn null_inputs_are_reported() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            lqf_mm_join(ptr::null(), 3, ptr::null(), 0, &mut m),
            LqfStatus::NullPointer
        );
        assert!(last_error().contains("left"));
        assert_eq!(
            lqf_mm_join(ptr::null(), 0, ptr::null(), 0, &mut m),
            LqfStatus::Ok
        );
        assert_eq!(lqf_row_match_nnz(m), 0);
        lqf_row_match_free(m);
        assert_eq!(lqf_row_match_nnz(ptr::null()), 0);
        lqf_row_match_free(ptr::null_mut());
    }
    assert!(lqf_last_error().is_null());
}

#[test]
fn tree_compile_and_predict() {
    let text = CString::new("N 0 0 0.5 1 2\nL 1 10\nN 2 1 0.25 3 4\nL 3 11\nL 4 12\n").unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(
            lqf_tree_compile(text.as_ptr(), 2, &mut t),
            LqfStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(lqf_tree_leaf_count(t), 3);
        assert_eq!(lqf_tree_input_width(t), 2);
        let x = [0.9, 0.0, 0.5, 0.9, 0.1, 0.25];
        let mut labels = [0i64; 3];
        assert_eq!(
            lqf_tree_predict(t, x.as_ptr(), 3, 2, labels.as_mut_ptr()),
            LqfStatus::Ok
        );
        assert_eq!(labels, [10, 11, 12]);
        assert_eq!(
            lqf_tree_predict(t, x.as_ptr(), 2, 3, labels.as_mut_ptr()),
            LqfStatus::Shape
        );
        lqf_tree_free(t);

        let bad = CString::new("N 0 0 0.5 1 1\nL 1 1\n").unwrap();
        assert_eq!(lqf_tree_compile(bad.as_ptr(), 2, &mut t), LqfStatus::Tree);
        let garbage = CString::new("0 branch\n").unwrap();
        assert_eq!(
            lqf_tree_compile(garbage.as_ptr(), 2, &mut t),
            LqfStatus::Format
        );
        assert!(last_error().starts_with("line 1"));
    }
}

#[test]
fn fused_linear_matches_direct_product() {
    // k = 3 inputs: dim 0 supplies input 2, dim 1 supplies inputs 0 and 1.
    let w = [1.0, 2.0, 0.5, -1.0, 3.0, 0.0];
    let d0 = [10.0, 20.0];
    let d1 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let data = [d0.as_ptr(), d1.as_ptr()];
    let rows = [2usize, 3];
    let cols = [1usize, 2];
    let t0 = [2usize];
    let t1 = [0usize, 1];
    let targets = [t0.as_ptr(), t1.as_ptr()];
    let mut f = ptr::null_mut();
    unsafe {
        let st = lqf_fused_linear_new(
            w.as_ptr(),
            3,
            2,
            2,
            data.as_ptr(),
            rows.as_ptr(),
            cols.as_ptr(),
            targets.as_ptr(),
            &mut f,
        );
        assert_eq!(st, LqfStatus::Ok, "{}", last_error());
        assert_eq!(lqf_fused_linear_output_width(f), 2);
        let r0 = [1usize, 0, 1];
        let r1 = [0usize, 2, 1];
        let idx = [r0.as_ptr(), r1.as_ptr()];
        let mut out = [0.0; 6];
        assert_eq!(
            lqf_fused_linear_apply(f, 3, idx.as_ptr(), out.as_mut_ptr()),
            LqfStatus::Ok
        );
        for t in 0..3 {
            let x = [d1[2 * r1[t]], d1[2 * r1[t] + 1], d0[r0[t]]];
            for c in 0..2 {
                let want: f64 = (0..3).map(|i| x[i] * w[i * 2 + c]).sum();
                assert!((out[t * 2 + c] - want).abs() < 1e-12);
            }
        }
        let oob = [5usize, 0, 0];
        let idx = [oob.as_ptr(), r1.as_ptr()];
        assert_eq!(
            lqf_fused_linear_apply(f, 3, idx.as_ptr(), out.as_mut_ptr()),
            LqfStatus::Index
        );
        lqf_fused_linear_free(f);
    }
}

#[test]
fn cost_functions() {
    let r = [1000.0, 1000.0];
    let mut v = 0.0;
    unsafe {
        assert_eq!(
            lqf_speedup_ratio_linear(1e6, 128.0, 2.0, r.as_ptr(), 2, &mut v),
            LqfStatus::Ok
        );
        assert!(v > 64.0);
        assert!(lqf_decide_fusion(v, 1.0));
        let mut t = 0.0;
        assert_eq!(
            lqf_speedup_ratio_tree(1e6, 16.0, 16.0, 0.0, r.as_ptr(), 2, &mut t),
            LqfStatus::Ok
        );
        let mut t2 = 0.0;
        assert_eq!(
            lqf_speedup_ratio_tree(1e6, 16.0, 16.0, 16.0, r.as_ptr(), 2, &mut t2),
            LqfStatus::Ok
        );
        assert_eq!(t, t2);
        assert_eq!(
            lqf_speedup_ratio_linear(0.0, 1.0, 1.0, r.as_ptr(), 2, &mut v),
            LqfStatus::Domain
        );
    }
    assert!(!lqf_decide_fusion(1.0, 1.0));
}
