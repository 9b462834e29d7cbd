use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lagdnn_ffi::*;

fn last_error() -> String {
    let p = lagdnn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn brute_max(f: &[f64], r: usize) -> f64 {
    (0u32..1 << r)
        .map(|m| {
            let v: Vec<f64> = (0..r).map(|i| ((m >> i) & 1) as f64).collect();
            (0..r)
                .flat_map(|i| (0..r).map(move |j| (i, j)))
                .map(|(i, j)| v[i] * f[i * r + j] * v[j])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn bqp_round_trip() {
    let f = [3.0, -5.0, 2.0, -5.0, 4.0, -1.0, 2.0, -1.0, -6.0];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lagdnn_problem_bqp(f.as_ptr(), 3, 1, &mut p) }, LagdnnStatus::Ok);
    assert_eq!(unsafe { lagdnn_problem_size(p) }, 3);

    let mut params = lagdnn_params_default();
    params.method = LagdnnMethod::Newton;
    let mut res = ptr::null_mut();
    let st = unsafe { lagdnn_solve(p, &params, &mut res) };
    assert_eq!(st, LagdnnStatus::Ok, "{}", last_error());
    let lb = unsafe { lagdnn_result_lb_valid(res) };
    // maximization is solved as min of -F, so the bound sits below -max
    let opt = -brute_max(&f, 3);
    assert!(lb <= opt + 1e-8 * (1.0 + opt.abs()), "lb {lb} opt {opt}");
    assert!(lb > opt - 1.0, "lb {lb} opt {opt}");
    assert_eq!(unsafe { lagdnn_result_status(res) }, 0);

    let n = unsafe { lagdnn_result_outer_iters(res) };
    assert!(n >= 1);
    let mut e = LagdnnTraceEntry::default();
    assert_eq!(unsafe { lagdnn_result_trace(res, n - 1, &mut e) }, LagdnnStatus::Ok);
    assert_eq!(e.y, unsafe { lagdnn_result_y_final(res) });
    assert_eq!(unsafe { lagdnn_result_trace(res, n, &mut e) }, LagdnnStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lagdnn_result_json(res, &mut s) }, LagdnnStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    assert_eq!(json["lb_valid"].as_f64().unwrap(), lb);
    assert_eq!(json["method"], "newton");
    unsafe {
        lagdnn_string_free(s);
        lagdnn_result_free(res);
        lagdnn_problem_free(p);
    }
}

#[test]
fn qap_tight_rho_and_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.dat");
    std::fs::write(&path, "3\n0 1 2\n1 0 3\n2 3 0\n\n0 5 1\n5 0 4\n1 4 0\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lagdnn_problem_read(c.as_ptr(), &mut p) }, LagdnnStatus::Ok);
    let mut params = lagdnn_params_default();
    params.rho_mode = LagdnnRhoMode::QapTight;
    params.max_apg_iter = 1500;
    params.delta = 1e-2;
    let mut res = ptr::null_mut();
    let st = unsafe { lagdnn_solve(p, &params, &mut res) };
    assert!(matches!(st, LagdnnStatus::Ok | LagdnnStatus::Partial));
    // exact optimum over the 6 permutations
    let a = [[0., 1., 2.], [1., 0., 3.], [2., 3., 0.]];
    let b = [[0., 5., 1.], [5., 0., 4.], [1., 4., 0.]];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let opt = perms
        .iter()
        .map(|p| (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[i][j] * b[p[i]][p[j]]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let lb = unsafe { lagdnn_result_lb_valid(res) };
    assert!(lb <= opt + 1e-8 * (1.0 + opt), "lb {lb} opt {opt}");
    unsafe {
        lagdnn_result_free(res);
        lagdnn_problem_free(p);
    }
}

#[test]
fn errors_are_reported() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lagdnn_problem_bqp(ptr::null(), 2, 0, &mut p) }, LagdnnStatus::NullPointer);
    let f = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(unsafe { lagdnn_problem_bqp(f.as_ptr(), 2, 0, &mut p) }, LagdnnStatus::InvalidArgument);
    assert!(last_error().contains("symmetric"));
    assert_eq!(unsafe { lagdnn_problem_bqp(f.as_ptr(), 0, 0, &mut p) }, LagdnnStatus::InvalidArgument);

    let missing = CString::new("/definitely/not/here.sparse").unwrap();
    assert_eq!(unsafe { lagdnn_problem_read(missing.as_ptr(), &mut p) }, LagdnnStatus::Io);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sparse");
    std::fs::write(&bad, "2 1\n1 3 4\n").unwrap();
    let c = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lagdnn_problem_read(c.as_ptr(), &mut p) }, LagdnnStatus::Parse);
    assert!(last_error().contains("line 2"), "{}", last_error());

    // QAP-tight rho on a binary QP
    let f = [1.0, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { lagdnn_problem_bqp(f.as_ptr(), 2, 0, &mut p) }, LagdnnStatus::Ok);
    let mut params = lagdnn_params_default();
    params.rho_mode = LagdnnRhoMode::QapTight;
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { lagdnn_solve(p, &params, &mut res) }, LagdnnStatus::InvalidArgument);
    assert!(res.is_null());
    params.rho_mode = LagdnnRhoMode::Auto;
    params.delta = -1.0;
    assert_eq!(unsafe { lagdnn_solve(p, &params, &mut res) }, LagdnnStatus::InvalidArgument);
    assert_eq!(unsafe { lagdnn_solve(p, ptr::null(), ptr::null_mut()) }, LagdnnStatus::NullPointer);

    unsafe {
        assert!(lagdnn_result_lb_valid(ptr::null()).is_nan());
        assert_eq!(lagdnn_result_status(ptr::null()), -1);
        lagdnn_problem_free(p);
        lagdnn_problem_free(ptr::null_mut());
        lagdnn_result_free(ptr::null_mut());
        lagdnn_string_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(lagdnn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/lagdnn.h")).unwrap();
    for sym in [
        "lagdnn_problem_bqp",
        "lagdnn_problem_qap",
        "lagdnn_problem_read",
        "lagdnn_problem_free",
        "lagdnn_solve",
        "lagdnn_result_lb_valid",
        "lagdnn_result_trace",
        "lagdnn_result_json",
        "lagdnn_result_free",
        "lagdnn_string_free",
        "lagdnn_last_error",
        "typedef struct LagdnnProblem LagdnnProblem",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "lagdnn.h"
int run(const double *f) {
    LagdnnProblem *p = 0;
    LagdnnResult *r = 0;
    LagdnnParams prm = lagdnn_params_default();
    prm.method = LAGDNN_METHOD_SECANT;
    if (lagdnn_problem_bqp(f, 2, 1, &p) != LAGDNN_STATUS_OK) return 1;
    LagdnnStatus s = lagdnn_solve(p, &prm, &r);
    double lb = lagdnn_result_lb_valid(r);
    lagdnn_result_free(r);
    lagdnn_problem_free(p);
    return s == LAGDNN_STATUS_OK && lb < 0.0 ? 0 : 2;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .expect("a C compiler on PATH");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
