use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hcons_ffi::*;

fn last_error() -> String {
    let p = hcons_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn loss(spec: &str) -> *mut HconsLoss {
    let s = CString::new(spec).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hcons_loss_parse(s.as_ptr(), &mut out) }, HconsStatus::Ok);
    out
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(hcons_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn loss_roundtrip_and_errors() {
    let l = loss("huber:1");
    let mut v = 0.0;
    assert_eq!(unsafe { hcons_loss_value(l, 3.0, 0.0, &mut v) }, HconsStatus::Ok);
    assert!((v - 2.5).abs() < 1e-15);
    unsafe { hcons_loss_free(l) };

    let bad = CString::new("huber:-1").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hcons_loss_parse(bad.as_ptr(), &mut out) }, HconsStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { hcons_loss_parse(ptr::null(), &mut out) }, HconsStatus::NullPointer);
    assert!(last_error().contains("NULL"));
    unsafe { hcons_loss_free(ptr::null_mut()) };
}

#[test]
fn verify_bound_through_handles() {
    let json = CString::new(
        r#"{"B": 1.0, "points": [
            {"id": "a", "weight": 0.5, "cond": [[-1.0, 0.5], [1.0, 0.5]]},
            {"id": "b", "weight": 0.5, "cond": [[-0.2, 0.1], [0.0, 0.8], [0.2, 0.1]]}]}"#,
    )
    .unwrap();
    let mut dist = ptr::null_mut();
    assert_eq!(unsafe { hcons_distribution_from_json(json.as_ptr(), &mut dist) }, HconsStatus::Ok);
    assert_eq!(unsafe { hcons_distribution_num_inputs(dist) }, 2);

    let sq = loss("squared");
    let preds = [0.5, -0.25];
    let mut r = HconsBoundResult::default();
    let st = unsafe { hcons_verify_bound(dist, HconsClass::AllBounded, preds.as_ptr(), 2, sq, &mut r) };
    assert_eq!(st, HconsStatus::Ok);
    // squared surrogate: both sides equal the squared regret
    let regret = 0.5 * 0.25 + 0.5 * 0.0625;
    assert!((r.lhs - regret).abs() < 1e-12, "{r:?}");
    assert_eq!(r.holds, 1);

    let st = unsafe { hcons_verify_bound(dist, HconsClass::AllBounded, preds.as_ptr(), 1, sq, &mut r) };
    assert_eq!(st, HconsStatus::DimensionMismatch);

    unsafe {
        hcons_loss_free(sq);
        hcons_distribution_free(dist);
    }
}

#[test]
fn invalid_distribution_is_reported() {
    let json = CString::new(r#"{"B": 1.0, "points": [{"id": "a", "weight": 0.4, "cond": [[0.0, 1.0]]}]}"#).unwrap();
    let mut dist = ptr::null_mut();
    assert_eq!(unsafe { hcons_distribution_from_json(json.as_ptr(), &mut dist) }, HconsStatus::InvalidDistribution);
    assert!(dist.is_null());
}

#[test]
fn huber_counterexample_confirms() {
    let mut r = HconsCounterexampleResult::default();
    let st = unsafe { hcons_counterexample_assert(HconsNegativeTheorem::Huber, 1.0, -0.8, 0.0, 0.5, &mut r) };
    assert_eq!(st, HconsStatus::Ok, "{}", last_error());
    assert_eq!(r.confirmed, 1);
    // hbar ties h* on the surrogate yet is far from the conditional mean
    assert!((r.surrogate_err_hbar - 0.275).abs() < 1e-12);
    assert!((r.surrogate_err_hstar - 0.275).abs() < 1e-12);
    assert!((r.sq_regret_hbar - 0.09).abs() < 1e-12);
}

#[test]
fn train_and_evaluate_exact_fit() {
    // y = 2 x0 - x1 + 0.5, noiseless
    let xs = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5], [0.3, -0.7], [0.0, 0.0]];
    let features: Vec<f64> = xs.iter().flatten().copied().collect();
    let labels: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] - x[1] + 0.5).collect();
    let mut data = ptr::null_mut();
    let st = unsafe { hcons_dataset_new(features.as_ptr(), labels.as_ptr(), xs.len(), 2, &mut data) };
    assert_eq!(st, HconsStatus::Ok);

    let sq = loss("squared");
    let cfg = HconsTrainConfig {
        objective: HconsObjective::SmoothAdv,
        loss: sq,
        gamma: 0.0,
        tau: 0.0,
        norm: HconsNorm::LInf,
        max_iters: 200_000,
        tol: 1e-10,
        step0: 1.0,
        projection_bound: 0.0,
    };
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hcons_train(data, &cfg, &mut model) }, HconsStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { hcons_model_dim(model) }, 2);

    let mut w = [0.0; 2];
    let (mut b, mut obj, mut iters) = (0.0, 0.0, 0usize);
    assert_eq!(unsafe { hcons_model_params(model, w.as_mut_ptr(), 2, &mut b, &mut obj, &mut iters) }, HconsStatus::Ok);
    assert!((w[0] - 2.0).abs() < 1e-4 && (w[1] + 1.0).abs() < 1e-4 && (b - 0.5).abs() < 1e-4, "{w:?} {b}");
    assert!(obj < 1e-8);
    assert!(iters > 0);

    let (mut clean, mut robust) = (f64::NAN, f64::NAN);
    let st = unsafe { hcons_evaluate(model, data, 0.1, HconsNorm::LInf, &mut clean, &mut robust) };
    assert_eq!(st, HconsStatus::Ok);
    assert!(clean < 1e-8);
    // residual ~0, so robust error is (0.1 * ||w||_1)^2 = 0.09
    assert!((robust - 0.09).abs() < 1e-3, "{robust}");

    assert_eq!(unsafe { hcons_model_params(model, w.as_mut_ptr(), 3, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, HconsStatus::DimensionMismatch);

    let no_loss = HconsTrainConfig { loss: ptr::null(), ..cfg };
    let mut m2 = ptr::null_mut();
    assert_eq!(unsafe { hcons_train(data, &no_loss, &mut m2) }, HconsStatus::NullPointer);

    unsafe {
        hcons_model_free(model);
        hcons_dataset_free(data);
        hcons_loss_free(sq);
    }
}

#[test]
fn missing_csv_is_io_error() {
    let p = CString::new("/nonexistent/hcons/data.csv").unwrap();
    let mut data = ptr::null_mut();
    assert_eq!(unsafe { hcons_dataset_load_csv(p.as_ptr(), &mut data) }, HconsStatus::Io);
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("hcons.h")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for f in [
        "hcons_last_error",
        "hcons_version",
        "hcons_loss_parse",
        "hcons_loss_free",
        "hcons_distribution_from_json",
        "hcons_verify_bound",
        "hcons_counterexample_assert",
        "hcons_dataset_new",
        "hcons_dataset_load_csv",
        "hcons_train",
        "hcons_model_params",
        "hcons_evaluate",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct HconsModel HconsModel;"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have_cc() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, "#include \"hcons.h\"\nint main(void) { return HCONS_STATUS_OK; }\n").unwrap();
    let inc = header().parent().unwrap().to_path_buf();
    for lang in ["c", "c++"] {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(&inc)
            .arg(&src)
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_runs() {
    if !have_cc() {
        eprintln!("no C compiler, skipping");
        return;
    }
    // test binaries live in target/<profile>/deps; the static library one level up
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|p| p.parent()).unwrap().join("libhcons_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "hcons.h"

int main(void) {
    HconsLoss *sq = NULL;
    if (hcons_loss_parse("squared", &sq) != HCONS_STATUS_OK) return 10;
    double v = 0.0;
    if (hcons_loss_value(sq, 1.5, 0.5, &v) != HCONS_STATUS_OK || v != 1.0) return 11;
    hcons_loss_free(sq);

    HconsLoss *bad = NULL;
    if (hcons_loss_parse("lp:0.5", &bad) == HCONS_STATUS_OK) return 12;
    if (hcons_last_error() == NULL) return 13;

    HconsCounterexampleResult r;
    if (hcons_counterexample_assert(HCONS_NEGATIVE_THEOREM_SQ_EPS, 1.0, -0.3, 0.0, 0.5, &r) != HCONS_STATUS_OK) return 14;
    printf("%s %d\n", hcons_version(), r.confirmed);
    return r.confirmed ? 0 : 15;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "link: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
