use layer_prune::prune::synthetic::AdditiveOracle;
use layer_prune::prune::{glp_search, LayerTopology};
use layer_prune_ffi::*;
use std::ffi::{c_int, c_void, CStr, CString};
use std::path::PathBuf;
use std::process::Command;

unsafe extern "C" fn additive(user: *mut c_void, kept: *const usize, len: usize, _seed: u64, out: *mut f64) -> c_int {
    let oracle = &*(user as *const AdditiveOracle);
    *out = oracle.value(std::slice::from_raw_parts(kept, len));
    0
}

unsafe extern "C" fn refuse_large(user: *mut c_void, _kept: *const usize, len: usize, _seed: u64, out: *mut f64) -> c_int {
    let calls = &mut *(user as *mut usize);
    *calls += 1;
    if len < 4 {
        return 7;
    }
    *out = len as f64;
    0
}

fn last_error() -> String {
    let p = lp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn glp_through_the_callback_matches_the_library() {
    let oracle = AdditiveOracle::random(12, 4);
    let mut ledger = std::ptr::null_mut();
    let st = unsafe { lp_glp_search(12, 6, 0, Some(additive), &oracle as *const _ as *mut c_void, &mut ledger) };
    assert_eq!(st, LpStatus::Ok);
    let expected = glp_search(&LayerTopology::new(12).unwrap(), "task", 6, &oracle, 0).unwrap().chain();
    unsafe {
        assert_eq!(lp_ledger_depth(ledger), 12);
        assert_eq!(lp_ledger_steps(ledger), 6);
        let mut buf = [0usize; 12];
        let mut len = 0;
        for x in 0..=6 {
            assert_eq!(lp_ledger_lookup(ledger, x, buf.as_mut_ptr(), buf.len(), &mut len), LpStatus::Ok);
            assert_eq!(&buf[..len], &expected[..x]);
        }
        assert_eq!(lp_ledger_lookup(ledger, 7, buf.as_mut_ptr(), buf.len(), &mut len), LpStatus::OutOfRange);
        assert!(last_error().contains("extend the search"));
        assert_eq!(lp_ledger_lookup(ledger, 6, buf.as_mut_ptr(), 3, &mut len), LpStatus::BufferTooSmall);
        assert_eq!(len, 6);

        let mut json = std::ptr::null_mut();
        assert_eq!(lp_ledger_to_json(ledger, &mut json), LpStatus::Ok);
        let mut copy = std::ptr::null_mut();
        assert_eq!(lp_ledger_from_json(json, &mut copy), LpStatus::Ok);
        assert_eq!(lp_ledger_steps(copy), 6);
        lp_string_free(json);
        lp_ledger_free(copy);
        lp_ledger_free(ledger);
    }
}

#[test]
fn optimal_and_top_layer() {
    let oracle = AdditiveOracle::random(8, 2);
    let mut buf = [0usize; 8];
    let mut len = 0;
    let mut score = 0.0;
    let st = unsafe {
        lp_optimal_search(8, 3, 0, Some(additive), &oracle as *const _ as *mut c_void, buf.as_mut_ptr(), 8, &mut len, &mut score)
    };
    assert_eq!(st, LpStatus::Ok);
    let mut weights: Vec<(f64, usize)> = oracle.weights().iter().copied().zip(0..).collect();
    weights.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cheapest: Vec<usize> = weights[..3].iter().map(|w| w.1).collect();
    cheapest.sort_unstable_by(|a, b| b.cmp(a));
    assert_eq!(&buf[..len], cheapest.as_slice());

    let st = unsafe { lp_top_layer_prune(12, 6, buf.as_mut_ptr(), 8, &mut len) };
    assert_eq!(st, LpStatus::Ok);
    assert_eq!(&buf[..len], &[11, 10, 9, 8, 7, 6]);
    let st = unsafe { lp_top_layer_prune(12, 12, buf.as_mut_ptr(), 8, &mut len) };
    assert_eq!(st, LpStatus::InvalidArgument);
}

#[test]
fn callback_failure_is_reported() {
    let mut calls = 0usize;
    let mut ledger = std::ptr::null_mut();
    let st = unsafe { lp_glp_search(5, 3, 0, Some(refuse_large), &mut calls as *mut usize as *mut c_void, &mut ledger) };
    assert_eq!(st, LpStatus::Oracle);
    assert!(ledger.is_null());
    assert!(last_error().contains("callback returned 7"));
    // the second step keeps 3 layers: all 4 candidates are tried, then the step fails
    assert_eq!(calls, 5 + 4);
    let st = unsafe { lp_glp_search(5, 1, 0, None, std::ptr::null_mut(), &mut ledger) };
    assert_eq!(st, LpStatus::NullArgument);
}

#[test]
fn metrics_and_null_checks() {
    let p = [1u32, 0, 1, 1];
    let g = [1u32, 0, 0, 1];
    let mut v = 0.0;
    unsafe {
        assert_eq!(lp_metric(LpMetric::Accuracy, p.as_ptr(), g.as_ptr(), 4, &mut v), LpStatus::Ok);
        assert_eq!(v, 0.75);
        assert_eq!(lp_metric(LpMetric::F1, p.as_ptr(), g.as_ptr(), 4, &mut v), LpStatus::Ok);
        assert_eq!(v, 0.8);
        assert_eq!(lp_metric(LpMetric::MatthewsCorr, g.as_ptr(), g.as_ptr(), 4, &mut v), LpStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(lp_metric(LpMetric::F1, std::ptr::null(), g.as_ptr(), 4, &mut v), LpStatus::NullArgument);
        let bad = [2u32, 0, 0, 0];
        assert_eq!(lp_metric(LpMetric::F1, bad.as_ptr(), g.as_ptr(), 4, &mut v), LpStatus::InvalidArgument);
        let x = [1.0, 2.0, 3.0];
        let y = [10.0, 20.0, 15.0];
        assert_eq!(lp_spearman(x.as_ptr(), y.as_ptr(), 3, &mut v), LpStatus::Ok);
        assert!((v - 0.5).abs() < 1e-12);

        let missing = CString::new("/nonexistent/ledger.json").unwrap();
        let mut ledger = std::ptr::null_mut();
        assert_eq!(lp_ledger_load(missing.as_ptr(), &mut ledger), LpStatus::Io);
        assert_eq!(lp_ledger_steps(std::ptr::null()), 0);
        lp_ledger_free(std::ptr::null_mut());
    }
}

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<this test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let lib = target_dir().join("liblayer_prune_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/smoke.c");
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi_smoke");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&out)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "top: 11 10 9\nglp: 0 1\nok");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
