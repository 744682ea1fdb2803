use std::ffi::{CStr, CString};
use std::ptr;

use diss_ffi::*;

fn last_error() -> String {
    let p = diss_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(diss_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn reward_matches_hand_value() {
    let mask = [1u8, 1, 0];
    let mut r = 0.0;
    let s = unsafe { diss_compute_reward(1, 0.8, mask.as_ptr(), 3, 0.1, 1e-6, &mut r) };
    assert_eq!(s, DissStatus::Ok);
    assert!((r - (0.8f64.ln() - 0.2)).abs() < 1e-12);

    let mut e = 0.0;
    let s = unsafe { diss_expected_reward(0.25, 0.5, mask.as_ptr(), 3, 0.0, 1e-6, &mut e) };
    assert_eq!(s, DissStatus::Ok);
    assert!((e - 0.5f64.ln()).abs() < 1e-12);
}

#[test]
fn bad_arguments_report() {
    let mut r = 0.0;
    let s = unsafe { diss_compute_reward(2, 0.5, ptr::null(), 0, 0.0, 1e-6, &mut r) };
    assert_eq!(s, DissStatus::InvalidArgument);
    assert!(last_error().contains("y"));
    let s = unsafe { diss_compute_reward(1, 0.5, ptr::null(), 3, 0.0, 1e-6, &mut r) };
    assert_eq!(s, DissStatus::NullPointer);
    let s = unsafe { diss_compute_reward(1, 0.5, ptr::null(), 0, 0.0, 1e-6, ptr::null_mut()) };
    assert_eq!(s, DissStatus::NullPointer);
}

#[test]
fn config_errors_name_the_field() {
    let text = CString::new("[acquisition]\nbudget = \"lots\"\n").unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { diss_config_from_toml(text.as_ptr(), &mut cfg) };
    assert_eq!(s, DissStatus::InvalidConfig);
    assert!(cfg.is_null());
    assert!(last_error().contains("acquisition.budget"), "{}", last_error());

    let text = CString::new("strategies = [\"bogus\"]\n").unwrap();
    let s = unsafe { diss_config_from_toml(text.as_ptr(), &mut cfg) };
    assert_eq!(s, DissStatus::Ok);
    assert_eq!(unsafe { diss_config_validate(cfg) }, DissStatus::InvalidConfig);
    assert!(last_error().contains("strategies[0]"));
    unsafe { diss_config_free(cfg) };

    let path = CString::new("/definitely/not/here.toml").unwrap();
    let s = unsafe { diss_config_from_path(path.as_ptr(), &mut cfg) };
    assert_eq!(s, DissStatus::Io);
}

#[test]
fn invalid_utf8_rejected() {
    let bytes = [b'n', 0xff, 0];
    let mut cfg = ptr::null_mut();
    let s = unsafe { diss_config_from_toml(bytes.as_ptr().cast(), &mut cfg) };
    assert_eq!(s, DissStatus::InvalidUtf8);
}

#[test]
fn small_run_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let text = CString::new(
        r#"
name = "ffi"
seeds = [3]
strategies = ["random"]
[dataset]
n = 300
d = 4
informative = [0, 1]
[acquisition]
budget = 60
warmup = 40
checkpoint_every = 10
ensemble_size = 1
[acquisition.boost]
n_trees = 4
"#,
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { diss_config_from_toml(text.as_ptr(), &mut cfg) }, DissStatus::Ok);
    let out_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { diss_config_set_output_dir(cfg, out_dir.as_ptr()) }, DissStatus::Ok);

    let mut toml = ptr::null_mut();
    assert_eq!(unsafe { diss_config_to_toml(cfg, &mut toml) }, DissStatus::Ok);
    assert!(unsafe { CStr::from_ptr(toml) }.to_str().unwrap().contains("budget = 60"));
    unsafe { diss_string_free(toml) };

    let mut run = ptr::null_mut();
    assert_eq!(unsafe { diss_config_run(cfg, 0, &mut run) }, DissStatus::Ok, "{}", last_error());
    let n = unsafe { diss_run_len(run) };
    assert_eq!(n, 3);
    let mut pt = DissCurvePoint::default();
    assert_eq!(unsafe { diss_run_point(run, 0, &mut pt) }, DissStatus::Ok);
    assert_eq!((pt.seed, pt.queries), (3, 40));
    assert!(pt.mean_reward < 0.0);
    assert_eq!(unsafe { CStr::from_ptr(diss_run_strategy(run, 0)) }.to_str().unwrap(), "Random");
    assert!(unsafe { diss_run_strategy(run, n) }.is_null());
    assert_eq!(unsafe { diss_run_point(run, n, &mut pt) }, DissStatus::InvalidArgument);
    assert!(dir.path().join("curves.csv").exists());
    unsafe {
        diss_run_free(run);
        diss_config_free(cfg);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/diss.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for sym in ["diss_config_run", "diss_compute_reward", "DISS_STATUS_PANIC", "DissCurvePoint"] {
        assert!(text.contains(sym), "missing {sym}");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}
