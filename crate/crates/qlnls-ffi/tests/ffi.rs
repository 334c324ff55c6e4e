use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qlnls_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        qlnls_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn set(cfg: *mut QlnlsConfig, k: &str, v: &str) -> i32 {
    let k = CString::new(k).unwrap();
    let v = CString::new(v).unwrap();
    unsafe { qlnls_config_set(cfg, k.as_ptr(), v.as_ptr()) }
}

fn field(values: &[(f64, f64)]) -> *mut QlnlsField {
    let re: Vec<f64> = values.iter().map(|v| v.0).collect();
    let im: Vec<f64> = values.iter().map(|v| v.1).collect();
    let mut out = ptr::null_mut();
    let rc = unsafe { qlnls_field_new(values.len(), re.as_ptr(), im.as_ptr(), &mut out) };
    assert_eq!(rc, QLNLS_OK, "{}", last_error());
    out
}

#[test]
fn field_roundtrip_and_norm() {
    let n = 16;
    let vals: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let x = std::f64::consts::TAU * j as f64 / n as f64;
            (x.cos(), x.sin())
        })
        .collect();
    let f = field(&vals);
    unsafe {
        assert_eq!(qlnls_field_len(f), n);
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        assert_eq!(qlnls_field_values(f, re.as_mut_ptr(), im.as_mut_ptr(), n), QLNLS_OK);
        for j in 0..n {
            assert!((re[j] - vals[j].0).abs() < 1e-14 && (im[j] - vals[j].1).abs() < 1e-14);
        }
        // e^{ix}: a single coefficient 1 at k = 1, so |u|_s = 2^{s/2}
        let mut s2 = 0.0;
        assert_eq!(qlnls_field_sobolev_norm(f, 2.0, &mut s2), QLNLS_OK);
        assert!((s2 - 2.0).abs() < 1e-12, "{s2}");
        assert_eq!(qlnls_field_values(f, re.as_mut_ptr(), im.as_mut_ptr(), n - 1), QLNLS_ERR_BUFFER);
        assert_eq!(qlnls_field_sobolev_norm(f, -1.0, &mut s2), QLNLS_ERR_PRECONDITION);
        qlnls_field_free(f);
    }
}

#[test]
fn odd_grid_rejected() {
    let re = [0.0; 7];
    let mut out = ptr::null_mut();
    let rc = unsafe { qlnls_field_new(7, re.as_ptr(), re.as_ptr(), &mut out) };
    assert_ne!(rc, QLNLS_OK);
    assert!(out.is_null());
}

#[test]
fn config_errors_name_the_key() {
    let cfg = qlnls_config_new();
    assert_eq!(set(cfg, "hum.cg_tol", "1e-9"), QLNLS_OK);
    assert_eq!(set(cfg, "nonsense.key", "1"), QLNLS_ERR_CONFIG);
    assert!(last_error().contains("nonsense.key"));
    assert_eq!(set(cfg, "time.n_t", "many"), QLNLS_ERR_CONFIG);
    assert!(last_error().contains("time.n_t"));
    assert_eq!(set(cfg, "observe.mu", "0.4"), QLNLS_ERR_PRECONDITION);
    assert!(last_error().contains("observe.mu"));
    // rejected values are rolled back, so the config still runs
    assert_eq!(set(cfg, "grid.n", "32"), QLNLS_OK);
    unsafe { qlnls_config_free(cfg) };
}

#[test]
fn null_handles_are_reported() {
    unsafe {
        let mut x = 0.0;
        assert_eq!(qlnls_field_sobolev_norm(ptr::null(), 0.0, &mut x), QLNLS_ERR_NULL);
        assert_eq!(qlnls_field_len(ptr::null()), 0);
        assert_eq!(qlnls_traj_samples(ptr::null()), 0);
        assert!(qlnls_solution_residual(ptr::null()).is_nan());
        qlnls_field_free(ptr::null_mut());
        qlnls_config_free(ptr::null_mut());
    }
}

#[test]
fn run_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = qlnls_config_new();
    let cmd = CString::new("reduce").unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let rc = unsafe { qlnls_run(cfg, cmd.as_ptr(), out.as_ptr()) };
    assert_eq!(rc, QLNLS_OK, "{}", last_error());
    assert!(dir.path().join("manifest.txt").is_file());
    assert!(dir.path().join("reduce_diagnostics.csv").is_file());
    let bad = CString::new("fly").unwrap();
    assert_eq!(unsafe { qlnls_run(cfg, bad.as_ptr(), out.as_ptr()) }, QLNLS_ERR_CONFIG);
    unsafe { qlnls_config_free(cfg) };
}

#[test]
fn zero_control_is_trivial() {
    let cfg = qlnls_config_new();
    let n = 64;
    let zero = field(&vec![(0.0, 0.0); n]);
    let mut sol = ptr::null_mut();
    unsafe {
        let rc = qlnls_control(cfg, zero, zero, &mut sol);
        assert_eq!(rc, QLNLS_OK, "{}", last_error());
        assert_eq!(qlnls_solution_residual(sol), 0.0);
        assert_eq!(qlnls_solution_iterations(sol), 0);
        let mut f = ptr::null_mut();
        assert_eq!(qlnls_solution_control(sol, &mut f), QLNLS_OK);
        let mut re = vec![1.0; n];
        let mut im = vec![1.0; n];
        for i in 0..qlnls_traj_samples(f) {
            assert_eq!(qlnls_traj_sample(f, i, re.as_mut_ptr(), im.as_mut_ptr(), n), QLNLS_OK);
            assert!(re.iter().chain(&im).all(|v| *v == 0.0));
        }
        assert_eq!(qlnls_traj_sample(f, 10_000, re.as_mut_ptr(), im.as_mut_ptr(), n), QLNLS_ERR_INDEX);
        qlnls_traj_free(f);
        qlnls_solution_free(sol);
        qlnls_field_free(zero);
        qlnls_config_free(cfg);
    }
}

#[test]
fn cauchy_matches_direct_integrator() {
    let cfg = qlnls_config_new();
    let n = 64;
    let vals: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let x = std::f64::consts::TAU * j as f64 / n as f64;
            (1e-4 * x.cos(), 1e-4 * (2.0 * x).sin())
        })
        .collect();
    let u = field(&vals);
    let mut sol = ptr::null_mut();
    unsafe {
        let rc = qlnls_cauchy(cfg, u, &mut sol);
        assert_eq!(rc, QLNLS_OK, "{}", last_error());
        assert!(qlnls_solution_residual(sol) <= 1e-8);
        assert!(qlnls_solution_check(sol) <= 1e-5);
        let mut st = ptr::null_mut();
        assert_eq!(qlnls_solution_state(sol, &mut st), QLNLS_OK);
        assert_eq!(qlnls_traj_samples(st), 257);
        assert_eq!(qlnls_traj_nodes(st), n);
        let mut c = ptr::null_mut();
        assert_eq!(qlnls_solution_control(sol, &mut c), QLNLS_ERR_INDEX);
        assert!(c.is_null());
        qlnls_traj_free(st);
        qlnls_solution_free(sol);
        qlnls_field_free(u);
        qlnls_config_free(cfg);
    }
}

#[test]
fn grid_mismatch_is_a_precondition() {
    let cfg = qlnls_config_new();
    let u = field(&vec![(0.0, 0.0); 32]);
    let mut sol = ptr::null_mut();
    let rc = unsafe { qlnls_cauchy(cfg, u, &mut sol) };
    assert_eq!(rc, QLNLS_ERR_PRECONDITION);
    assert!(last_error().contains("u_in"));
    unsafe {
        qlnls_field_free(u);
        qlnls_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let header = include_str!("../include/qlnls.h");
    let mut names = 0;
    for line in src.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else { continue };
        let name = rest.split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        names += 1;
    }
    assert!(names >= 20);
    for c in ["QLNLS_OK", "QLNLS_ERR_CONFIG", "QLNLS_ERR_PRECONDITION", "QLNLS_ERR_NUMERICAL"] {
        assert!(header.contains(&format!("#define {c} ")));
    }
    assert!(header.contains("typedef struct QlnlsConfig QlnlsConfig;"));
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(qlnls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
