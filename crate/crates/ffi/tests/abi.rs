use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use metric_gff_ffi::*;

fn last_error() -> String {
    let p = mgff_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn green_table_roundtrip() {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(mgff_green_dirichlet(2, 1, MgffGreenMode::Dense, &mut t), MgffStatus::Ok);
        let o = [0i64, 0];
        let mut g = 0.0;
        assert_eq!(mgff_green_get(t, o.as_ptr(), o.as_ptr(), &mut g), MgffStatus::Ok);
        assert!((g - 1.0).abs() < 1e-12);
        let far = [5i64, 0];
        assert_eq!(mgff_green_get(t, o.as_ptr(), far.as_ptr(), &mut g), MgffStatus::Domain);
        assert!(last_error().contains("outside"));
        mgff_green_free(t);
    }
}

#[test]
fn status_codes() {
    let mut g = 0.0;
    unsafe {
        let x = [0i64, 0];
        assert_eq!(mgff_green_infinite(2, x.as_ptr(), &mut g), MgffStatus::Domain);
        assert_eq!(mgff_green_infinite(3, ptr::null(), &mut g), MgffStatus::NullPointer);
        assert_eq!(mgff_drift_hit_cdf(0.0, 1.0, -1.0, &mut g), MgffStatus::Domain);
        let mut f = ptr::null_mut();
        assert_eq!(mgff_field_sample(3, 11, MgffSampler::InfiniteRestricted, 0.0, 1, 0, &mut f), MgffStatus::Capacity);
        assert_eq!(mgff_field_sample(2, 4, MgffSampler::DirichletProxy, 0.5, 1, 0, &mut f), MgffStatus::Config);
        let mut out = ptr::null_mut();
        let bad = CString::new(r#"{"experiment":"sigma3","d":3,"samples":1,"extra":0}"#).unwrap();
        assert_eq!(mgff_run_config(bad.as_ptr(), false, &mut out), MgffStatus::Config);
        assert!(last_error().contains("extra"));
    }
}

#[test]
fn analytic_values() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(mgff_drift_hit_cdf(0.0, 1.0, 1.0, &mut v), MgffStatus::Ok);
        assert!((v - 0.317_310_507_862_914_1).abs() < 1e-14);
        assert_eq!(mgff_f_bound(0.0, 1.0, &mut v), MgffStatus::Ok);
        assert!((v - 0.682_689_492_137_085_9).abs() < 1e-14);
        assert_eq!(mgff_g_bound(0.0, 1.0, &mut v), MgffStatus::Ok);
        assert_eq!(v, 1.0);
    }
    assert_eq!(mgff_edge_open_prob(0.0, 1.0, 0.5, 2), 0.0);
    assert!((mgff_edge_open_prob(1.0, 1.0, 0.0, 2) + (-0.5f64).exp_m1()).abs() < 1e-15);
}

#[test]
fn field_and_level_set() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(mgff_field_sample(2, 6, MgffSampler::Dirichlet, 0.0, 9, 3, &mut f), MgffStatus::Ok);
        let n = mgff_field_len(f);
        assert_eq!(n, 169);
        let mut vals = vec![0.0; n];
        assert_eq!(mgff_field_values(f, vals.as_mut_ptr(), n), MgffStatus::Ok);
        assert_eq!(vals[0], 0.0);
        assert_eq!(mgff_field_values(f, vals.as_mut_ptr(), 3), MgffStatus::Capacity);

        let mut ls = ptr::null_mut();
        assert_eq!(mgff_level_set_new(f, -1e9, 9, 3, &mut ls), MgffStatus::Ok);
        let mut conn = false;
        assert_eq!(mgff_level_set_origin_connected(ls, &mut conn), MgffStatus::Ok);
        let a = [0i64, 0];
        let b = [0i64, 3];
        let mut dist = 0i64;
        assert_eq!(mgff_level_set_chemical_distance(ls, a.as_ptr(), b.as_ptr(), &mut dist), MgffStatus::Ok);
        assert!(dist == -1 || dist >= 3);
        mgff_level_set_free(ls);

        let mut ls = ptr::null_mut();
        assert_eq!(mgff_level_set_new(f, 1e9, 9, 3, &mut ls), MgffStatus::Ok);
        assert_eq!(mgff_level_set_origin_connected(ls, &mut conn), MgffStatus::Ok);
        assert!(!conn);
        assert_eq!(mgff_level_set_chemical_distance(ls, a.as_ptr(), b.as_ptr(), &mut dist), MgffStatus::Ok);
        assert_eq!(dist, -1);
        mgff_level_set_free(ls);
        mgff_field_free(f);
        mgff_field_free(ptr::null_mut());
    }
}

#[test]
fn run_config_returns_csv() {
    let cfg = CString::new(r#"{"experiment":"crossing_2d","d":2,"N":[8],"samples":20,"seed":4}"#).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(mgff_run_config(cfg.as_ptr(), false, &mut out), MgffStatus::Ok);
        let csv = CStr::from_ptr(out).to_str().unwrap().to_owned();
        mgff_string_free(out);
        assert!(csv.starts_with("experiment,d,N,h,estimate,stderr_lo,stderr_hi,samples,seed,wall_s,meta\n"));
        assert_eq!(csv.lines().count(), 2);
        let mut again = ptr::null_mut();
        assert_eq!(mgff_run_config(cfg.as_ptr(), false, &mut again), MgffStatus::Ok);
        assert_eq!(CStr::from_ptr(again).to_str().unwrap(), csv);
        mgff_string_free(again);
    }
}

#[test]
fn lattice_constants_json() {
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(mgff_lattice_constants(3, &mut out), MgffStatus::Ok);
        let s = CStr::from_ptr(out).to_str().unwrap().to_owned();
        mgff_string_free(out);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!((v["sigma2"].as_f64().unwrap() - 1.516_386_06).abs() < 1e-6);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/metric_gff.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["mgff_green_dirichlet", "mgff_run_config", "mgff_last_error", "MgffLevelSet"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"metric_gff.h\"\nint main(void) { MgffGreenTable *t = 0; (void)t; return mgff_edge_open_prob(1.0, 1.0, 0.0, 3) > 0.0 ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler available; skipping syntax check");
        return;
    };
    assert!(status.success());
}
