use std::ffi::{CStr, CString};
use std::ptr;
use ymb_ffi::*;

fn last_error() -> String {
    let p = ymb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ymb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn instanton_action_is_eight_pi_squared() {
    let p = [0.0, 0.1, 0.0, -0.1];
    let (mut a, mut m) = (0.0, 1.0);
    let s = unsafe { ymb_instanton_action(p.as_ptr(), 0.2, &mut a, &mut m) };
    assert_eq!(s, YmbStatus::Ok);
    assert!((a / 78.956_835_208_714_86 - 1.0).abs() < 1e-6);
    assert!(m < 1e-8 * a);
}

#[test]
fn bad_arguments_report_status_and_message() {
    let mut a = 0.0;
    let s = unsafe { ymb_instanton_action(ptr::null(), 0.2, &mut a, &mut a) };
    assert_eq!(s, YmbStatus::NullPointer);
    assert!(last_error().contains("p is null"));

    let p = [0.0; 4];
    let s = unsafe { ymb_instanton_action(p.as_ptr(), -1.0, &mut a, &mut a) };
    assert_eq!(s, YmbStatus::InvalidArgument);

    let mut cfg = ptr::null_mut();
    let bad = CString::new(r#"{"eps": [0.01]"#).unwrap();
    assert_eq!(
        unsafe { ymb_config_from_json(bad.as_ptr(), &mut cfg) },
        YmbStatus::InvalidArgument
    );
    assert!(cfg.is_null());
    let bad = CString::new(r#"{"glue": {"d1": 9.0}}"#).unwrap();
    assert_eq!(
        unsafe { ymb_config_from_json(bad.as_ptr(), &mut cfg) },
        YmbStatus::InvalidArgument
    );
    assert!(last_error().contains("D1"), "{}", last_error());

    let cfg = ymb_config_default();
    let cmd = CString::new("no-such-command").unwrap();
    let mut pass = false;
    assert_eq!(
        unsafe { ymb_run(cfg, cmd.as_ptr(), &mut pass) },
        YmbStatus::InvalidArgument
    );
    unsafe { ymb_config_free(cfg) };
    unsafe { ymb_config_free(ptr::null_mut()) };
    unsafe { ymb_glued_free(ptr::null_mut()) };
}

#[test]
fn run_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let json = CString::new(r#"{"seed": 4}"#).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ymb_config_from_json(json.as_ptr(), &mut cfg) }, YmbStatus::Ok);
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ymb_config_set_out(cfg, out.as_ptr()) }, YmbStatus::Ok);
    let cmd = CString::new("instanton-check").unwrap();
    let mut pass = false;
    assert_eq!(unsafe { ymb_run(cfg, cmd.as_ptr(), &mut pass) }, YmbStatus::Ok);
    assert!(pass);
    assert!(dir.path().join("manifest.json").exists());
    unsafe { ymb_config_free(cfg) };
}

#[test]
fn glued_connection_has_unit_charge_and_consistent_expansion() {
    let json =
        CString::new(r#"{"grids": {"bubble": {"s3_l": 6, "split": 8.0, "panel_points": 6, "background_panels": 4}}}"#)
            .unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { ymb_config_from_json(json.as_ptr(), &mut cfg) };
    assert_eq!(s, YmbStatus::Ok, "{}", last_error());
    let mut glued = ptr::null_mut();
    let s = unsafe { ymb_glued_new(cfg, 0.01, &mut glued) };
    assert_eq!(s, YmbStatus::Ok, "{}", last_error());
    let (mut lambda, mut chern) = (0.0, 0.0);
    assert_eq!(unsafe { ymb_glued_lambda(glued, &mut lambda) }, YmbStatus::Ok);
    assert!((lambda - 0.1).abs() < 1e-15);
    assert_eq!(unsafe { ymb_glued_relative_chern(glued, &mut chern) }, YmbStatus::Ok);
    assert!((chern - 1.0).abs() < 1e-2);
    let mut e = YmbExpansion::default();
    assert_eq!(unsafe { ymb_glued_expansion(glued, &mut e) }, YmbStatus::Ok);
    let sum = e.instanton + e.small_action + e.reduced + e.r1;
    assert!((e.j - sum).abs() <= 1e-12 * e.j);
    assert_eq!(e.eps, 0.01);
    unsafe { ymb_glued_free(glued) };
    unsafe { ymb_config_free(cfg) };

    let mut glued = ptr::null_mut();
    let cfg = ymb_config_default();
    assert_eq!(
        unsafe { ymb_glued_new(cfg, -1.0, &mut glued) },
        YmbStatus::InvalidArgument
    );
    unsafe { ymb_config_free(cfg) };
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/ymb.h")).unwrap();
    for f in [
        "ymb_version",
        "ymb_last_error",
        "ymb_config_default",
        "ymb_config_from_json",
        "ymb_config_set_out",
        "ymb_config_free",
        "ymb_instanton_action",
        "ymb_glued_new",
        "ymb_glued_lambda",
        "ymb_glued_relative_chern",
        "ymb_glued_expansion",
        "ymb_glued_free",
        "ymb_run",
        "typedef struct YmbConfig YmbConfig",
        "YMB_STATUS_PANIC = 5",
    ] {
        assert!(header.contains(f), "{f} missing from ymb.h");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(format!("{dir}/include/ymb.h"))
        .status()
    else {
        return;
    };
    assert!(status.success());
}
