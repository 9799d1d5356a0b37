use std::ffi::{CStr, CString};
use std::ptr;

use hhvg_ffi::*;

fn last_error() -> String {
    let p = hhvg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn env_round_trip_matches_euler_arithmetic() {
    unsafe {
        let toml = CString::new("attractors = []\nrepellers = []\n").unwrap();
        let mut env = ptr::null_mut();
        assert_eq!(hhvg_env_from_toml(toml.as_ptr(), &mut env), HhvgStatus::Ok);
        let mut n = 0u32;
        assert_eq!(hhvg_env_num_actions(env, &mut n), HhvgStatus::Ok);
        assert_eq!(n, 121);
        // Action (+2, 0) is row 10, column 5 of the 11 x 11 grid.
        let s = [0.1, 0.1, 0.0, 0.0];
        let mut out = [0.0; 4];
        assert_eq!(hhvg_env_step(env, s.as_ptr(), 10 * 11 + 5, out.as_mut_ptr()), HhvgStatus::Ok);
        let vx = 2.0 * 0.05;
        assert!((out[0] - (0.1 + vx * 0.05)).abs() < 1e-15, "{out:?}");
        assert!((out[2] - vx).abs() < 1e-15);
        assert_eq!(hhvg_env_step(env, s.as_ptr(), 121, out.as_mut_ptr()), HhvgStatus::InvalidArgument);
        assert!(last_error().contains("121") || !last_error().is_empty());
        hhvg_env_free(env);
    }
}

#[test]
fn null_and_config_errors() {
    unsafe {
        assert_eq!(hhvg_env_new(ptr::null_mut()), HhvgStatus::NullPointer);
        assert!(last_error().contains("out"));
        let bad = CString::new("dt = -1.0").unwrap();
        let mut env = ptr::null_mut();
        assert_eq!(hhvg_env_from_toml(bad.as_ptr(), &mut env), HhvgStatus::Config);
        assert!(env.is_null());
        hhvg_env_free(ptr::null_mut());
        hhvg_agent_free(ptr::null_mut());
    }
}

#[test]
fn agent_steps_and_refuses_missing_dependency() {
    unsafe {
        let mut env = ptr::null_mut();
        assert_eq!(hhvg_env_new(&mut env), HhvgStatus::Ok);
        let mut agent = ptr::null_mut();
        let irs = CString::new("pgirs").unwrap();
        assert_eq!(hhvg_agent_new(env, irs.as_ptr(), 1, &mut agent), HhvgStatus::Dependency);
        let bogus = CString::new("nope").unwrap();
        assert_eq!(hhvg_agent_new(env, bogus.as_ptr(), 1, &mut agent), HhvgStatus::Config);
        let cb = CString::new("C/B").unwrap();
        assert_eq!(hhvg_agent_new(env, cb.as_ptr(), 1, &mut agent), HhvgStatus::Ok);
        let mut r = HhvgStepReport::default();
        for _ in 0..3 {
            assert_eq!(hhvg_agent_step(agent, &mut r), HhvgStatus::Ok);
        }
        assert_eq!(r.t, 2);
        assert!(r.fm_loss.is_finite() && r.mm_loss.is_finite());
        let mut s = [0.0; 4];
        assert_eq!(hhvg_agent_state(agent, s.as_mut_ptr()), HhvgStatus::Ok);
        assert_eq!(s, r.state);
        let mut f = [0.0; 4];
        assert_eq!(hhvg_agent_predict(agent, s.as_ptr(), [0.0, 0.0].as_ptr(), f.as_mut_ptr()), HhvgStatus::Ok);
        assert!(f.iter().all(|v| v.is_finite()));
        hhvg_agent_free(agent);

        let prw = CString::new("prw").unwrap();
        assert_eq!(hhvg_agent_new(env, prw.as_ptr(), 1, &mut agent), HhvgStatus::Ok);
        assert_eq!(hhvg_agent_step(agent, &mut r), HhvgStatus::Ok);
        assert!(r.mm_loss.is_nan() && r.ap_loss.is_nan());
        hhvg_agent_free(agent);
        hhvg_env_free(env);
    }
}

#[test]
fn math_entry_points() {
    unsafe {
        let eye: Vec<f64> = (0..16).map(|k| if k % 5 == 0 { 1.0 } else { 0.0 }).collect();
        let zero = [0.0; 4];
        let one = [1.0, 0.0, 0.0, 0.0];
        let mut kl = -1.0;
        assert_eq!(hhvg_gaussian_kl(zero.as_ptr(), eye.as_ptr(), one.as_ptr(), eye.as_ptr(), &mut kl), HhvgStatus::Ok);
        // Equal unit covariances: KL = |Δμ|² / 2, up to the tiny ridge.
        assert!((kl - 0.5).abs() < 1e-8, "{kl}");
        let mut bad = eye.clone();
        bad[0] = -1.0;
        assert_eq!(hhvg_gaussian_kl(zero.as_ptr(), bad.as_ptr(), one.as_ptr(), eye.as_ptr(), &mut kl), HhvgStatus::Numerical);

        let d = [1.0, 2.0, 3.0, 4.0];
        let mut cov = [0.0; 16];
        assert_eq!(hhvg_householder_cov(d.as_ptr(), one.as_ptr(), cov.as_mut_ptr()), HhvgStatus::Ok);
        // Reflection along e1 leaves the diagonal in place.
        for i in 0..4 {
            assert!((cov[5 * i] - d[i]).abs() < 1e-12);
        }
        assert_eq!(hhvg_householder_cov(d.as_ptr(), zero.as_ptr(), cov.as_mut_ptr()), HhvgStatus::Numerical);

        let mut t = HhvgUTest::default();
        assert_eq!(hhvg_mann_whitney_u([1.0, 2.0].as_ptr(), 2, [3.0, 4.0].as_ptr(), 2, &mut t), HhvgStatus::Ok);
        assert_eq!(t.u, 0.0);
        assert!((t.p - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(t.exact, 1);
        assert_eq!(hhvg_mann_whitney_u([1.0].as_ptr(), 0, [3.0].as_ptr(), 1, &mut t), HhvgStatus::InvalidArgument);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/hhvg.h");
    assert!(header.is_file());
    let src = std::env::temp_dir().join(format!("hhvg_header_check_{}.c", std::process::id()));
    std::fs::write(&src, "#include \"hhvg.h\"\nint main(void) { HhvgStatus s = HHVG_STATUS_OK; return (int)s; }\n").unwrap();
    let status = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&src)
        .status();
    let _ = std::fs::remove_file(&src);
    match status {
        Ok(s) => assert!(s.success(), "C compiler rejected the header"),
        Err(e) => eprintln!("no C compiler available, header check skipped: {e}"),
    }
}
