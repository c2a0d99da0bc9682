use std::ffi::{CStr, CString};
use std::ptr;

use nonsmooth_ffi::*;

fn example(name: &str) -> *mut NsSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { ns_system_from_example(name.as_ptr(), &mut sys) }, NsStatus::Ok);
    assert!(!sys.is_null());
    sys
}

fn last_error() -> String {
    let p = ns_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn classify_and_slide_exblow() {
    let sys = example("ex-exblow");
    unsafe {
        let mut dim = 0;
        assert_eq!(ns_system_dim(sys, &mut dim), NsStatus::Ok);
        assert_eq!(dim, 2);
        let mut kind = NsSigmaKind::Sewing;
        assert_eq!(ns_classify_point(sys, [0.0, 0.3].as_ptr(), 2, &mut kind), NsStatus::Ok);
        assert_eq!(kind, NsSigmaKind::SlidingAttracting);
        assert_eq!(ns_classify_point(sys, [0.0, 1.5].as_ptr(), 2, &mut kind), NsStatus::Ok);
        assert_eq!(kind, NsSigmaKind::Sewing);
        let mut v = [f64::NAN; 2];
        assert_eq!(
            ns_sliding_vf(sys, [0.0, 0.3].as_ptr(), 2, v.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert!(v[0].abs() < 1e-15 && (v[1] - 0.4).abs() < 1e-15);
        let mut s = f64::NAN;
        assert_eq!(ns_convex_coefficient(sys, [0.0, 0.3].as_ptr(), 2, &mut s), NsStatus::Ok);
        assert!((s - 0.7).abs() < 1e-15);
        ns_system_free(sys);
    }
}

#[test]
fn regularized_field_saturates_outside_the_band() {
    let sys = example("ex-s2-1");
    unsafe {
        let mut v = [0.0; 2];
        assert_eq!(
            ns_regularized_eval(sys, [0.3, 0.5].as_ptr(), 2, 0.1, v.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert_eq!(v, [0.0, -1.0]);
        assert_eq!(
            ns_regularized_eval(sys, [0.3, 0.0].as_ptr(), 2, 0.1, v.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert!((v[0] - 0.15).abs() < 1e-15 && v[1].abs() < 1e-15);
        assert_eq!(
            ns_regularized_eval(sys, [0.3, 0.0].as_ptr(), 2, -1.0, v.as_mut_ptr(), 2),
            NsStatus::InvalidArgument
        );
        ns_system_free(sys);
    }
}

#[test]
fn filippov_trajectory_accessors() {
    let sys = example("ex-exblow");
    unsafe {
        let mut tr = ptr::null_mut();
        let st = ns_integrate_filippov(sys, [-0.5, 0.2].as_ptr(), 2, 0.0, 20.0, 1e-10, 1e-12, &mut tr);
        assert_eq!(st, NsStatus::Ok);
        let n = ns_trajectory_len(tr);
        assert!(n > 2);
        assert_eq!(ns_trajectory_dim(tr), 2);
        let (mut t, mut mode, mut y) = (0.0, NsMode::Smooth, [0.0; 2]);
        assert_eq!(
            ns_trajectory_sample(tr, 0, &mut t, &mut mode, y.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert_eq!((t, mode, y), (0.0, NsMode::FlowMinus, [-0.5, 0.2]));
        assert_eq!(
            ns_trajectory_sample(tr, n - 1, &mut t, &mut mode, y.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert_eq!(mode, NsMode::Sliding);
        assert!((t - 20.0).abs() < 1e-12 && (y[1] - 0.5).abs() < 1e-6 && y[0].abs() < 1e-9);
        assert_eq!(
            ns_trajectory_sample(tr, n, &mut t, &mut mode, y.as_mut_ptr(), 2),
            NsStatus::InvalidArgument
        );
        ns_trajectory_free(tr);
        ns_system_free(sys);
    }
}

#[test]
fn config_text_builds_a_system() {
    let src = CString::new(
        "[system]\nkind = piecewise\ndim = 2\nh = \"x2\"\nxplus = [\"0\", \"-1\"]\nxminus = [\"x1\", \"-x2+1\"]\n",
    )
    .unwrap();
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(
            ns_system_from_config(src.as_ptr(), &mut sys),
            NsStatus::Ok,
            "{}",
            last_error()
        );
        let mut v = [0.0; 2];
        assert_eq!(
            ns_sliding_vf(sys, [0.4, 0.0].as_ptr(), 2, v.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert!((v[0] - 0.2).abs() < 1e-15 && v[1].abs() < 1e-15);
        ns_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut sys = ptr::null_mut();
        let bad = CString::new("ex-nothing").unwrap();
        assert_eq!(ns_system_from_example(bad.as_ptr(), &mut sys), NsStatus::UnknownExample);
        assert!(last_error().contains("ex-nothing"));
        assert!(sys.is_null());
        assert_eq!(ns_system_from_example(ptr::null(), &mut sys), NsStatus::NullPointer);
        let cfg = CString::new("[system]\nkind = piecewise\ndim = 2\nh = \"x2 +\"\n").unwrap();
        assert_eq!(ns_system_from_config(cfg.as_ptr(), &mut sys), NsStatus::ParseError);
        assert!(!last_error().is_empty());

        let sys = example("ex-exblow");
        let mut v = [0.0; 2];
        assert_eq!(
            ns_sliding_vf(sys, [0.0, 1.5].as_ptr(), 2, v.as_mut_ptr(), 2),
            NsStatus::DomainError
        );
        assert!(last_error().contains("not a sliding point"));
        assert_eq!(
            ns_sliding_vf(sys, [0.0, 0.5].as_ptr(), 2, v.as_mut_ptr(), 1),
            NsStatus::BufferTooSmall
        );
        assert_eq!(
            ns_sliding_vf(sys, [0.0, 0.5, 1.0].as_ptr(), 3, v.as_mut_ptr(), 2),
            NsStatus::InvalidArgument
        );
        let mut kind = NsSigmaKind::Sewing;
        assert_eq!(
            ns_classify_point(sys, [0.2, 0.5].as_ptr(), 2, &mut kind),
            NsStatus::DomainError
        );
        assert_eq!(
            ns_classify_point(ptr::null(), [0.0, 0.5].as_ptr(), 2, &mut kind),
            NsStatus::NullPointer
        );
        assert_eq!(
            ns_sliding_vf(sys, [0.0, 0.5].as_ptr(), 2, v.as_mut_ptr(), 2),
            NsStatus::Ok
        );
        assert!(ns_last_error().is_null());
        ns_system_free(sys);
        ns_system_free(ptr::null_mut());
        ns_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/nonsmooth.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in [
        "ns_system_from_example",
        "ns_sliding_vf",
        "ns_integrate_filippov",
        "ns_trajectory_sample",
        "NS_STATUS_OK",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ NsSystem *s = 0; return ns_system_from_example(\"ex-s2-1\", &s) == NS_STATUS_OK ? 0 : 1; }}\n"
        ),
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
