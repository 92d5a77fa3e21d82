use std::ffi::{CStr, CString};
use std::ptr;

use polarize_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(polarize_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn laminate_round_trip() {
    unsafe {
        let dir = [1.0, 0.0];
        let w = [1.0];
        let mut lam = ptr::null_mut();
        assert_eq!(
            polarize_laminate_new(2, 1, dir.as_ptr(), w.as_ptr(), 0.5, PolarizeMatrixPhase::Gamma0, &mut lam),
            PolarizeStatus::Ok
        );
        let mut g = ptr::null_mut();
        assert_eq!(polarize_laminate_effective_tensor(lam, 2.0, 1.0, &mut g), PolarizeStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(polarize_laminate_polarization(lam, 2.0, 1.0, &mut m), PolarizeStatus::Ok);
        let mut e = [0.0; 4];
        assert_eq!(polarize_tensor_entries(g, e.as_mut_ptr(), 4), PolarizeStatus::Ok);
        assert!((e[0] - 4.0 / 3.0).abs() < 1e-14 && (e[3] - 1.5).abs() < 1e-14);
        assert_eq!(polarize_tensor_entries(m, e.as_mut_ptr(), 4), PolarizeStatus::Ok);
        assert!((e[0] - 4.0 / 3.0).abs() < 1e-14 && (e[3] - 1.0).abs() < 1e-14);

        let (mut ok, mut slack) = (0, 0.0);
        assert_eq!(polarize_check_bounds(m, 0.5, 2.0, 1.0, &mut ok, &mut slack), PolarizeStatus::Ok);
        assert_eq!(ok, 1);
        // the matrix-gamma0 rank-1 laminate attains the lower trace bound
        assert!(slack.abs() < 1e-9);
        let (mut ub, mut lb) = (0.0, 0.0);
        assert_eq!(polarize_trace_bounds(2, 0.5, 2.0, 1.0, &mut ub, &mut lb), PolarizeStatus::Ok);
        assert!((lb - 3.5).abs() < 1e-12);

        polarize_tensor_free(g);
        polarize_tensor_free(m);
        polarize_laminate_free(lam);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut t = ptr::null_mut();
        let asym = [1.0, 0.5, 0.0, 1.0];
        assert_eq!(polarize_tensor_new(2, asym.as_ptr(), &mut t), PolarizeStatus::InvalidArgument);
        assert!(t.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(polarize_tensor_new(2, ptr::null(), &mut t), PolarizeStatus::NullPointer);
        assert!(last_error().contains("null"));

        let (mut ub, mut lb) = (0.0, 0.0);
        assert_eq!(polarize_trace_bounds(2, 0.5, 1.0, 2.0, &mut ub, &mut lb), PolarizeStatus::InvalidArgument);

        let name = CString::new("random(0.3)").unwrap();
        let mut micro = ptr::null_mut();
        assert_eq!(
            polarize_microstructure_named(name.as_ptr(), 2, 8, 0, 0, &mut micro),
            PolarizeStatus::InvalidArgument
        );
        assert!(last_error().contains("seed"));

        let sym = [2.0, 0.0, 0.0, 3.0];
        let mut t = ptr::null_mut();
        assert_eq!(polarize_tensor_new(2, sym.as_ptr(), &mut t), PolarizeStatus::Ok);
        let mut e = [0.0; 2];
        assert_eq!(polarize_tensor_entries(t, e.as_mut_ptr(), 2), PolarizeStatus::InvalidArgument);
        assert_eq!(polarize_tensor_eigenvalues(t, e.as_mut_ptr(), 2), PolarizeStatus::Ok);
        assert_eq!(e, [2.0, 3.0]);
        assert_eq!(polarize_tensor_dim(t), 2);
        polarize_tensor_free(t);
        polarize_tensor_free(ptr::null_mut());
        assert_eq!(polarize_tensor_dim(ptr::null()), 0);
    }
}

#[test]
fn cell_homogenization() {
    unsafe {
        // stripe of fraction 1/2 normal to axis 0
        let mut chi = vec![0u8; 64];
        for (i, c) in chi.iter_mut().enumerate() {
            *c = u8::from(i % 8 < 4);
        }
        let mut micro = ptr::null_mut();
        assert_eq!(polarize_microstructure_from_mask(2, 8, chi.as_ptr(), &mut micro), PolarizeStatus::Ok);
        assert_eq!(polarize_microstructure_theta(micro), 0.5);
        let mut h = ptr::null_mut();
        assert_eq!(polarize_homogenize(micro, 2.0, 1.0, 1e-12, &mut h), PolarizeStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(polarize_homogenization_effective_tensor(h, &mut g), PolarizeStatus::Ok);
        let mut e = [0.0; 4];
        polarize_tensor_entries(g, e.as_mut_ptr(), 4);
        assert!((e[0] - 4.0 / 3.0).abs() < 1e-10 && (e[3] - 1.5).abs() < 1e-10);
        let mut m = ptr::null_mut();
        assert_eq!(polarize_homogenization_polarization(h, &mut m), PolarizeStatus::Ok);
        polarize_tensor_entries(m, e.as_mut_ptr(), 4);
        assert!((e[0] - 4.0 / 3.0).abs() < 1e-9 && (e[3] - 1.0).abs() < 1e-9);

        let name = CString::new("checkerboard").unwrap();
        let mut cb = ptr::null_mut();
        assert_eq!(polarize_microstructure_named(name.as_ptr(), 2, 8, 0, 0, &mut cb), PolarizeStatus::Ok);
        assert_eq!(polarize_microstructure_theta(cb), 0.5);

        polarize_tensor_free(g);
        polarize_tensor_free(m);
        polarize_homogenization_free(h);
        polarize_microstructure_free(micro);
        polarize_microstructure_free(cb);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(polarize_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
