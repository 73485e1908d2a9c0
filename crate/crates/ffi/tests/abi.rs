use dkdv_ffi::*;
use std::ffi::CStr;
use std::ptr;

#[test]
fn scalar_calls() {
    unsafe {
        let (mut u, mut v) = (0.0, 0.0);
        assert_eq!(
            dkdv_map_eval(1.0, 2.0, 1.0, 1.0, false, &mut u, &mut v),
            DkdvStatus::Ok
        );
        assert_eq!((u, v), (1.5, 2.0 / 3.0));
        assert_eq!(
            dkdv_map_eval(1.0, 0.0, 1.0, 1.0, true, &mut u, &mut v),
            DkdvStatus::Ok
        );
        assert_eq!((u, v), (0.5, 0.5));
        let mut k = 0.0;
        assert_eq!(dkdv_bessel_k(0.5, 2.0, &mut k), DkdvStatus::Ok);
        let exact = (std::f64::consts::PI / 4.0).sqrt() * (-2.0f64).exp();
        assert!(((k - exact) / exact).abs() < 1e-14);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let (mut u, mut v) = (0.0, 0.0);
        assert_eq!(
            dkdv_map_eval(1.0, 1.0, 1.0, 1.0, false, &mut u, &mut v),
            DkdvStatus::Domain
        );
        assert!(last_error().contains("must differ"), "{}", last_error());
        assert_eq!(dkdv_bessel_k(0.5, -1.0, &mut u), DkdvStatus::Domain);
        assert_eq!(
            dkdv_bessel_k(0.5, 1.0, ptr::null_mut()),
            DkdvStatus::NullPointer
        );
        assert!(last_error().contains("result"));
        let mut law = ptr::null_mut();
        assert_eq!(dkdv_law_gig(1.0, -1.0, 1.0, &mut law), DkdvStatus::Domain);
        assert!(law.is_null());
        assert_eq!(
            dkdv_law_cdf(ptr::null(), 1.0, &mut u),
            DkdvStatus::NullPointer
        );
    }
}

#[test]
fn law_handles() {
    unsafe {
        let mut law = ptr::null_mut();
        assert_eq!(dkdv_law_gamma(1.0, 2.0, &mut law), DkdvStatus::Ok);
        let mut c = 0.0;
        assert_eq!(dkdv_law_cdf(law, 0.5, &mut c), DkdvStatus::Ok);
        assert!((c - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
        let mut buf = [0.0; 64];
        assert_eq!(
            dkdv_law_sample(law, 3, buf.len(), buf.as_mut_ptr()),
            DkdvStatus::Ok
        );
        let mut again = [0.0; 64];
        assert_eq!(
            dkdv_law_sample(law, 3, again.len(), again.as_mut_ptr()),
            DkdvStatus::Ok
        );
        assert_eq!(buf, again);
        assert!(buf.iter().all(|&x| x > 0.0));
        assert_eq!(
            dkdv_law_sample(law, 3, 0, buf.as_mut_ptr()),
            DkdvStatus::Domain
        );
        dkdv_law_free(law);
        dkdv_law_free(ptr::null_mut());
    }
}

#[test]
fn matrix_handles() {
    unsafe {
        let eye = [1.0, 0.0, 0.0, 1.0];
        let (mut x, mut y) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(dkdv_spd_new(2, eye.as_ptr(), &mut x), DkdvStatus::Ok);
        assert_eq!(dkdv_spd_new(2, eye.as_ptr(), &mut y), DkdvStatus::Ok);
        let (mut u, mut v) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            dkdv_matrix_map(1.0, 2.0, x, y, &mut u, &mut v),
            DkdvStatus::Ok
        );
        assert_eq!(dkdv_spd_dim(u), 2);
        let mut e = [0.0; 4];
        assert_eq!(dkdv_spd_entries(u, e.as_mut_ptr()), DkdvStatus::Ok);
        assert!((e[0] - 1.5).abs() < 1e-15 && e[1].abs() < 1e-15);
        assert_eq!(dkdv_spd_entries(v, e.as_mut_ptr()), DkdvStatus::Ok);
        assert!((e[3] - 2.0 / 3.0).abs() < 1e-15);
        let bad = [1.0, 2.0, 2.0, 1.0];
        let mut z = ptr::null_mut();
        assert_eq!(
            dkdv_spd_new(2, bad.as_ptr(), &mut z),
            DkdvStatus::NotPositiveDefinite
        );
        for h in [x, y, u, v] {
            dkdv_spd_free(h);
        }
    }
}

#[test]
fn balance_report_roundtrip() {
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(
            dkdv_balance_verify(0, 1.0, 2.0, 1.0, 1.0, 0.5, 7, 5000, 99, &mut report),
            DkdvStatus::Ok
        );
        let mut pass = false;
        assert_eq!(dkdv_report_pass(report, &mut pass), DkdvStatus::Ok);
        assert!(pass);
        let mut json = ptr::null_mut();
        assert_eq!(dkdv_report_json(report, &mut json), DkdvStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["seed"], 7);
        dkdv_string_free(json);
        dkdv_report_free(report);
        assert_eq!(
            dkdv_balance_verify(5, 1.0, 2.0, 1.0, 1.0, 0.5, 7, 5000, 99, &mut report),
            DkdvStatus::Domain
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(dkdv_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
