use std::ffi::{CStr, CString};
use std::ptr;

use chimera_tts_ffi::*;

fn generate(l: usize, seed: u64) -> *mut CtInstance {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ct_instance_generate(l, seed, 0, &mut h) }, CtStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let p = ct_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn instance_round_trips_through_text() {
    let h = generate(2, 9);
    unsafe {
        assert_eq!(ct_instance_num_spins(h), 32);
        let mut text = ptr::null_mut();
        assert_eq!(ct_instance_to_text(h, &mut text), CtStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ct_instance_parse(text, 0, &mut back), CtStatus::Ok);
        let (mut a, mut b) = (0i64, 0i64);
        assert_eq!(ct_ground_energy(h, &mut a, ptr::null_mut()), CtStatus::Ok);
        assert_eq!(ct_ground_energy(back, &mut b, ptr::null_mut()), CtStatus::Ok);
        assert_eq!(a, b);
        ct_string_free(text);
        ct_instance_free(back);
        ct_instance_free(h);
    }
}

#[test]
fn witness_attains_ground_energy() {
    let h = generate(2, 3);
    unsafe {
        let mut e0 = 0i64;
        let mut witness = vec![0i8; ct_instance_num_spins(h)];
        assert_eq!(ct_ground_energy(h, &mut e0, witness.as_mut_ptr()), CtStatus::Ok);
        let mut e = 0i64;
        assert_eq!(ct_instance_energy(h, witness.as_ptr(), witness.len(), &mut e), CtStatus::Ok);
        assert_eq!(e, e0);
        ct_instance_free(h);
    }
}

#[test]
fn ferromagnet_is_annealed_to_ground_state() {
    let mut text = String::from("chimera 1 8 0\n");
    for i in 0..4 {
        for j in 4..8 {
            text.push_str(&format!("{i} {j} 1\n"));
        }
    }
    let text = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(ct_instance_parse(text.as_ptr(), 7, &mut h), CtStatus::Ok);
        let up = [1i8; 8];
        let mut e = 0;
        assert_eq!(ct_instance_energy(h, up.as_ptr(), 8, &mut e), CtStatus::Ok);
        assert_eq!(e, -16);
        for algorithm in [CtAlgorithm::Sa, CtAlgorithm::Sqa, CtAlgorithm::Mfa] {
            let schedule = CtSchedule { algorithm, t_a: 200, beta: 10.0, slices: 0, table_size: 0 };
            let mut rec = CtTtsRecord::default();
            assert_eq!(ct_estimate_tau(h, &schedule, -16, 10.0, 10_000, 1, &mut rec), CtStatus::Ok);
            assert!(rec.s > 0.5 && !rec.is_upper_bound, "{algorithm:?}: {rec:?}");
            assert!((rec.tau * rec.s - 1.0).abs() < 1e-12);
            let (mut frac, mut fe) = (0.0, 0i64);
            assert_eq!(ct_anneal(h, &schedule, -16, 1, 0, &mut frac, &mut fe), CtStatus::Ok);
            assert!((0.0..=1.0).contains(&frac) && fe >= -16);
        }
        ct_instance_free(h);
    }
}

#[test]
fn gpd_functions_and_fit() {
    let mut p = 0.0;
    unsafe {
        assert_eq!(ct_gpd_cdf(0.5, 0.0, 1.0, 2.0, &mut p), CtStatus::Ok);
        assert!((p - 0.75).abs() < 1e-15);
        let mut x = 0.0;
        assert_eq!(ct_gpd_quantile(0.5, 0.0, 1.0, 0.75, &mut x), CtStatus::Ok);
        assert!((x - 2.0).abs() < 1e-12);
        assert_eq!(ct_gpd_quantile(0.5, 0.0, 1.0, 1.0, &mut x), CtStatus::InvalidParameter);

        let sample: Vec<f64> = (1..=2000).map(|i| {
            let q = (i as f64 - 0.5) / 2000.0;
            ((1.0 - q).powf(-0.3) - 1.0) / 0.3
        }).collect();
        let mut fit = CtGpdFit::default();
        assert_eq!(ct_fit_gpd(sample.as_ptr(), sample.len(), 0.0, 30, &mut fit), CtStatus::Ok);
        assert_eq!(fit.k, 2000);
        assert!((fit.xi - 0.3).abs() < 3.0 * fit.xi_se, "{fit:?}");
        assert!(fit.xi_se > 0.0 && fit.sigma_se > 0.0);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(ct_instance_generate(0, 1, 0, &mut h), CtStatus::InvalidParameter);
        assert!(!last_error().is_empty());
        assert_eq!(ct_instance_generate(2, 1, 0, ptr::null_mut()), CtStatus::NullPointer);
        assert!(last_error().contains("null"));

        let bad = CString::new("chimera 1 8 0\n0 1 1\n").unwrap();
        assert_eq!(ct_instance_parse(bad.as_ptr(), 0, &mut h), CtStatus::Parse);

        let mut e = 0;
        assert_eq!(ct_ground_energy(ptr::null(), &mut e, ptr::null_mut()), CtStatus::NullPointer);

        let few = [1.0, 2.0, 3.0];
        let mut fit = CtGpdFit::default();
        assert_eq!(ct_fit_gpd(few.as_ptr(), 3, 0.0, 30, &mut fit), CtStatus::InsufficientData);
        assert_eq!(ct_fit_gpd(few.as_ptr(), 3, 5.0, 30, &mut fit), CtStatus::InsufficientData);

        let g = generate(1, 2);
        let schedule = CtSchedule { algorithm: CtAlgorithm::Sqa, t_a: 0, beta: 10.0, slices: 0, table_size: 0 };
        let mut rec = CtTtsRecord::default();
        assert_eq!(ct_estimate_tau(g, &schedule, 0, 1.0, 10, 1, &mut rec), CtStatus::InvalidParameter);
        ct_instance_free(g);

        let mut p = 0.0;
        assert_eq!(ct_gpd_cdf(0.1, 0.0, 1.0, 1.0, &mut p), CtStatus::Ok);
        assert!(ct_last_error_message().is_null());
        ct_instance_free(ptr::null_mut());
        ct_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(ct_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/chimera_tts.h");
    for name in [
        "ct_last_error_message", "ct_version", "ct_instance_generate", "ct_instance_parse",
        "ct_instance_free", "ct_instance_num_spins", "ct_instance_to_text", "ct_string_free",
        "ct_instance_energy", "ct_ground_energy", "ct_anneal", "ct_estimate_tau", "ct_fit_gpd",
        "ct_gpd_cdf", "ct_gpd_quantile", "typedef struct CtInstance CtInstance",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
