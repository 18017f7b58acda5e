use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use invmean_ffi::*;

fn last_error() -> String {
    let p = im_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn measure(json: &str) -> *mut ImMeasure {
    let s = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { im_measure_from_json(s.as_ptr(), &mut m) },
        ImStatus::Ok
    );
    m
}

fn generator(json: &str, lo: f64, hi: f64) -> *mut ImGenerator {
    let s = CString::new(json).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { im_generator_from_json(s.as_ptr(), lo, hi, &mut g) },
        ImStatus::Ok
    );
    g
}

const AGM: &str = r#"{"domain":[1,2],"pieces":[
    {"span":[0,0.5],"gen":{"kind":"power","p":1}},
    {"span":[0.5,1],"gen":{"kind":"power","p":0}}]}"#;

#[test]
fn measure_round_trip() {
    let (xs, ws) = ([3.0, 1.0, 3.0], [1.0, 1.0, 2.0]);
    let mut m = ptr::null_mut();
    let st = unsafe { im_measure_new(xs.as_ptr(), ws.as_ptr(), 3, 0.0, 4.0, &mut m) };
    assert_eq!(st, ImStatus::Ok);
    assert!(im_last_error().is_null());
    let mut n = 0;
    unsafe { im_measure_len(m, &mut n) };
    assert_eq!(n, 2);
    let (mut x, mut w) = (0.0, 0.0);
    unsafe { im_measure_atom(m, 1, &mut x, &mut w) };
    assert_eq!((x, w), (3.0, 0.75));
    let (mut lo, mut hi) = (0.0, 0.0);
    unsafe { im_measure_gamma(m, &mut lo, &mut hi) };
    assert_eq!((lo, hi), (1.0, 3.0));
    let (mut mean, mut var) = (0.0, 0.0);
    unsafe { im_measure_mean_variance(m, &mut mean, &mut var) };
    assert_eq!((mean, var), (2.5, 0.75));
    assert_eq!(
        unsafe { im_measure_atom(m, 2, &mut x, &mut w) },
        ImStatus::InvalidArgument
    );
    unsafe { im_measure_free(m) };
}

#[test]
fn errors_set_codes_and_messages() {
    let s = CString::new(r#"{"domain":[1,2],"atoms":[[1,0.5],[2,0.4]]}"#).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { im_measure_from_json(s.as_ptr(), &mut m) };
    assert_eq!(st, ImStatus::ParseError);
    assert!(m.is_null());
    assert!(last_error().contains("atoms"));

    assert_eq!(
        unsafe { im_measure_len(ptr::null(), &mut 0) },
        ImStatus::NullPointer
    );
    assert!(last_error().contains("measure"));

    let s = CString::new(r#"{"kind":"log"}"#).unwrap();
    let mut g = ptr::null_mut();
    let st = unsafe { im_generator_from_json(s.as_ptr(), 0.0, 1.0, &mut g) };
    assert_eq!(st, ImStatus::InvalidGenerator);

    let xs = [1.0];
    let ws = [1.0];
    let st = unsafe { im_measure_new(xs.as_ptr(), ws.as_ptr(), 1, 2.0, 1.0, &mut m) };
    assert_eq!(st, ImStatus::InvalidArgument);
}

#[test]
fn means_and_generators() {
    let m = measure(r#"{"domain":[1,4],"atoms":[[1,0.5],[4,0.5]]}"#);
    let g = generator(r#"{"kind":"power","p":0}"#, 1.0, 4.0);
    let mut v = 0.0;
    assert_eq!(unsafe { im_qa_mean(g, m, &mut v) }, ImStatus::Ok);
    assert!((v - 2.0).abs() < 1e-15);
    assert_eq!(unsafe { im_power_mean(-1.0, m, &mut v) }, ImStatus::Ok);
    assert!((v - 1.6).abs() < 1e-15);
    unsafe { im_generator_eval(g, 4.0, &mut v) };
    assert!((v - 4f64.ln()).abs() < 1e-15);
    unsafe { im_generator_invert(g, v, &mut v) };
    assert!((v - 4.0).abs() < 1e-14);
    assert_eq!(
        unsafe { im_generator_eval(g, 5.0, &mut v) },
        ImStatus::DomainError
    );
    unsafe {
        im_generator_free(g);
        im_measure_free(m);
    }
}

#[test]
fn family_iteration() {
    let s = CString::new(AGM).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { im_family_from_json(s.as_ptr(), &mut f) },
        ImStatus::Ok
    );
    let m = measure(r#"{"domain":[1,2],"atoms":[[1,0.5],[2,0.5]]}"#);

    let mut next = ptr::null_mut();
    assert_eq!(unsafe { im_family_apply(f, m, 2, &mut next) }, ImStatus::Ok);
    let (mut lo, mut hi) = (0.0, 0.0);
    unsafe { im_measure_gamma(next, &mut lo, &mut hi) };
    assert_eq!(hi, 1.5);
    assert!((lo - 2f64.sqrt()).abs() < 1e-15);

    let mut r = ImInvariantResult {
        lower: 0.0,
        upper: 0.0,
        k_value: 0.0,
        gap: 0.0,
        iterations: 0,
        status: ImIterationStatus::Stalled,
    };
    assert_eq!(
        unsafe { im_compute_invariant(f, m, 2, 0.0, 0, &mut r) },
        ImStatus::Ok
    );
    assert_eq!(r.status, ImIterationStatus::Converged);
    assert!((r.k_value - 1.4567910310469068).abs() < 1e-12);

    assert_eq!(
        unsafe { im_compute_invariant(f, m, 2, 0.0, 1, &mut r) },
        ImStatus::Ok
    );
    assert_eq!(
        (r.status, r.iterations),
        (ImIterationStatus::MaxIterations, 1)
    );
    assert_eq!(
        unsafe { im_compute_invariant(f, m, 0, 0.0, 0, &mut r) },
        ImStatus::InvalidArgument
    );
    unsafe {
        im_measure_free(next);
        im_measure_free(m);
        im_family_free(f);
    }
}

#[test]
fn separation_calls() {
    let a = generator(r#"{"kind":"power","p":1}"#, 1.0, 2.0);
    let b = generator(r#"{"kind":"power","p":-1}"#, 1.0, 2.0);
    let (mut d, mut bound) = (0.0, 0.0);
    assert_eq!(
        unsafe { im_separation(a, b, 1.0, 16, &mut d) },
        ImStatus::Ok
    );
    assert!(d > 0.0 && d < 1.0);
    let set = [a as *const ImGenerator, b as *const ImGenerator];
    assert_eq!(
        unsafe { im_contraction_bound(set.as_ptr(), 2, 1.0, 16, &mut bound) },
        ImStatus::Ok
    );
    assert_eq!(d, bound);
    assert_eq!(
        unsafe { im_separation(a, b, 2.0, 16, &mut d) },
        ImStatus::InvalidArgument
    );
    unsafe {
        im_generator_free(a);
        im_generator_free(b);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        im_measure_free(ptr::null_mut());
        im_generator_free(ptr::null_mut());
        im_family_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/invmean.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for name in [
        "im_measure_new",
        "im_compute_invariant",
        "im_contraction_bound",
        "IM_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping C compile check: {cc}: {e}");
            return;
        }
    };
    assert!(status.success());
}
