use std::ffi::{CStr, CString};
use std::ptr;

use f0synth::anonymize::{write_pool, F0Stats, PoolEntry, SpeakerPool};
use f0synth::featureio::Gender;
use f0synth::model::{init_params, predict_f0, save_checkpoint, ModelConfig};
use f0synth_ffi::*;
use ndarray::Array2;

fn last_error() -> String {
    let p = f0s_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn model_round_trip_through_handle() {
    let dir = tempfile::tempdir().unwrap();
    let mut params = init_params(&ModelConfig::desk(5), 2).unwrap();
    params.norm.logf0_mean = 5.0;
    let path = dir.path().join("m.f0md");
    save_checkpoint(&path, &params).unwrap();

    let mut model: *mut F0sModel = ptr::null_mut();
    assert_eq!(
        unsafe { f0s_model_load(cpath(&path).as_ptr(), &mut model) },
        F0sStatus::Ok
    );
    assert_eq!(unsafe { f0s_model_input_dim(model) }, 5);

    let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.3).sin()).collect();
    let mut f0 = vec![0.0; 3];
    let mut pv = vec![0.0; 3];
    let st = unsafe { f0s_model_predict(model, x.as_ptr(), 3, 5, f0.as_mut_ptr(), pv.as_mut_ptr()) };
    assert_eq!(st, F0sStatus::Ok);
    let (expected, expected_pv) =
        predict_f0(&params, Array2::from_shape_vec((3, 5), x.clone()).unwrap().view()).unwrap();
    assert_eq!(&f0[..], &expected[..]);
    assert_eq!(pv, expected_pv);

    let st = unsafe { f0s_model_predict(model, x.as_ptr(), 3, 4, f0.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, F0sStatus::DimensionMismatch);
    assert!(!last_error().is_empty());
    unsafe { f0s_model_free(model) };
    unsafe { f0s_model_free(ptr::null_mut()) };
}

#[test]
fn load_errors_map_to_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut model: *mut F0sModel = ptr::null_mut();
    let missing = cpath(&dir.path().join("nope.f0md"));
    assert_eq!(unsafe { f0s_model_load(missing.as_ptr(), &mut model) }, F0sStatus::Io);
    assert!(model.is_null());

    let junk = dir.path().join("junk.f0md");
    std::fs::write(&junk, b"XXXXXXXXXXXX").unwrap();
    assert_eq!(
        unsafe { f0s_model_load(cpath(&junk).as_ptr(), &mut model) },
        F0sStatus::Format
    );
    assert_eq!(
        unsafe { f0s_model_load(ptr::null(), &mut model) },
        F0sStatus::NullPointer
    );
    assert!(last_error().contains("null"));
}

#[test]
fn metrics_match_core() {
    let truth = [100.0, 200.0, 150.0, 0.0];
    let pred = [130.0, 205.0, 150.0, 120.0];
    let mut counts = F0sPitchCounts::default();
    assert_eq!(
        unsafe { f0s_pitch_counts(pred.as_ptr(), truth.as_ptr(), 4, &mut counts) },
        F0sStatus::Ok
    );
    assert_eq!((counts.tp, counts.fp, counts.gross, counts.within_gross), (3, 1, 1, 2));

    let mut v = 0.0;
    assert_eq!(
        unsafe { f0s_gpe(pred.as_ptr(), truth.as_ptr(), 4, &mut v) },
        F0sStatus::Ok
    );
    assert!((v - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(
        unsafe { f0s_fpe(pred.as_ptr(), truth.as_ptr(), 4, &mut v) },
        F0sStatus::Ok
    );
    assert_eq!(v, 0.0);
    assert_eq!(
        unsafe { f0s_accurately_processed(pred.as_ptr(), truth.as_ptr(), 4, &mut v) },
        F0sStatus::Ok
    );
    assert_eq!(v, 0.5);

    let zeros = [0.0; 3];
    assert_eq!(
        unsafe { f0s_gpe(zeros.as_ptr(), zeros.as_ptr(), 3, &mut v) },
        F0sStatus::Undefined
    );

    let a = [1.0, 2.0, 3.0];
    let b = [1.0, 3.0, 2.0];
    assert_eq!(
        unsafe { f0s_pitch_correlation(a.as_ptr(), b.as_ptr(), 3, &mut v) },
        F0sStatus::Ok
    );
    assert!((v - 0.5).abs() < 1e-12);

    assert_eq!(unsafe { f0s_cents_error(105.0, 100.0, &mut v) }, F0sStatus::Ok);
    assert!((v - 84.46).abs() < 0.01);
    assert_eq!(
        unsafe { f0s_cents_error(0.0, 100.0, &mut v) },
        F0sStatus::InvalidArgument
    );
}

#[test]
fn shift_scale_through_ffi() {
    let f0 = [110.0, 0.0, 90.0];
    let mut out = [0.0; 3];
    let st = unsafe { f0s_shift_scale(f0.as_ptr(), 3, 100.0, 10.0, 200.0, 20.0, 0, out.as_mut_ptr()) };
    assert_eq!(st, F0sStatus::Ok);
    assert_eq!(out, [220.0, 0.0, 180.0]);
    let st = unsafe { f0s_shift_scale(f0.as_ptr(), 3, 100.0, 0.0, 200.0, 20.0, 0, out.as_mut_ptr()) };
    assert_eq!(st, F0sStatus::InvalidArgument);
    let st = unsafe { f0s_shift_scale(ptr::null(), 3, 100.0, 10.0, 200.0, 20.0, 1, out.as_mut_ptr()) };
    assert_eq!(st, F0sStatus::NullPointer);
}

#[test]
fn pool_selection_through_handle() {
    let dir = tempfile::tempdir().unwrap();
    let entry = |id: &str, g, x: [f64; 2], mean| PoolEntry {
        speaker_id: id.into(),
        gender: g,
        xvec: x.to_vec(),
        stats: F0Stats { mean, std: 10.0 },
    };
    let pool = SpeakerPool::new(vec![
        entry("a", Gender::F, [1.0, 0.0], 200.0),
        entry("b", Gender::F, [0.0, 1.0], 210.0),
        entry("c", Gender::F, [-1.0, 0.0], 220.0),
        entry("m", Gender::M, [0.5, 0.5], 120.0),
    ])
    .unwrap();
    let path = dir.path().join("pool.csv");
    write_pool(&path, "xv", &pool).unwrap();

    let mut handle: *mut F0sPool = ptr::null_mut();
    assert_eq!(
        unsafe { f0s_pool_load(cpath(&path).as_ptr(), &mut handle) },
        F0sStatus::Ok
    );
    assert_eq!(unsafe { f0s_pool_len(handle) }, 4);

    let src = [1.0, 0.0];
    let mut xv = [0.0; 2];
    let (mut mean, mut std) = (0.0, 0.0);
    let st = unsafe {
        f0s_pool_select(
            handle,
            src.as_ptr(),
            2,
            b'F' as _,
            0,
            2,
            2,
            7,
            xv.as_mut_ptr(),
            &mut mean,
            &mut std,
        )
    };
    assert_eq!(st, F0sStatus::Ok);
    assert_eq!(xv, [-0.5, 0.5]);
    assert_eq!((mean, std), (215.0, 10.0));

    let st = unsafe {
        f0s_pool_select(
            handle,
            src.as_ptr(),
            2,
            b'F' as _,
            1,
            2,
            1,
            7,
            xv.as_mut_ptr(),
            &mut mean,
            &mut std,
        )
    };
    assert_eq!(st, F0sStatus::InsufficientPool);
    let st = unsafe {
        f0s_pool_select(
            handle,
            src.as_ptr(),
            2,
            b'X' as _,
            0,
            1,
            1,
            7,
            xv.as_mut_ptr(),
            &mut mean,
            &mut std,
        )
    };
    assert_eq!(st, F0sStatus::InvalidArgument);
    unsafe { f0s_pool_free(handle) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/f0synth.h")).unwrap();
    for name in [
        "f0s_last_error",
        "f0s_model_load",
        "f0s_model_free",
        "f0s_model_input_dim",
        "f0s_model_predict",
        "f0s_pitch_counts",
        "f0s_gpe",
        "f0s_fpe",
        "f0s_accurately_processed",
        "f0s_pitch_correlation",
        "f0s_cents_error",
        "f0s_shift_scale",
        "f0s_pool_load",
        "f0s_pool_free",
        "f0s_pool_len",
        "f0s_pool_select",
        "F0S_STATUS_UNDEFINED",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
