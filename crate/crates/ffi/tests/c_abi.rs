use std::ffi::{CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use uplift_ffi::*;

const SCHEMA: &str = "x:numeric,g:categorical,t:treatment,y:response";

fn write_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("x,g,t,y\n");
    for i in 0..120 {
        let x = (i * 7 % 120) as f64;
        let t = i % 2;
        let g = ["a", "b", "c"][i % 3];
        let y = if t == 1 && x > 60.0 { 3.0 } else { 1.0 } + (i % 4) as f64 * 0.25;
        text.push_str(&format!("{x},{g},{t},{y}\n"));
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = uplift_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut UpliftDataset {
    let mut data = ptr::null_mut();
    let path = c(path.to_str().unwrap());
    let status = unsafe { uplift_dataset_load_csv(path.as_ptr(), c(SCHEMA).as_ptr(), &mut data) };
    assert_eq!(status, UpliftStatus::Ok);
    data
}

#[test]
fn train_predict_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = load(&write_csv(dir.path()));
    unsafe {
        assert_eq!(uplift_dataset_len(data), 120);
        assert_eq!(uplift_dataset_n_features(data), 2);
        assert_eq!(uplift_dataset_n_treatments(data), 2);

        let mut params = uplift_cts_params_default(2);
        assert_eq!((params.ntree, params.n_reg, params.mtry, params.min_split), (100, 3, 1, 100));
        params.ntree = 8;
        params.min_split = 10;
        params.seed = 3;
        let mut model = ptr::null_mut();
        assert_eq!(uplift_train_cts(data, &params, &mut model), UpliftStatus::Ok);
        assert!(uplift_last_error().is_null());
        assert_eq!(uplift_model_n_treatments(model), 2);

        let x = [100.0, 0.0];
        let mut est = [0.0; 2];
        let mut chosen = 9;
        assert_eq!(uplift_model_predict(model, x.as_ptr(), 2, est.as_mut_ptr(), 2, &mut chosen), UpliftStatus::Ok);
        assert_eq!(chosen, 1);
        assert!(est[1] > est[0]);

        let mut report = UpliftReport::default();
        assert_eq!(uplift_evaluate_model(model, data, ptr::null(), 0, 0.95, &mut report), UpliftStatus::Ok);
        let mut control = UpliftReport::default();
        let half = [0.5, 0.5];
        assert_eq!(uplift_evaluate_constant(data, 0, half.as_ptr(), 2, 0.95, &mut control), UpliftStatus::Ok);
        assert_eq!(report.n, 120);
        assert!(report.estimate > control.estimate);
        assert!(report.ci_low < report.estimate && report.estimate < report.ci_high);

        let path = c(dir.path().join("m.json").to_str().unwrap());
        assert_eq!(uplift_model_save(model, path.as_ptr()), UpliftStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(uplift_model_load(path.as_ptr(), &mut back), UpliftStatus::Ok);
        let mut est2 = [0.0; 2];
        let mut chosen2 = 9;
        uplift_model_predict(back, x.as_ptr(), 2, est2.as_mut_ptr(), 2, &mut chosen2);
        assert_eq!((est, chosen), (est2, chosen2));

        uplift_model_free(back);
        uplift_model_free(model);
        uplift_dataset_free(data);
    }
}

#[test]
fn sma_through_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let data = load(&write_csv(dir.path()));
    unsafe {
        let mut params = uplift_sma_params_default(2);
        assert_eq!(params.min_samples_leaf, 5);
        params.ntree = 5;
        let mut model = ptr::null_mut();
        assert_eq!(uplift_train_sma(data, &params, &mut model), UpliftStatus::Ok);
        let mut report = UpliftReport::default();
        assert_eq!(uplift_evaluate_model(model, data, ptr::null(), 0, 0.9, &mut report), UpliftStatus::Ok);
        assert_eq!(report.conf_level, 0.9);
        uplift_model_free(model);
        uplift_dataset_free(data);
    }
}

#[test]
fn error_codes_and_messages() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut data = ptr::null_mut();
        let missing = c(dir.path().join("none.csv").to_str().unwrap());
        assert_eq!(uplift_dataset_load_csv(missing.as_ptr(), c(SCHEMA).as_ptr(), &mut data), UpliftStatus::Io);
        assert!(data.is_null());
        assert!(last_error().starts_with("io:"));

        assert_eq!(uplift_dataset_load_csv(ptr::null(), c(SCHEMA).as_ptr(), &mut data), UpliftStatus::NullPointer);
        let path = c(write_csv(dir.path()).to_str().unwrap());
        assert_eq!(
            uplift_dataset_load_csv(path.as_ptr(), c("x:numeric,t:treatment,y:response").as_ptr(), &mut data),
            UpliftStatus::Parse
        );
        assert_eq!(uplift_dataset_load_csv(path.as_ptr(), c("x:bogus").as_ptr(), &mut data), UpliftStatus::Schema);

        let data = load(Path::new(path.to_str().unwrap()));
        let mut params = uplift_cts_params_default(2);
        params.mtry = 7;
        let mut model = ptr::null_mut();
        assert_eq!(uplift_train_cts(data, &params, &mut model), UpliftStatus::InvalidParameter);
        assert!(last_error().contains("mtry"));

        params = uplift_cts_params_default(2);
        params.ntree = 2;
        assert_eq!(uplift_train_cts(data, &params, &mut model), UpliftStatus::Ok);
        let mut est = [0.0; 1];
        let mut chosen = 0;
        let x = [1.0, 0.0];
        assert_eq!(
            uplift_model_predict(model, x.as_ptr(), 2, est.as_mut_ptr(), 1, &mut chosen),
            UpliftStatus::BufferTooSmall
        );
        let mut est = [0.0; 2];
        assert_eq!(
            uplift_model_predict(model, x.as_ptr(), 1, est.as_mut_ptr(), 2, &mut chosen),
            UpliftStatus::SchemaMismatch
        );
        let bad = [0.5, 0.6];
        let mut report = UpliftReport::default();
        assert_eq!(
            uplift_evaluate_model(model, data, bad.as_ptr(), 2, 0.95, &mut report),
            UpliftStatus::InvalidParameter
        );

        let doc = dir.path().join("v2.json");
        fs::write(&doc, r#"{"format_version": 2, "algorithm": "cts"}"#).unwrap();
        let doc = c(doc.to_str().unwrap());
        let mut loaded = ptr::null_mut();
        assert_eq!(uplift_model_load(doc.as_ptr(), &mut loaded), UpliftStatus::VersionMismatch);
        assert!(loaded.is_null());

        uplift_model_free(model);
        uplift_dataset_free(data);
        uplift_model_free(ptr::null_mut());
        uplift_dataset_free(ptr::null_mut());
        assert_eq!(uplift_dataset_len(ptr::null()), 0);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/uplift.h")
}

#[test]
fn header_declares_the_api() {
    let text = fs::read_to_string(header()).unwrap();
    for name in [
        "uplift_dataset_load_csv",
        "uplift_train_cts",
        "uplift_train_sma",
        "uplift_model_predict",
        "uplift_evaluate_model",
        "uplift_last_error",
        "UPLIFT_STATUS_VERSION_MISMATCH",
        "typedef struct UpliftModel UpliftModel;",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the static library when a C
/// compiler is available.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe_dir = std::env::current_exe().unwrap();
    let profile_dir = exe_dir.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libuplift_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let src = dir.path().join("main.c");
    fs::write(
        &src,
        format!(
            r#"
#include <stdio.h>
#include "uplift.h"
int main(void) {{
    UpliftDataset *data = NULL;
    if (uplift_dataset_load_csv("{csv}", "{SCHEMA}", &data) != UPLIFT_STATUS_OK) return 1;
    UpliftCtsParams p = uplift_cts_params_default(uplift_dataset_n_features(data));
    p.ntree = 4; p.min_split = 10;
    UpliftModel *model = NULL;
    if (uplift_train_cts(data, &p, &model) != UPLIFT_STATUS_OK) return 2;
    UpliftReport r;
    if (uplift_evaluate_constant(data, 5, NULL, 0, 0.95, &r) != UPLIFT_STATUS_INVALID_PARAMETER) return 3;
    if (uplift_last_error() == NULL) return 4;
    if (uplift_evaluate_model(model, data, NULL, 0, 0.95, &r) != UPLIFT_STATUS_OK) return 5;
    printf("%zu %.3f\n", r.n, r.estimate);
    uplift_model_free(model);
    uplift_dataset_free(data);
    return 0;
}}
"#,
            csv = csv.display()
        ),
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("120 "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
