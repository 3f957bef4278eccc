use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use chartqa_ffi::*;

const SPEC: &str = r#"{
  "chart_type": "bar",
  "plot_area": {"x": 80, "y": 60, "w": 640, "h": 480},
  "marks": [
    {"kind": "bar", "geometry": {"x": 150, "y": 340, "w": 60, "h": 200}, "color": [31, 119, 180]},
    {"kind": "bar", "geometry": {"x": 450, "y": 140, "w": 60, "h": 400}, "color": [31, 119, 180]}
  ],
  "texts": [
    {"role": "yAxisLabel", "text": "0", "bbox": {"x": 50, "y": 532, "w": 20, "h": 16}},
    {"role": "yAxisLabel", "text": "50", "bbox": {"x": 50, "y": 432, "w": 20, "h": 16}},
    {"role": "yAxisLabel", "text": "100", "bbox": {"x": 50, "y": 332, "w": 20, "h": 16}},
    {"role": "xAxisLabel", "text": "North", "bbox": {"x": 160, "y": 548, "w": 40, "h": 16}},
    {"role": "xAxisLabel", "text": "South", "bbox": {"x": 460, "y": 548, "w": 40, "h": 16}}
  ]
}"#;

fn take(s: *mut libc::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { cq_string_free(s) };
    out
}

fn last_error() -> String {
    let p = cq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn extract_and_execute() {
    let json = CString::new(SPEC).unwrap();
    let mut chart = ptr::null_mut();
    assert_eq!(unsafe { cq_chart_parse(json.as_ptr(), &mut chart) }, CqStatus::Ok);
    let mut table = ptr::null_mut();
    let mut diags = ptr::null_mut();
    assert_eq!(unsafe { cq_extract_table(chart, &mut table, &mut diags) }, CqStatus::Ok);
    take(diags);

    let (mut rows, mut cols) = (0, 0);
    assert_eq!(unsafe { cq_table_shape(table, &mut rows, &mut cols) }, CqStatus::Ok);
    assert_eq!((rows, cols), (2, 1));
    let (mut v, mut present) = (0.0, false);
    assert_eq!(unsafe { cq_table_cell(table, 1, 0, &mut v, &mut present) }, CqStatus::Ok);
    assert!(present);
    assert!((v - 200.0).abs() < 1e-9);
    assert_eq!(unsafe { cq_table_cell(table, 5, 0, &mut v, &mut present) }, CqStatus::InvalidArgument);

    let op = CString::new("SUM").unwrap();
    let (r, c) = ([0usize, 1], [0usize, 0]);
    let mut answer = ptr::null_mut();
    assert_eq!(
        unsafe { cq_execute(table, op.as_ptr(), r.as_ptr(), c.as_ptr(), 2, &mut answer) },
        CqStatus::Ok
    );
    assert_eq!(take(answer), "300");

    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { cq_table_to_csv(table, &mut csv) }, CqStatus::Ok);
    assert!(take(csv).starts_with(",value\nNorth,100\n"));

    unsafe {
        cq_table_free(table);
        cq_chart_free(chart);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("{\"chart_type\": \"radar\"}").unwrap();
    let mut chart = ptr::null_mut();
    assert_eq!(unsafe { cq_chart_parse(bad.as_ptr(), &mut chart) }, CqStatus::Parse);
    assert!(last_error().contains("chart_type"));
    assert!(chart.is_null());

    assert_eq!(unsafe { cq_chart_parse(ptr::null(), &mut chart) }, CqStatus::NullPointer);

    let csv = CString::new(",v\na,1\n").unwrap();
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { cq_table_from_csv(csv.as_ptr(), &mut table) }, CqStatus::Ok);
    let op = CString::new("MEDIAN").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { cq_execute(table, op.as_ptr(), ptr::null(), ptr::null(), 0, &mut out) },
        CqStatus::InvalidArgument
    );
    assert!(last_error().contains("MEDIAN"));
    unsafe { cq_table_free(table) };

    let path = CString::new("/nonexistent/model.ckpt").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { cq_model_load(path.as_ptr(), &mut model) }, CqStatus::Io);
}

#[test]
fn relaxed_match_boundary() {
    let gold = CString::new("100").unwrap();
    let mut ok = false;
    for (pred, want) in [("104.9", true), ("105.1", false)] {
        let p = CString::new(pred).unwrap();
        assert_eq!(unsafe { cq_relaxed_match(p.as_ptr(), gold.as_ptr(), 0.05, &mut ok) }, CqStatus::Ok);
        assert_eq!(ok, want, "{pred}");
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "chartqa.h"

int main(void) {
    CqTable *t = NULL;
    if (cq_table_from_csv(",v\na,2\nb,6\n", &t) != CQ_STATUS_OK) return 1;
    size_t rows[2] = {0, 1}, cols[2] = {0, 0};
    char *ans = NULL;
    if (cq_execute(t, "AVERAGE", rows, cols, 2, &ans) != CQ_STATUS_OK) return 2;
    int ok = strcmp(ans, "4") == 0;
    cq_string_free(ans);
    if (cq_execute(t, "SUM", rows, cols, 7, NULL) != CQ_STATUS_NULL_POINTER) return 3;
    if (cq_last_error() == NULL) return 4;
    cq_table_free(t);
    printf("%s\n", ok ? "ok" : "mismatch");
    return ok ? 0 : 5;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("chartqa.h")).unwrap();
    for f in ["cq_chart_parse", "cq_extract_table", "cq_execute", "cq_model_answer", "cq_last_error"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let Ok(cc) = which_cc() else {
        println!("no C compiler found; header content checked only");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let lib = [target_dir().join("libchartqa_ffi.a"), target_dir().join("deps").join("libchartqa_ffi.a")]
        .into_iter()
        .find(|p| p.exists());
    let Some(lib) = lib else {
        let status = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .status()
            .unwrap();
        assert!(status.success());
        println!("static library not built; syntax check only");
        return;
    };
    let exe = dir.path().join("main");
    let status = Command::new(&cc)
        .args(["-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<String, ()> {
    ["cc", "gcc", "clang"]
        .iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(|c| c.to_string())
        .ok_or(())
}
