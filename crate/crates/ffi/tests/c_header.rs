use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "its.h"

int main(void) {
    ItsRouge r;
    if (its_rouge_n("a b c d", "a b x d", 1, &r) != ITS_STATUS_OK) return 1;
    if (r.recall != 0.75) return 2;
    ItsModel *m = NULL;
    if (its_model_load("/nonexistent.json", &m) != ITS_STATUS_IO || m != NULL) return 3;
    if (its_last_error() == NULL) return 4;
    its_model_free(m);
    printf("%s\n", its_version());
    return 0;
}
"#;

/// Builds the static library, which `cargo test` does not produce.
fn static_library() -> PathBuf {
    let status = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "--profile", "test", "-p", "its-ffi", "--lib"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .status()
        .expect("cargo");
    assert!(status.success(), "cargo build failed");
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("libits_ffi.a")
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/its.h")).unwrap();
    for name in [
        "ITS_STATUS_OK",
        "typedef struct ItsModel ItsModel",
        "its_model_load",
        "its_model_free",
        "its_model_score",
        "its_model_summarize",
        "its_rouge_n",
        "its_rouge_l",
        "its_last_error",
        "its_string_free",
    ] {
        assert!(header.contains(name), "its.h lacks {name}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let lib = static_library();
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler");
    assert!(status.success(), "compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
