//! Compiles a small C program against the generated header and links it to
//! the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn compiler() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().map(|o| o.status.success()).unwrap_or(false))
        .map(String::from)
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "bmlab.h"

int main(void) {
    double v = 0.0;
    if (bm_exact_sign_tail(20, 0.5, &v) != BM_STATUS_OK) return 1;
    if (v != 6196.0 / 524288.0) return 2;
    BmSpace *a = NULL, *b = NULL;
    if (bm_space_l1(2, &a) != BM_STATUS_OK || bm_space_linf(2, &b) != BM_STATUS_OK) return 3;
    double d = 0.0, lo = 0.0;
    if (bm_distance_exact_2d(a, b, 1e-3, &d, &lo, NULL) != BM_STATUS_OK) return 4;
    if (d < 0.999 || d > 1.001) return 5;
    if (bm_hoeffding_tail(-1.0, 4, &v) != BM_STATUS_INVALID_ARGUMENT) return 6;
    if (bm_last_error() == NULL || strlen(bm_last_error()) == 0) return 7;
    bm_space_free(a);
    bm_space_free(b);
    printf("%s\n", bm_version());
    return 0;
}
"#;

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, PROGRAM).unwrap();
    for lang in ["c", "c++"] {
        let out = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(header_dir())
            .arg(&src)
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn program_links_against_static_library() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libbmlab_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    let bin = dir.path().join("probe");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(&cc)
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
