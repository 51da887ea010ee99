use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmlab")).args(args).env_remove("BMLAB_OUT_DIR").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn smoke_report(dir: &Path) -> std::path::PathBuf {
    let out = bmlab(&["preset", "smoke", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("smoke.json")
}

#[test]
fn signset_emits_separated_vectors() {
    let v = json(&bmlab(&["signset", "--n", "8", "--theta", "0.5", "--exhaustive"]));
    let vecs: Vec<Vec<i64>> = serde_json::from_value(v["vectors"].clone()).unwrap();
    assert_eq!(v["size"].as_u64().unwrap() as usize, vecs.len());
    for (i, s) in vecs.iter().enumerate() {
        for t in &vecs[i + 1..] {
            let d: i64 = s.iter().zip(t).map(|(a, b)| a * b).sum();
            assert!(d.abs() <= 4);
        }
    }
}

#[test]
fn exact_distance_in_the_plane() {
    let v = json(&bmlab(&["bmdist", "exact2d", "--e", "l1:2", "--f", "linf:2"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
    let v = json(&bmlab(&["bmdist", "exact2d", "--e", "polygon:8", "--f", "polygon:8", "--tol", "1e-4"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() <= 1e-4);
}

#[test]
fn space_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.json");
    std::fs::write(&path, r#"{"space":"polytopal","dim":2,"functionals":[[1,0],[0,1]]}"#).unwrap();
    let v = json(&bmlab(&["bmdist", "exact2d", "--e", path.to_str().unwrap(), "--f", "linf:2"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
}

#[test]
fn lower_chain_flags() {
    let v = json(&bmlab(&["bounds", "lower", "--n", "400", "--theta", "0.5", "--r", "1.9"]));
    assert_eq!(v["flags"]["passes"], true);
    let v = json(&bmlab(&["bounds", "hh", "--n", "8", "--N", "4", "--r", "2"]));
    assert_eq!(v["result"]["level"], 2);
}

#[test]
fn defect_routes_agree() {
    let v = json(&bmlab(&["qx", "defect", "--n", "3", "--N", "2", "--seed", "7"]));
    let (a, b) = (v["defect"].as_f64().unwrap(), v["defect_kronecker"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-8);
}

#[test]
fn tail_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tail.csv");
    let out = bmlab(&["qx", "tail", "--n", "2", "--N", "2", "--s", "0.5", "--samples", "100", "--csv", csv.to_str().unwrap()]);
    json(&out);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "index,seed,n,N,normalized_trace");
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn invalid_arguments_exit_two() {
    assert_eq!(code(&bmlab(&["signset", "--n", "8", "--theta", "2"])), 2);
    assert_eq!(code(&bmlab(&["preset", "nope"])), 2);
    assert_eq!(code(&bmlab(&["bmdist", "exact2d", "--e", "l1:2", "--f", "linf:3"])), 2);
    assert_eq!(code(&bmlab(&["signset", "--theta", "0.5"])), 2);
}

#[test]
fn preset_run_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let report = smoke_report(dir.path());
    let v = json(&bmlab(&["verify", report.to_str().unwrap()]));
    assert_eq!(v["ok"], true);

    let mut r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let certs = r["certificates"].as_array_mut().unwrap();
    let map = certs.iter_mut().find(|c| c["certificate"] == "separated_family").unwrap();
    let x = &mut map["family"]["pairwise_overlaps"][0][1];
    *x = serde_json::json!(x.as_f64().unwrap() * 0.5);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, r.to_string()).unwrap();
    let out = bmlab(&["verify", tampered.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(serde_json::from_slice::<Value>(&out.stdout).unwrap()["ok"], false);

    std::fs::write(&tampered, "{").unwrap();
    assert_eq!(code(&bmlab(&["verify", tampered.to_str().unwrap()])), 2);
}

#[test]
fn run_config_and_out_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json(&bmlab(&["preset", "chains", "--print-config"]));
    let path = dir.path().join("chains.cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bmlab"))
        .args(["run", path.to_str().unwrap()])
        .env("BMLAB_OUT_DIR", dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out").join("chains.json").exists());
}

#[test]
fn failing_check_exits_one_and_bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"name":"fail","seed":1,"experiments":[
            {"kind":"trace_tail","n":2,"N":2,"s":0.0,"samples":100,"max_frequency":0.0}]}"#,
    )
    .unwrap();
    let out = bmlab(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("fail.json").exists());

    std::fs::write(&cfg, r#"{"name":"bad","seed":1,"experiments":[{"kind":"sign_set","n":40,"theta":0.5}]}"#).unwrap();
    assert_eq!(code(&bmlab(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])), 2);
}
