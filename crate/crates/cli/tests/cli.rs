use std::path::Path;
use std::process::{Command, Output};

fn tkz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tkz")).args(args).output().expect("binary runs")
}

fn small_sparse(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "sparse",
        "--out",
        out,
        "--set",
        "problem.m=40",
        "--set",
        "problem.n=80",
        "--set",
        "problem.sparsity=3",
        "--set",
        "solver.max_iters=2000",
        "--set",
        "solver.sequence=uniform_random",
        "--set",
        "solver.step=1",
    ];
    args.extend_from_slice(extra);
    tkz(&args)
}

#[test]
fn reruns_produce_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_sparse(&a, &["--seed", "5"]).status.success());
    assert!(small_sparse(&b, &["--seed", "5"]).status.success());
    let ta = std::fs::read(a.join("trace.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("trace.csv")).unwrap());
    let c = dir.path().join("c");
    assert!(small_sparse(&c, &["--seed", "6"]).status.success());
    assert_ne!(ta, std::fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert!(small_sparse(&a, &[]).status.success());
    let b = dir.path().join("b");
    let cfg = a.join("config.toml");
    let out = tkz(&["sparse", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("config.toml")).unwrap(), std::fs::read(b.join("config.toml")).unwrap());
}

#[test]
fn run_directory_contents() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_sparse(dir.path(), &[]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("sparse seed=") && stdout.contains("rel_err="), "{stdout}");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "sparse");
    assert_eq!(manifest["stop_reason"], "max_iters");
    assert!(manifest["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 3);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iter,index,residual,rel_change,rel_err,bregman"));

    let img = dir.path().join("img");
    let out = tkz(&[
        "inpaint",
        "--out",
        img.to_str().unwrap(),
        "--set",
        "problem.size=16",
        "--set",
        "problem.tile=4",
        "--set",
        "problem.box_top=4",
        "--set",
        "problem.box_left=4",
        "--set",
        "problem.box_height=4",
        "--set",
        "problem.box_width=4",
        "--set",
        "solver.batch=50",
        "--set",
        "solver.max_iters=10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.toml", "trace.csv", "manifest.json", "original.pgm", "observed.pgm", "recovered.pgm"] {
        assert!(img.join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [&["--set", "solver.stepsize=1"][..], &["--set", "solver.step=-1"], &["--set", "problem.m=x"]] {
        let out = small_sparse(dir.path(), bad);
        assert_eq!(out.status.code(), Some(2), "{bad:?}");
        let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
        assert_eq!(record["error"], "config");
    }
    let missing = tkz(&["tensor", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(tkz(&["sparse", "--bogus"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_sparse(dir.path(), &["--set", "solver.step=1e6"]);
    assert_eq!(out.status.code(), Some(3));
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["error"], "numerical");
}

#[test]
fn selftest_passes_and_catches_corruption() {
    let ok = tkz(&["selftest", "--instances", "20"]);
    assert!(ok.status.success());
    let report = String::from_utf8(ok.stdout).unwrap();
    assert!(report.contains("PASS   frequency_factorization"));
    assert_eq!(report, String::from_utf8(tkz(&["selftest", "--instances", "20"]).stdout).unwrap());

    let bad = tkz(&["selftest", "--instances", "20", "--corrupt-fft"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8(bad.stdout).unwrap().contains("FAIL   frequency_factorization"));
}
