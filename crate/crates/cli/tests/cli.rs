use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adawave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adawave"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(o: &Output) -> String {
    stdout(o).lines().last().unwrap_or_default().to_string()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = adawave(dir, args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(summary(&o).starts_with("summary command="), "{}", stdout(&o));
    o
}

fn ring(dir: &Path) {
    ok(dir, &["ring-mask", "--rings", "2:6,8:11", "--grid", "24", "--out", "ring.vxl"]);
}

#[test]
fn verify_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    ring(dir.path());
    let o = ok(dir.path(), &["verify", "--mask", "ring.vxl", "--levels", "3", "--seed", "7"]);
    let out = stdout(&o);
    assert!(out.starts_with("identity,level,max_deviation\n"));
    assert_eq!(out.lines().count(), 1 + 5 * 3 + 1);
    assert!(summary(&o).contains("passed=true"));
}

#[test]
fn forward_then_inverse_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    ok(d, &["phantom", "--mask", "ring.vxl", "--seed", "2", "--noise", "0.5", "--out", "v.vxl"]);
    for stage in ["lazy", "predict", "haar", "ai"] {
        ok(d, &["fwd", "--mask", "ring.vxl", "--levels", "3", "--seed", "7", "--stage", stage, "--data", "v.vxl", "--out", "p.pyr"]);
        ok(d, &["inv", "--mask", "ring.vxl", "--seed", "7", "--pyramid", "p.pyr", "--out", "back.vxl"]);
        let o = ok(d, &["diff-vol", "v.vxl", "back.vxl", "--tolerance", "1e-9"]);
        assert!(summary(&o).contains("within=true"), "{stage}");
    }
    // A different hierarchy cannot invert the pyramid.
    let o = adawave(d, &["inv", "--mask", "ring.vxl", "--seed", "8", "--pyramid", "p.pyr", "--out", "x.vxl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!d.join("x.vxl").exists());
}

#[test]
fn diff_vol_flags_differences() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    ok(d, &["phantom", "--mask", "ring.vxl", "--seed", "1", "--out", "a.vxl"]);
    ok(d, &["phantom", "--mask", "ring.vxl", "--seed", "2", "--out", "b.vxl"]);
    assert_eq!(adawave(d, &["diff-vol", "a.vxl", "b.vxl"]).status.code(), Some(1));
}

#[test]
fn argument_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    let o = adawave(d, &["verify", "--mask", "ring.vxl", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(adawave(d, &["transmogrify"]).status.code(), Some(2));
    assert_eq!(adawave(d, &["verify", "--mask", "missing.vxl"]).status.code(), Some(2));
    assert_eq!(adawave(d, &["verify", "--mask", "ring.vxl", "--stage", "spline"]).status.code(), Some(2));
    assert_eq!(adawave(d, &["verify", "--mask", "ring.vxl", "--levels", "0"]).status.code(), Some(2));
    assert_eq!(adawave(d, &["--threads", "0", "verify", "--mask", "ring.vxl"]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    fs::write(d.join("run.cfg"), "# verify settings\nmask=ring.vxl\nlevels=2\nstage=haar\n").unwrap();
    let o = ok(d, &["verify", "--config", "run.cfg"]);
    assert!(summary(&o).contains("levels=2") && summary(&o).contains("stage=haar"));
    let o = ok(d, &["verify", "--config", "run.cfg", "--levels", "4"]);
    assert!(summary(&o).contains("levels=4"));
    fs::write(d.join("bad.cfg"), "levels\n").unwrap();
    assert_eq!(adawave(d, &["verify", "--config", "bad.cfg", "--mask", "ring.vxl"]).status.code(), Some(2));
}

#[test]
fn wspm_pipeline_finds_a_strong_activation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    ok(
        d,
        &[
            "simulate-fmri", "--mask", "ring.vxl", "--seed", "3", "--peak", "3", "--ramp-constant", "1", "--out", "d.vxl",
            "--design-out", "X.csv", "--contrast-out", "c.csv", "--truth-out", "truth.vxl",
        ],
    );
    let o = ok(
        d,
        &["wspm", "--data", "d.vxl", "--design", "X.csv", "--contrast", "c.csv", "--mask", "ring.vxl", "--levels", "2", "--alpha", "0.01", "--out", "map.vxl"],
    );
    let detected: usize = summary(&o)
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("detected="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(detected > 0);
    // Too large a significance level has no threshold.
    let o = adawave(
        d,
        &["wspm", "--data", "d.vxl", "--design", "X.csv", "--contrast", "c.csv", "--mask", "ring.vxl", "--alpha", "0.6", "--out", "m.vxl"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("m.vxl").exists());
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    for (threads, name) in [("1", "a.csv"), ("3", "b.csv")] {
        ok(d, &["--threads", threads, "experiment", "roc", "--rings", "2:6,8:11", "--grid", "24", "--trials", "2", "--levels", "1,2", "--out", name]);
    }
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    for name in ["x.vxl", "y.vxl"] {
        ok(d, &["phantom", "--mask", "ring.vxl", "--seed", "4", "--noise", "1", "--out", "n.vxl"]);
        ok(d, &["denoise", "--mask", "ring.vxl", "--data", "n.vxl", "--sigma", "1", "--realizations", "4", "--out", name]);
    }
    assert_eq!(fs::read(d.join("x.vxl")).unwrap(), fs::read(d.join("y.vxl")).unwrap());
}

#[test]
fn experiments_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["experiment", "sparsity", "--trials", "1", "--points", "10", "--out", "s.csv"]);
    let s = fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(s.lines().count(), 1 + 2 * 10);
    ok(d, &["experiment", "averaging", "--realizations", "3", "--out", "a.csv"]);
    let a = fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a.lines().count(), 1 + 2 * 3);
    ok(d, &["experiment", "invariance", "--side", "16", "--levels", "3", "--realizations", "4", "--out", "i.csv"]);
    let i = fs::read_to_string(d.join("i.csv")).unwrap();
    assert_eq!(i.lines().next(), Some("subspace,single,averaged"));
    assert_eq!(i.lines().count(), 1 + 4);
}

#[test]
fn denoise_trace_needs_a_reference() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ring(d);
    ok(d, &["phantom", "--mask", "ring.vxl", "--seed", "5", "--out", "clean.vxl"]);
    ok(d, &["phantom", "--mask", "ring.vxl", "--seed", "5", "--noise", "0.3", "--out", "noisy.vxl"]);
    let o = adawave(d, &["denoise", "--mask", "ring.vxl", "--data", "noisy.vxl", "--sigma", "0.3", "--trace", "t.csv", "--out", "o.vxl"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ok(
        d,
        &["denoise", "--mask", "ring.vxl", "--data", "noisy.vxl", "--clean", "clean.vxl", "--sigma", "0.3", "--realizations", "6", "--trace", "t.csv", "--out", "o.vxl"],
    );
    assert!(summary(&o).contains("output_snr_db="));
    assert_eq!(fs::read_to_string(d.join("t.csv")).unwrap().lines().count(), 7);
}
