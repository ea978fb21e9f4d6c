use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn polyfrac(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polyfrac"));
    cmd.args(args).env_remove("POLYFRAC_OUT");
    if let Some(dir) = out_env {
        cmd.env("POLYFRAC_OUT", dir);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_reports_positions() {
    let ok = polyfrac(&["validate", scenario("recover_q.toml").to_str().unwrap()], None);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).starts_with("recover_q: ok"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario("forward_smoke.toml")).unwrap().replace("points = 64", "points = 64\nspacing = 2");
    fs::write(&bad, text).unwrap();
    let out = polyfrac(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 9"), "{}", stderr(&out));
}

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("fwd");
    let out = polyfrac(
        &["run", scenario("forward_manufactured_1d.toml").to_str().unwrap(), "--out", run_dir.to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("pass  rel_error"));
    assert!(run_dir.join("record.json").exists());

    let plot = polyfrac(&["plot-data", run_dir.to_str().unwrap()], None);
    assert!(plot.status.success(), "{}", stderr(&plot));
    assert!(stdout(&plot).trim_end().ends_with("solution.csv"));
}

#[test]
fn out_root_from_environment() {
    let root = tempfile::tempdir().unwrap();
    let out = polyfrac(&["run", scenario("admissibility.toml").to_str().unwrap()], Some(root.path()));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(root.path().join("admissibility").join("record.json").exists());
}

#[test]
fn exit_status_follows_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("forward_manufactured_1d.toml");
    let out = polyfrac(
        &["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--tol-override", "rel_error=1e-20"],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL  rel_error"));

    let out = polyfrac(
        &["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--tol-override", "bogus=1"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn seed_and_timings_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("semigroup.toml");
    let out = polyfrac(
        &["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "99", "--timings"],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let record: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("record.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 99);
    assert!(record["timings"]["total_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn suite_over_a_directory() {
    let src = tempfile::tempdir().unwrap();
    for name in ["forward_smoke.toml", "admissibility.toml"] {
        fs::copy(scenario(name), src.path().join(name)).unwrap();
    }
    let out_dir = tempfile::tempdir().unwrap();
    let out = polyfrac(&["suite", src.path().to_str().unwrap(), "--out", out_dir.path().to_str().unwrap()], None);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("2 passed, 0 failed"));
    assert!(out_dir.path().join("suite.json").exists());

    fs::write(src.path().join("zz_broken.toml"), "name = 1").unwrap();
    let out = polyfrac(&["suite", src.path().to_str().unwrap(), "--out", out_dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL  zz_broken.toml"));
}
