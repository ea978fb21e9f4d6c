use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use polyfrac::error::Error;
use polyfrac::harness::{
    emit_plot_data, load_scenario, parse_scenario, parse_scenario_str, run_scenario, run_suite, scenario_files,
    RunRecord, SuiteOptions, PLOT_DIR, RECORD_FILE, SUITE_FILE,
};

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn every_shipped_scenario_parses() {
    let files = scenario_files(&shipped("")).unwrap();
    assert!(files.len() >= 14, "{files:?}");
    for f in files {
        let s = parse_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(Some(s.name.as_str()), f.file_stem().and_then(|s| s.to_str()));
    }
}

#[test]
fn record_lists_every_output_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let s = parse_scenario(&shipped("recover_q.toml")).unwrap();
    let record = run_scenario(&s, dir.path()).unwrap();
    assert!(record.passed, "{:?}", record.failed_assertions().collect::<Vec<_>>());
    assert!(record.error.is_none());
    assert!(record.timings.is_none());
    for name in ["scenario.toml", "u.pfl", "q_true.pfl", "q_hat.pfl", "q_hat_E.csv"] {
        assert!(record.output(name).is_some(), "{name}");
    }
    for o in &record.outputs {
        let bytes = fs::read(dir.path().join(&o.path)).unwrap();
        assert_eq!(bytes.len() as u64, o.bytes, "{}", o.path);
        let hash = sha2_hex(&bytes);
        assert_eq!(hash, o.sha256, "{}", o.path);
    }
    assert_eq!(RunRecord::load(dir.path()).unwrap(), record);
    assert!(record.assertion("rel_error_on_E").unwrap().passed);
}

fn sha2_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = parse_scenario(&shipped("recover_taylor.toml")).unwrap();
    run_scenario(&s, a.path()).unwrap();
    run_scenario(&s, b.path()).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));
}

#[test]
fn seed_changes_randomized_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let path = shipped("semigroup.toml");
    let s1 = load_scenario(&path, Some(1), &[]).unwrap();
    let s2 = load_scenario(&path, Some(2), &[]).unwrap();
    assert_ne!(s1.digest(), s2.digest());
    let r1 = run_scenario(&s1, a.path()).unwrap();
    let r2 = run_scenario(&s2, b.path()).unwrap();
    assert!(r1.passed && r2.passed);
    assert_eq!(r1.seed, 1);
    assert_ne!(
        r1.output("checks/semigroup.json").unwrap().sha256,
        r2.output("checks/semigroup.json").unwrap().sha256
    );
}

#[test]
fn tolerance_overrides_are_applied_and_checked() {
    let path = shipped("forward_manufactured_1d.toml");
    let s = load_scenario(&path, None, &["rel_error=1e-20".into()]).unwrap();
    assert_eq!(s.tolerance("rel_error"), Some(1e-20));
    let dir = tempfile::tempdir().unwrap();
    let record = run_scenario(&s, dir.path()).unwrap();
    assert!(!record.passed);
    assert_eq!(record.failed_assertions().next().unwrap().name, "rel_error");

    for bad in ["nonsense=1", "rel_error", "rel_error=abc", "rel_error=-1"] {
        assert!(load_scenario(&path, None, &[bad.into()]).is_err(), "{bad}");
    }
}

#[test]
fn rerun_into_the_same_directory_drops_stale_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&parse_scenario(&shipped("recover_q.toml")).unwrap(), dir.path()).unwrap();
    assert!(dir.path().join("q_hat.pfl").exists());
    let keep = dir.path().join("notes.txt");
    fs::write(&keep, "mine").unwrap();
    run_scenario(&parse_scenario(&shipped("forward_smoke.toml")).unwrap(), dir.path()).unwrap();
    assert!(!dir.path().join("q_hat.pfl").exists());
    assert!(dir.path().join("u.pfl").exists());
    // files the previous record did not list are left alone
    assert!(keep.exists());
}

#[test]
fn task_failures_are_recorded_not_raised() {
    let text = fs::read_to_string(shipped("recover_q.toml")).unwrap().replace("gaussian(2, 0.5)", "0");
    let s = parse_scenario_str(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let record = run_scenario(&s, dir.path()).unwrap();
    assert!(!record.passed);
    assert!(record.error.as_deref().unwrap().contains("effective set"));

    let err = emit_plot_data(dir.path()).unwrap_err();
    assert!(matches!(err, Error::MissingOutput(_)), "{err:?}");
    assert!(!dir.path().join(PLOT_DIR).exists());
}

#[test]
fn plot_data_series() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&parse_scenario(&shipped("forward_manufactured_2d.toml")).unwrap(), dir.path()).unwrap();
    let files = emit_plot_data(dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,u,exact"));
    assert_eq!(lines.count(), 32 * 32);

    let dir = tempfile::tempdir().unwrap();
    run_scenario(&parse_scenario(&shipped("recover_taylor.toml")).unwrap(), dir.path()).unwrap();
    let names: Vec<String> = emit_plot_data(dir.path())
        .unwrap()
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"linearization.csv".to_string()), "{names:?}");
    let lin = fs::read_to_string(dir.path().join(PLOT_DIR).join("linearization.csv")).unwrap();
    assert!(lin.starts_with("eps,error\n"));
    let slope: f64 = lin.lines().last().unwrap().strip_prefix("slope,").unwrap().parse().unwrap();
    assert!(slope > 1.9);

    let dir = tempfile::tempdir().unwrap();
    run_scenario(&parse_scenario(&shipped("admissibility.toml")).unwrap(), dir.path()).unwrap();
    emit_plot_data(dir.path()).unwrap();
    let verdicts = fs::read_to_string(dir.path().join(PLOT_DIR).join("verdicts.csv")).unwrap();
    assert!(verdicts.contains("two_term_gap,admissible_example1_gap"));
}

#[test]
fn plot_data_refuses_tampered_or_missing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&parse_scenario(&shipped("forward_smoke.toml")).unwrap(), dir.path()).unwrap();
    let u = dir.path().join("u.pfl");
    let mut bytes = fs::read(&u).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&u, &bytes).unwrap();
    assert!(matches!(emit_plot_data(dir.path()).unwrap_err(), Error::Format(_)));
    assert!(!dir.path().join(PLOT_DIR).exists());

    fs::remove_file(&u).unwrap();
    assert!(matches!(emit_plot_data(dir.path()).unwrap_err(), Error::MissingOutput(_)));

    let empty = tempfile::tempdir().unwrap();
    assert!(emit_plot_data(empty.path()).is_err());
    assert!(!empty.path().join(PLOT_DIR).exists());
}

#[test]
fn suite_counts_parse_failures_and_writes_a_report() {
    let src = tempfile::tempdir().unwrap();
    fs::copy(shipped("forward_smoke.toml"), src.path().join("a_smoke.toml")).unwrap();
    fs::copy(shipped("admissibility.toml"), src.path().join("b_admissibility.toml")).unwrap();
    fs::write(src.path().join("c_broken.toml"), "name = \"broken\"\ntask = \"forward\"\n").unwrap();
    fs::write(src.path().join("ignored.txt"), "not a scenario").unwrap();

    let out = tempfile::tempdir().unwrap();
    let report = run_suite(src.path(), out.path(), &SuiteOptions::default()).unwrap();
    assert_eq!((report.passed, report.failed), (2, 1));
    assert!(!report.all_passed());
    let broken = &report.entries[2];
    assert_eq!(broken.file, "c_broken.toml");
    assert!(broken.scenario.is_none() && broken.error.is_some());
    assert!(out.path().join("a_smoke").join(RECORD_FILE).exists());
    assert!(!out.path().join("c_broken").exists());

    let saved: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join(SUITE_FILE)).unwrap()).unwrap();
    assert_eq!(saved["failed"], 1);
}
