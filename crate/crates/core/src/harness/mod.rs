//! Scenario files, reproducible runs and their records.
//!
//! A run directory holds a copy of the scenario, every persisted field and
//! report, and `record.json` listing each output with its SHA-256. With the
//! same scenario, seed and crate version, reruns are byte-identical.

mod checks;
mod expr;
mod plot;
mod run;
mod scenario;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use checks::{
    backend_convergence, fitted_slope, functional_calculus, semigroup, symbol_exactness, CaseRecord, CheckOutcome,
    ConvergenceRecord,
};
pub use expr::Expr;
pub use plot::{emit_plot_data, PLOT_DIR};
pub use run::{
    run_scenario, run_scenario_with, Assertion, OutputEntry, Relation, RunOptions, RunRecord, Timings, RECORD_FILE,
    SCENARIO_COPY,
};
pub use scenario::{
    parse_scenario, parse_scenario_str, AdmissibilityCase, BackendChoice, ChecksSpec, ExteriorCheck, ExteriorSpec,
    OperatorSpec, PoincareCheck, Scenario, Task, TaskSpec, TaylorSpec, TermSpec, UcpOperator, UcpSpec,
};

use crate::error::{Error, Result};
use crate::lattice::io::write_atomic;

pub const SUITE_FILE: &str = "suite.json";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Replaces every scenario's own seed.
    pub seed: Option<u64>,
    /// `KEY=VALUE` tolerance overrides applied to every scenario.
    pub overrides: Vec<String>,
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub file: String,
    pub scenario: Option<String>,
    /// Relative to the suite output root.
    pub run_dir: String,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Scenario files (`*.toml`) directly inside `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Parses a scenario and applies seed and tolerance overrides.
pub fn load_scenario(path: &Path, seed: Option<u64>, overrides: &[String]) -> Result<Scenario> {
    let mut s = parse_scenario(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    for o in overrides {
        s.apply_override(o)?;
    }
    Ok(s)
}

/// Runs every scenario in `dir`, each into `out_root/<file stem>`, and writes
/// `out_root/suite.json`. Scenarios that fail to parse count as failures.
pub fn run_suite(dir: &Path, out_root: &Path, opts: &SuiteOptions) -> Result<SuiteReport> {
    let files = scenario_files(dir)?;
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let mut entries = Vec::with_capacity(files.len());
    for path in files {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let entry = match load_scenario(&path, opts.seed, &opts.overrides) {
            Ok(s) => {
                let record = run_scenario_with(&s, &out_root.join(&stem), &opts.run)?;
                SuiteEntry {
                    file,
                    scenario: Some(s.name),
                    run_dir: stem,
                    passed: record.passed,
                    error: record.error,
                }
            }
            Err(e) => SuiteEntry {
                file,
                scenario: None,
                run_dir: stem,
                passed: false,
                error: Some(e.to_string()),
            },
        };
        entries.push(entry);
    }
    let passed = entries.iter().filter(|e| e.passed).count();
    let report = SuiteReport {
        failed: entries.len() - passed,
        passed,
        entries,
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    write_atomic(&out_root.join(SUITE_FILE), &bytes)?;
    Ok(report)
}
