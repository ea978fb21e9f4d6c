//! Scenario execution and run records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checks;
use super::scenario::{Scenario, Task, TaskSpec, UcpSpec};
use crate::error::{Error, Result};
use crate::inverse::{linearize, recover_alpha, recover_q, recover_taylor, RecoveryReport};
use crate::lattice::io::{encode_field, region_to_csv, write_atomic};
use crate::lattice::{define_window, restrict_field, Grid, GridField, Region};
use crate::polyop::{apply_poly, check_admissible_with, PolyFractionalOperator};
use crate::solver::{
    dtn_apply, dtn_pairing, solve_linear, solve_semilinear, LinearProblem, NewtonOptions, SemilinearProblem,
    Solution, SolveOptions, TaylorSource,
};
use crate::ucp::{
    exterior_extension_gap, interior_gap, isotropic_symbol, poincare_probe, symbol_positivity,
    ExteriorEllipticOperator, UcpProbeReport,
};

pub const RECORD_FILE: &str = "record.json";
pub const SCENARIO_COPY: &str = "scenario.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "==")]
    Equal,
    #[serde(rename = "matches")]
    Matches,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Equal => "==",
            Relation::Matches => "matches",
        }
    }

    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Above => value > threshold,
            Relation::Equal => value == threshold,
            Relation::Matches => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub relation: Relation,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// Everything a run leaves behind, in `record.json` of its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub task: Task,
    pub scenario_digest: String,
    pub version: String,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    /// Only filled on request: wall-clock times break byte-identical reruns.
    pub timings: Option<Timings>,
    pub outputs: Vec<OutputEntry>,
    pub assertions: Vec<Assertion>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub passed: bool,
}

impl RunRecord {
    pub fn load(run_dir: &Path) -> Result<RunRecord> {
        let path = run_dir.join(RECORD_FILE);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingOutput(format!("{} not found", path.display())),
            _ => Error::io(&path, e),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn output(&self, path: &str) -> Option<&OutputEntry> {
        self.outputs.iter().find(|o| o.path == path)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn failed_assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_timings: bool,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Run<'a> {
    s: &'a Scenario,
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
    assertions: Vec<Assertion>,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomic(&path, bytes)?;
        self.outputs.retain(|o| o.path != rel);
        self.outputs.push(OutputEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn field(&mut self, rel: &str, u: &GridField) -> Result<()> {
        self.write(rel, &encode_field(u)?)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    fn solution(&mut self, stem: &str, sol: &Solution) -> Result<()> {
        self.field(&format!("{stem}.pfl"), &sol.u)?;
        self.json(&format!("{stem}.json"), &sol.sidecar())?;
        self.metric(&format!("{stem}.residual_interior"), sol.residual_interior);
        self.metric(&format!("{stem}.iterations"), sol.iterations as f64);
        Ok(())
    }

    fn recovery(&mut self, stem: &str, rep: &RecoveryReport) -> Result<()> {
        self.field(&format!("{stem}.pfl"), &rep.estimate)?;
        self.json(&format!("{stem}.json"), &rep.sidecar())?;
        self.write(&format!("{stem}_E.csv"), region_to_csv(&rep.effective.region).as_bytes())?;
        self.metric(&format!("{stem}.coverage"), rep.coverage);
        if let Some(e) = rep.rel_error_on_e {
            self.metric(&format!("{stem}.rel_error_on_E"), e);
        }
        if let Some(e) = rep.max_abs_error_on_e {
            self.metric(&format!("{stem}.max_abs_error_on_E"), e);
        }
        Ok(())
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    fn check(&mut self, name: &str, value: f64, relation: Relation, threshold: f64) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            relation,
            value: Some(value),
            threshold: Some(threshold),
            detail: None,
            passed: value.is_finite() && relation.holds(value, threshold),
        });
    }

    fn check_match(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            relation: Relation::Matches,
            value: None,
            threshold: None,
            detail: Some(detail),
            passed,
        });
    }

    fn tol(&self, key: &str) -> f64 {
        self.s
            .tolerance(key)
            .unwrap_or_else(|| panic!("tolerance '{key}' has a task default"))
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol("solver"),
            max_iter: None,
            method: self.s.method,
        }
    }
}

/// Removes the files a previous run listed in its record.
fn clear_previous(dir: &Path) -> Result<()> {
    let Ok(old) = RunRecord::load(dir) else {
        return Ok(());
    };
    for o in &old.outputs {
        let path = dir.join(&o.path);
        if path.is_file() {
            std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    let record = dir.join(RECORD_FILE);
    std::fs::remove_file(&record).map_err(|e| Error::io(&record, e))
}

pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunRecord> {
    run_scenario_with(s, out_dir, &RunOptions::default())
}

/// Executes the scenario's task and writes all outputs plus `record.json`
/// into `out_dir`. Failures of the numerical task itself are captured in the
/// record (with `passed = false`); only I/O on the run directory is an `Err`.
pub fn run_scenario_with(s: &Scenario, out_dir: &Path, opts: &RunOptions) -> Result<RunRecord> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    clear_previous(out_dir)?;
    let start = Instant::now();
    let mut run = Run {
        s,
        dir: out_dir.to_path_buf(),
        outputs: Vec::new(),
        assertions: Vec::new(),
        metrics: BTreeMap::new(),
        notes: Vec::new(),
    };
    run.write(SCENARIO_COPY, s.source_text().as_bytes())?;
    let outcome = match s.task {
        Task::Forward => forward(&mut run),
        Task::Dtn => dtn(&mut run),
        Task::RecoverQ => recover_potential(&mut run),
        Task::RecoverAlpha => recover_coefficient(&mut run),
        Task::RecoverTaylor => recover_source(&mut run),
        Task::UcpSuite => ucp_suite(&mut run),
        Task::Admissibility => admissibility(&mut run),
        Task::FracopChecks => fracop_checks(&mut run),
    };
    let error = match outcome {
        Ok(()) => None,
        Err(e @ Error::Io { .. }) => return Err(e),
        Err(e) => Some(e.to_string()),
    };
    let passed = error.is_none() && run.assertions.iter().all(|a| a.passed);
    let record = RunRecord {
        scenario: s.name.clone(),
        task: s.task,
        scenario_digest: s.digest(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: s.seed,
        tolerances: s.tolerances.clone(),
        timings: opts.record_timings.then(|| Timings {
            total_seconds: start.elapsed().as_secs_f64(),
        }),
        outputs: run.outputs,
        assertions: run.assertions,
        metrics: run.metrics,
        notes: run.notes,
        error,
        passed,
    };
    let mut bytes = serde_json::to_vec_pretty(&record)?;
    bytes.push(b'\n');
    write_atomic(&out_dir.join(RECORD_FILE), &bytes)?;
    Ok(record)
}

// ---------------------------------------------------------------------------
// shared set-up

struct Setting {
    grid: Grid,
    omega: Region,
    window: Option<Region>,
    p: PolyFractionalOperator,
}

fn setting(run: &mut Run) -> Result<Setting> {
    let s = run.s;
    let grid = s.grid()?;
    let omega = s.omega_region(grid)?;
    let window = s.window_region(grid, &omega)?;
    let p = s
        .operator
        .as_ref()
        .ok_or_else(|| Error::ScenarioInvalid("missing operator".into()))?
        .build(grid)?;
    run.write("omega.csv", region_to_csv(&omega).as_bytes())?;
    if let Some(w) = &window {
        run.write("window.csv", region_to_csv(w).as_bytes())?;
    }
    Ok(Setting { grid, omega, window, p })
}

fn potential(s: &Scenario, grid: Grid) -> Result<GridField> {
    match &s.potential {
        Some(q) => q.sample(grid),
        None => Ok(GridField::zeros(grid)),
    }
}

fn exterior_data(s: &Scenario, set: &Setting) -> Result<GridField> {
    let spec = s
        .exterior
        .as_ref()
        .ok_or_else(|| Error::ScenarioInvalid("missing exterior data".into()))?;
    let mut f = spec.data.sample(set.grid)?;
    if spec.window_supported {
        let w = set
            .window
            .as_ref()
            .ok_or_else(|| Error::ScenarioInvalid("window-supported data without a window".into()))?;
        for (v, &inside) in f.values_mut().iter_mut().zip(w.mask()) {
            if !inside {
                *v = 0.0;
            }
        }
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// tasks

fn forward(run: &mut Run) -> Result<()> {
    let set = setting(run)?;
    let q = potential(run.s, set.grid)?;
    let TaskSpec::Forward { manufactured, forcing } = &run.s.spec else {
        unreachable!("task and spec agree")
    };
    let opts = run.solve_options();
    if let Some(m) = manufactured {
        let exact = m.sample(set.grid)?;
        let rhs = apply_poly(&set.p, &exact)?.add(&exact.mul_pointwise(&q)?)?;
        let prob = LinearProblem::new(set.p.clone(), q, exact.clone(), set.omega.clone())?
            .with_source(restrict_field(&rhs, &set.omega)?)?;
        let sol = solve_linear(&prob, &opts)?;
        run.solution("u", &sol)?;
        run.field("exact.pfl", &exact)?;
        let err = sol.u.relative_l2_error(&exact)?;
        run.check("rel_error", err, Relation::AtMost, run.tol("rel_error"));
        return Ok(());
    }
    let f = exterior_data(run.s, &set)?;
    let mut prob = LinearProblem::new(set.p.clone(), q, f, set.omega.clone())?;
    if let Some(src) = forcing {
        prob = prob.with_source(restrict_field(&src.sample(set.grid)?, &set.omega)?)?;
    }
    let sol = solve_linear(&prob, &opts)?;
    if let Some(b) = sol.bound_report {
        run.metric("bound.ratio", b.ratio);
    }
    run.solution("u", &sol)
}

fn dtn(run: &mut Run) -> Result<()> {
    let set = setting(run)?;
    let TaskSpec::Dtn { probe, test_function } = &run.s.spec else {
        unreachable!("task and spec agree")
    };
    let probe = probe.build(set.grid)?;
    let q = potential(run.s, set.grid)?;
    let f = exterior_data(run.s, &set)?;
    let opts = run.solve_options();
    let sol = solve_linear(&LinearProblem::new(set.p.clone(), q.clone(), f.clone(), set.omega.clone())?, &opts)?;
    run.solution("u", &sol)?;
    let measured = restrict_field(&apply_poly(&probe, &sol.u)?, &set.omega)?;
    run.field("dtn.pfl", &measured)?;
    run.metric("dtn.l2_norm", measured.l2_norm());

    let doubled = dtn_apply(&set.p, &q, &probe, &f.scale(2.0), &set.omega, &opts)?;
    let lin = doubled.sub(&measured.scale(2.0))?.l2_norm() / (2.0 * measured.l2_norm()).max(f64::MIN_POSITIVE);
    run.check("linearity", lin, Relation::AtMost, run.tol("linearity"));

    if let Some(g) = test_function {
        let g = restrict_field(&g.sample(set.grid)?, &set.omega)?;
        let pairing = dtn_pairing(&set.p, &q, &f, &g, &set.omega, &opts)?;
        let scale = apply_poly(&set.p, &sol.u)?.l2_norm() * g.l2_norm();
        run.metric("pairing.value", pairing);
        // the equation holds in Ω, so the pairing with Ω-supported g vanishes
        run.check("pairing", pairing.abs() / scale.max(f64::MIN_POSITIVE), Relation::AtMost, run.tol("pairing"));
    }
    Ok(())
}

fn recovery_checks(run: &mut Run, rep: &RecoveryReport) {
    run.check(
        "rel_error_on_E",
        rep.rel_error_on_e.unwrap_or(f64::NAN),
        Relation::AtMost,
        run.tol("rel_error"),
    );
    run.check("coverage", rep.coverage, Relation::AtLeast, run.tol("coverage"));
}

fn recover_potential(run: &mut Run) -> Result<()> {
    let set = setting(run)?;
    let q = potential(run.s, set.grid)?;
    let f = exterior_data(run.s, &set)?;
    let sol = solve_linear(
        &LinearProblem::new(set.p.clone(), q.clone(), f, set.omega.clone())?,
        &run.solve_options(),
    )?;
    run.solution("u", &sol)?;
    let mut rep = recover_q(&set.p, &sol.u, &set.omega, run.tol("tau"))?;
    rep.compare(&q)?;
    run.field("q_true.pfl", &q)?;
    run.recovery("q_hat", &rep)?;
    recovery_checks(run, &rep);
    Ok(())
}

fn recover_coefficient(run: &mut Run) -> Result<()> {
    let set = setting(run)?;
    let TaskSpec::RecoverAlpha { order } = run.s.spec else {
        unreachable!("task and spec agree")
    };
    let index = set
        .p
        .terms()
        .iter()
        .position(|t| t.order() == order)
        .ok_or_else(|| Error::ScenarioInvalid(format!("no term of order {order}")))?;
    let term = &set.p.terms()[index];
    let truth = term.coefficient().clone();
    let backend = term.backend().clone();
    let rest = set.p.without_term(index)?;
    let q = potential(run.s, set.grid)?;
    let f = exterior_data(run.s, &set)?;
    let sol = solve_linear(&LinearProblem::new(set.p.clone(), q.clone(), f, set.omega.clone())?, &run.solve_options())?;
    run.solution("u", &sol)?;
    let mut rep = recover_alpha(&rest, &q, &sol.u, &backend, &set.omega, run.tol("tau"))?;
    rep.compare(&truth)?;
    run.field("alpha_true.pfl", &truth)?;
    run.recovery("alpha_hat", &rep)?;
    recovery_checks(run, &rep);
    Ok(())
}

#[derive(Serialize)]
struct Linearization {
    eps: Vec<f64>,
    errors: Vec<f64>,
    pairwise_slopes: Vec<f64>,
    fitted_slope: f64,
}

fn recover_source(run: &mut Run) -> Result<()> {
    let set = setting(run)?;
    let TaskSpec::RecoverTaylor(spec) = &run.s.spec else {
        unreachable!("task and spec agree")
    };
    let truth = run
        .s
        .source
        .as_ref()
        .ok_or_else(|| Error::ScenarioInvalid("missing source".into()))?
        .iter()
        .map(|e| e.sample(set.grid))
        .collect::<Result<Vec<_>>>()?;
    let source = TaylorSource::new(truth.clone())?;
    let newton = NewtonOptions {
        tol: run.tol("newton"),
        ..NewtonOptions::default()
    };
    let f1 = exterior_data(run.s, &set)?;
    let mut solves = 0usize;
    let mut forward = |f: &GridField| -> Result<GridField> {
        solves += 1;
        let prob = SemilinearProblem::new(set.p.clone(), source.clone(), f.clone(), set.omega.clone(), newton)?;
        Ok(solve_semilinear(&prob)?.u)
    };
    let reports = recover_taylor(&set.p, &f1, spec.order, &set.omega, &spec.eps, run.tol("tau"), &mut forward)?;
    for (l, rep) in reports.into_iter().enumerate() {
        let mut rep = rep;
        let truth_l = truth.get(l).cloned().unwrap_or_else(|| GridField::zeros(set.grid));
        rep.compare(&truth_l)?;
        run.field(&format!("taylor_true_l{l}.pfl"), &truth_l)?;
        run.recovery(&format!("taylor_l{l}"), &rep)?;
        if let Some(t) = run.s.tolerance(&format!("abs_error_l{l}")) {
            let v = rep.max_abs_error_on_e.unwrap_or(f64::NAN);
            run.check(&format!("abs_error_l{l}"), v, Relation::AtMost, t);
        }
        if let Some(t) = run.s.tolerance(&format!("rel_error_l{l}")) {
            let v = rep.rel_error_on_e.unwrap_or(f64::NAN);
            run.check(&format!("rel_error_l{l}"), v, Relation::AtMost, t);
        }
    }

    if !spec.slope_eps.is_empty() {
        // first derivative of the solution map: P v + F^(1) v = 0 in Ω, v = f1 outside
        let q1 = truth.get(1).cloned().unwrap_or_else(|| GridField::zeros(set.grid));
        let prob = LinearProblem::new(set.p.clone(), q1, f1.clone(), set.omega.clone())?;
        let exact = solve_linear(&prob, &run.solve_options())?.u;
        let mut eps = spec.slope_eps.clone();
        eps.sort_by(|a, b| b.total_cmp(a));
        let errors = eps
            .iter()
            .map(|&e| {
                let pair = vec![(e, forward(&f1.scale(e))?), (-e, forward(&f1.scale(-e))?)];
                Ok(linearize(&pair, 1)?.sub(&exact)?.l2_norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        let logs: Vec<(f64, f64)> = eps.iter().zip(&errors).map(|(e, r)| (e.ln(), r.ln())).collect();
        let pairwise: Vec<f64> = logs.windows(2).map(|w| (w[0].1 - w[1].1) / (w[0].0 - w[1].0)).collect();
        let lin = Linearization {
            fitted_slope: checks::fitted_slope(&logs),
            eps,
            errors,
            pairwise_slopes: pairwise.clone(),
        };
        run.json("linearization.json", &lin)?;
        run.metric("linearization.fitted_slope", lin.fitted_slope);
        let worst = pairwise.iter().cloned().fold(f64::INFINITY, f64::min);
        run.check("slope", worst, Relation::AtLeast, run.tol("slope"));
    }
    run.metric("forward_solves", solves as f64);
    Ok(())
}

#[derive(Serialize)]
struct GapRow {
    operator: String,
    points: usize,
    admissibility: crate::polyop::AdmissibilityStatus,
    report: UcpProbeReport,
}

#[derive(Serialize)]
struct SymbolRow {
    operator: String,
    report: UcpProbeReport,
    frequency_scan_minimum: f64,
}

/// Minimum of the symbol over every nonzero lattice frequency, one slot at a time.
fn scan_symbol_minimum(p: &PolyFractionalOperator) -> Option<f64> {
    let terms: Vec<(f64, f64, f64)> = p
        .terms()
        .iter()
        .map(|t| Some((t.constant_value()?, t.backend().gamma()?.as_scalar()?, t.order())))
        .collect::<Option<_>>()?;
    let grid = p.grid();
    let mut best = f64::INFINITY;
    for idx in 0..grid.len() {
        let [a, b] = grid.frequency_vector(idx);
        let k2 = a * a + b * b;
        if k2 > 0.0 {
            best = best.min(isotropic_symbol(&terms, k2));
        }
    }
    Some(best)
}

fn ucp_suite(run: &mut Run) -> Result<()> {
    let s = run.s;
    let TaskSpec::UcpSuite(spec) = &s.spec else {
        unreachable!("task and spec agree")
    };
    let UcpSpec {
        sizes,
        operators,
        exterior,
        poincare,
    } = spec;
    let grid = s.grid()?;
    let omega = s.omega_region(grid)?;
    run.write("omega.csv", region_to_csv(&omega).as_bytes())?;

    let mut gaps = Vec::new();
    let mut symbols = Vec::new();
    for op in operators {
        for &n in sizes {
            let g = s.grid_with_points(n)?;
            let om = s.omega_region(g)?;
            let probe = op.operator.build(g)?;
            let verdict = check_admissible_with(&probe, op.gap_target);
            let rep = interior_gap(&probe, &om)?;
            if verdict.is_admissible() {
                run.check(
                    &format!("interior_gap/{}/n{n}", op.name),
                    rep.min_singular_value,
                    Relation::Above,
                    rep.floor,
                );
            } else {
                run.notes.push(format!(
                    "{} at n = {n}: admissibility not established, gap {:e} logged only",
                    op.name, rep.min_singular_value
                ));
            }
            gaps.push(GapRow {
                operator: op.name.clone(),
                points: n,
                admissibility: verdict.status,
                report: rep,
            });
        }
        let probe = op.operator.build(grid)?;
        match symbol_positivity(&probe) {
            Ok(rep) => {
                let scan = scan_symbol_minimum(&probe).ok_or_else(|| {
                    Error::InvalidOperator(format!("{}: symbol scan needs constant isotropic terms", op.name))
                })?;
                run.check(
                    &format!("symbol_scan/{}", op.name),
                    rep.min_singular_value,
                    Relation::Equal,
                    scan,
                );
                run.check(
                    &format!("symbol_positivity/{}", op.name),
                    rep.min_singular_value,
                    Relation::Above,
                    rep.floor,
                );
                symbols.push(SymbolRow {
                    operator: op.name.clone(),
                    report: rep,
                    frequency_scan_minimum: scan,
                });
            }
            Err(Error::InvalidOperator(m)) => {
                run.notes.push(format!("{}: symbol positivity skipped ({m})", op.name));
            }
            Err(e) => return Err(e),
        }
    }
    if !gaps.is_empty() {
        run.json("ucp/interior_gaps.json", &gaps)?;
    }
    if !symbols.is_empty() {
        run.json("ucp/symbols.json", &symbols)?;
    }

    if let Some(e) = exterior {
        let op = ExteriorEllipticOperator::new(e.coefficient.sample(grid)?, &omega)?;
        let w = define_window(grid, &e.window, &omega)?;
        let outer = exterior_extension_gap(&op, &w, &omega)?;
        run.check("exterior_gap", outer.min_singular_value, Relation::Above, outer.floor);
        let mut reports = vec![outer.clone()];
        if let Some(inner_shape) = &e.inner_window {
            let inner = exterior_extension_gap(&op, &define_window(grid, inner_shape, &omega)?, &omega)?;
            run.check(
                "exterior_gap_nesting",
                inner.min_singular_value,
                Relation::AtMost,
                outer.min_singular_value,
            );
            reports.push(inner);
        }
        run.write("window.csv", region_to_csv(&w).as_bytes())?;
        run.json("ucp/exterior.json", &reports)?;
    }

    if let Some(pc) = poincare {
        let values = pc
            .samples
            .iter()
            .map(|&n| poincare_probe(pc.sigma, &omega, n, s.seed))
            .collect::<Result<Vec<_>>>()?;
        #[derive(Serialize)]
        struct Poincare<'a> {
            sigma: f64,
            seed: u64,
            samples: &'a [usize],
            estimates: &'a [f64],
        }
        run.json(
            "ucp/poincare.json",
            &Poincare {
                sigma: pc.sigma,
                seed: s.seed,
                samples: &pc.samples,
                estimates: &values,
            },
        )?;
        if let (Some(first), Some(last)) = (values.first(), values.last()) {
            if values.len() > 1 {
                run.check(
                    "poincare_stability",
                    (last - first).abs() / last,
                    Relation::AtMost,
                    run.tol("poincare_stability"),
                );
            }
            run.metric("poincare.estimate", *last);
        }
    }
    Ok(())
}

fn status_name<T: Serialize>(status: &T) -> String {
    match serde_json::to_value(status) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn admissibility(run: &mut Run) -> Result<()> {
    let TaskSpec::Admissibility(cases) = &run.s.spec else {
        unreachable!("task and spec agree")
    };
    let grid = run.s.grid()?;
    for case in cases {
        let p = case.operator.build(grid)?;
        let verdict = check_admissible_with(&p, case.gap_target);
        run.json(&format!("admissibility/{}.json", case.name), &verdict)?;
        let (got, want) = (status_name(&verdict.status), status_name(&case.expect));
        run.check_match(
            &format!("status/{}", case.name),
            verdict.status == case.expect,
            format!("expected {want}, got {got}"),
        );
        if let Some(orders) = &case.expect_witness_orders {
            let found: Option<Vec<f64>> = verdict.witness.as_ref().map(|w| w.iter().map(|t| t.order).collect());
            let ok = found.as_ref().is_some_and(|f| {
                f.len() == orders.len() && f.iter().zip(orders).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            run.check_match(
                &format!("witness/{}", case.name),
                ok,
                format!("expected witness orders {orders:?}, got {found:?}"),
            );
        }
    }
    Ok(())
}

fn fracop_checks(run: &mut Run) -> Result<()> {
    let s = run.s;
    let TaskSpec::FracopChecks(c) = &s.spec else {
        unreachable!("task and spec agree")
    };
    let grid = s.grid()?;
    // one independent stream per check
    let seed = |k: u64| s.seed.wrapping_mul(4).wrapping_add(k);
    if c.symbol_cases > 0 {
        let g2 = Grid::new(2, s.extent, c.points_2d)?;
        let out = checks::symbol_exactness(grid, g2, c.symbol_cases, seed(0))?;
        run.json("checks/symbol.json", &out)?;
        run.check("symbol", out.worst, Relation::AtMost, run.tol("symbol"));
    }
    if c.semigroup_cases > 0 {
        let out = checks::semigroup(grid, c.semigroup_cases, seed(1))?;
        run.json("checks/semigroup.json", &out)?;
        for backend in ["fourier", "matrix_function"] {
            let worst = out
                .cases
                .iter()
                .filter(|r| r.backend == backend)
                .map(|r| r.rel_error)
                .fold(0.0, f64::max);
            run.check(&format!("semigroup/{backend}"), worst, Relation::AtMost, run.tol("semigroup"));
        }
    }
    if c.functional_calculus_fields > 0 {
        let out = checks::functional_calculus(grid, c.functional_calculus_fields, seed(2))?;
        run.json("checks/functional_calculus.json", &out)?;
        run.check(
            "functional_calculus",
            out.worst,
            Relation::AtMost,
            run.tol("functional_calculus"),
        );
    }
    let mut records = Vec::new();
    for &sigma in &c.convergence_orders {
        let rec = checks::backend_convergence(s.extent, &c.convergence_sizes, sigma)?;
        let worst = rec.pairwise_orders.iter().cloned().fold(f64::INFINITY, f64::min);
        run.check(
            &format!("convergence_order/sigma={sigma}"),
            worst,
            Relation::AtLeast,
            run.tol("convergence_order"),
        );
        records.push(rec);
    }
    if !records.is_empty() {
        run.json("checks/convergence.json", &records)?;
    }
    Ok(())
}
