//! Scenario files: TOML in, validated [`Scenario`] out.
//!
//! The schema is documented in `scenarios/README.md`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::fracop::{
    assemble_elliptic, AnisotropyField, AnisotropyMatrix, Boundary, FractionalBackend, SelfAdjointOperator,
    DEFAULT_DOF_CAP,
};
use crate::lattice::{define_region, define_window, Grid, Region, Shape};
use crate::polyop::{GapTarget, OperatorRole, PolyFractionalOperator, PolyTerm};
use crate::solver::SolveMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Forward,
    Dtn,
    RecoverQ,
    RecoverAlpha,
    RecoverTaylor,
    UcpSuite,
    Admissibility,
    FracopChecks,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Forward => "forward",
            Task::Dtn => "dtn",
            Task::RecoverQ => "recover_q",
            Task::RecoverAlpha => "recover_alpha",
            Task::RecoverTaylor => "recover_taylor",
            Task::UcpSuite => "ucp_suite",
            Task::Admissibility => "admissibility",
            Task::FracopChecks => "fracop_checks",
        }
    }

    fn default_tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Task::Forward => &[("solver", 1e-10), ("rel_error", 1e-8)],
            Task::Dtn => &[("solver", 1e-10), ("linearity", 1e-10), ("pairing", 1e-8)],
            Task::RecoverQ | Task::RecoverAlpha => &[
                ("solver", 1e-10),
                ("tau", 1e-3),
                ("rel_error", 1e-6),
                ("coverage", 0.5),
            ],
            Task::RecoverTaylor => &[
                ("solver", 1e-10),
                ("newton", 1e-12),
                ("tau", 1e-3),
                ("slope", 1.9),
            ],
            Task::UcpSuite => &[("poincare_stability", 0.05)],
            Task::Admissibility => &[],
            Task::FracopChecks => &[
                ("symbol", 1e-12),
                ("semigroup", 1e-9),
                ("functional_calculus", 1e-10),
                ("convergence_order", 1.8),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Fourier,
    /// Periodic finite-difference base operator, spectral power by
    /// eigendecomposition.
    MatrixFunction,
}

/// One operator term before it is bound to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub coefficient: Expr,
    pub order: f64,
    /// Row-major `γ`; a single entry in 2-D means `c·I`.
    pub gamma: Vec<f64>,
    pub ellipticity: Option<f64>,
    pub backend: BackendChoice,
}

impl TermSpec {
    fn anisotropy(&self, dim: usize) -> Result<AnisotropyMatrix> {
        let entries: Vec<f64> = match (dim, self.gamma.len()) {
            (2, 1) => vec![self.gamma[0], 0.0, 0.0, self.gamma[0]],
            _ => self.gamma.clone(),
        };
        let ellipticity = match self.ellipticity {
            Some(e) => e,
            None => tightest_ellipticity(&entries),
        };
        AnisotropyMatrix::new(dim, &entries, ellipticity)
    }
}

/// `min(λ_min, 1/λ_max, 1)`; non-definite input is left for the matrix
/// constructor to reject.
/// Slopes and orders are thresholds from below; everything else is a
/// positive tolerance.
fn check_tolerance_value(key: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(format!("tolerance '{key}' must be finite")));
    }
    let positive = !matches!(key, "slope" | "convergence_order");
    if positive && value <= 0.0 {
        return Err(invalid(format!("tolerance '{key}' must be positive, got {value}")));
    }
    Ok(())
}

fn tightest_ellipticity(entries: &[f64]) -> f64 {
    let (lo, hi) = match entries {
        [a, b, _, d] => {
            let mean = 0.5 * (a + d);
            let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            (mean - radius, mean + radius)
        }
        _ => (entries[0], entries[0]),
    };
    if lo > 0.0 {
        lo.min(1.0 / hi).min(1.0)
    } else {
        1.0
    }
}

/// Operator description, bound to a grid by [`OperatorSpec::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub terms: Vec<TermSpec>,
    pub role: OperatorRole,
}

impl OperatorSpec {
    pub fn build(&self, grid: Grid) -> Result<PolyFractionalOperator> {
        self.build_inner(grid, false)
    }

    /// Same checks as `build`, with Fourier backends throughout so that no
    /// eigendecomposition is paid for.
    fn validate(&self, grid: Grid) -> Result<PolyFractionalOperator> {
        let uses_matrix = self.terms.iter().any(|t| t.backend == BackendChoice::MatrixFunction);
        if uses_matrix && grid.len() > DEFAULT_DOF_CAP {
            return Err(Error::DofCapExceeded {
                dofs: grid.len(),
                cap: DEFAULT_DOF_CAP,
            });
        }
        self.build_inner(grid, true)
    }

    fn build_inner(&self, grid: Grid, fourier_only: bool) -> Result<PolyFractionalOperator> {
        let mut bases: Vec<(AnisotropyMatrix, Arc<SelfAdjointOperator>)> = Vec::new();
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let gamma = t.anisotropy(grid.dim())?;
            let backend = if fourier_only || t.backend == BackendChoice::Fourier {
                FractionalBackend::fourier(grid, gamma, t.order)?
            } else {
                let base = match bases.iter().find(|(g, _)| *g == gamma) {
                    Some((_, b)) => Arc::clone(b),
                    None => {
                        let field = AnisotropyField::constant(grid, gamma)?;
                        let b = Arc::new(assemble_elliptic(grid, &field, Boundary::Periodic)?);
                        bases.push((gamma, Arc::clone(&b)));
                        b
                    }
                };
                FractionalBackend::matrix_function(base, t.order)?
            };
            let term = match t.coefficient.constant_value() {
                Some(c) => PolyTerm::constant(c, backend)?,
                None => PolyTerm::variable(t.coefficient.sample(grid)?, backend)?,
            };
            terms.push(term);
        }
        PolyFractionalOperator::new(terms, self.role)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorSpec {
    pub data: Expr,
    /// Multiply the data by the indicator of the window `W`.
    pub window_supported: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSpec {
    pub order: usize,
    pub eps: Vec<f64>,
    /// Amplitudes for the first-order divided-difference slope check.
    pub slope_eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcpOperator {
    pub name: String,
    pub operator: OperatorSpec,
    pub gap_target: GapTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorCheck {
    pub coefficient: Expr,
    pub window: Shape,
    pub inner_window: Option<Shape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareCheck {
    pub sigma: f64,
    pub samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcpSpec {
    pub sizes: Vec<usize>,
    pub operators: Vec<UcpOperator>,
    pub exterior: Option<ExteriorCheck>,
    pub poincare: Option<PoincareCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityCase {
    pub name: String,
    pub operator: OperatorSpec,
    pub gap_target: GapTarget,
    pub expect: crate::polyop::AdmissibilityStatus,
    pub expect_witness_orders: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecksSpec {
    pub symbol_cases: usize,
    pub semigroup_cases: usize,
    pub functional_calculus_fields: usize,
    pub convergence_sizes: Vec<usize>,
    pub convergence_orders: Vec<f64>,
    /// Points per axis for the 2-D grids of the symbol check.
    pub points_2d: usize,
}

/// Task-specific part of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Forward { manufactured: Option<Expr>, forcing: Option<Expr> },
    Dtn { probe: OperatorSpec, test_function: Option<Expr> },
    RecoverQ,
    RecoverAlpha { order: f64 },
    RecoverTaylor(TaylorSpec),
    UcpSuite(UcpSpec),
    Admissibility(Vec<AdmissibilityCase>),
    FracopChecks(ChecksSpec),
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub task: Task,
    pub seed: u64,
    pub dim: usize,
    pub extent: f64,
    pub points: usize,
    pub omega: Option<Shape>,
    pub window: Option<Shape>,
    pub operator: Option<OperatorSpec>,
    pub potential: Option<Expr>,
    /// Taylor coefficients `F^(0), F^(1), …` of a semilinear source.
    pub source: Option<Vec<Expr>>,
    pub exterior: Option<ExteriorSpec>,
    pub method: SolveMethod,
    pub tolerances: BTreeMap<String, f64>,
    pub spec: TaskSpec,
    source_text: String,
}

// ---------------------------------------------------------------------------
// raw TOML layer

type Text = Spanned<String>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    task: Task,
    #[serde(default)]
    seed: u64,
    description: Option<String>,
    grid: RawGrid,
    omega: Option<Shape>,
    window: Option<Shape>,
    operator: Option<RawOperator>,
    probe: Option<RawOperator>,
    potential: Option<RawPotential>,
    source: Option<RawSource>,
    exterior: Option<RawExterior>,
    solver: Option<RawSolver>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    forward: Option<RawForward>,
    dtn: Option<RawDtn>,
    recover_alpha: Option<RawRecoverAlpha>,
    taylor: Option<RawTaylor>,
    ucp: Option<RawUcp>,
    admissibility: Option<RawAdmissibility>,
    checks: Option<RawChecks>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    /// A number or a constant expression such as `"pi"`.
    extent: Spanned<toml::Value>,
    points: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    order: f64,
    coefficient: Option<Text>,
    gamma: Option<Vec<f64>>,
    ellipticity: Option<f64>,
    #[serde(default)]
    backend: BackendChoice,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    role: Option<OperatorRole>,
    terms: Vec<RawTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    q: Text,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    coefficients: Vec<Text>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExterior {
    f: Text,
    #[serde(default)]
    window_supported: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default)]
    method: SolveMethod,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForward {
    manufactured: Option<Text>,
    forcing: Option<Text>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDtn {
    test_function: Option<Text>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecoverAlpha {
    order: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTaylor {
    order: usize,
    eps: Vec<f64>,
    #[serde(default)]
    slope_eps: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUcpOperator {
    name: String,
    role: Option<OperatorRole>,
    #[serde(default)]
    gap_target: GapTarget,
    terms: Vec<RawTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExteriorCheck {
    coefficient: Option<Text>,
    window: Shape,
    inner_window: Option<Shape>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoincare {
    sigma: f64,
    samples: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUcp {
    sizes: Vec<usize>,
    #[serde(default)]
    operators: Vec<RawUcpOperator>,
    exterior: Option<RawExteriorCheck>,
    poincare: Option<RawPoincare>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: String,
    role: Option<OperatorRole>,
    #[serde(default)]
    gap_target: GapTarget,
    expect: crate::polyop::AdmissibilityStatus,
    expect_witness_orders: Option<Vec<f64>>,
    terms: Vec<RawTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmissibility {
    cases: Vec<RawCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    #[serde(default = "default_symbol_cases")]
    symbol_cases: usize,
    #[serde(default = "default_semigroup_cases")]
    semigroup_cases: usize,
    #[serde(default = "default_fc_fields")]
    functional_calculus_fields: usize,
    #[serde(default = "default_sizes")]
    convergence_sizes: Vec<usize>,
    #[serde(default = "default_conv_orders")]
    convergence_orders: Vec<f64>,
    #[serde(default = "default_points_2d")]
    points_2d: usize,
}

fn default_symbol_cases() -> usize {
    50
}
fn default_semigroup_cases() -> usize {
    20
}
fn default_fc_fields() -> usize {
    10
}
fn default_sizes() -> Vec<usize> {
    vec![64, 128, 256]
}
fn default_conv_orders() -> Vec<f64> {
    vec![0.5]
}
fn default_points_2d() -> usize {
    16
}

// ---------------------------------------------------------------------------
// conversion

/// Line and column (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

struct Ctx<'a> {
    text: &'a str,
    dim: usize,
}

impl Ctx<'_> {
    /// Parses an expression and maps its error column into the file.
    fn expr(&self, t: &Text) -> Result<Expr> {
        Expr::parse(t.get_ref(), self.dim).map_err(|e| match e {
            Error::Expression { column, message } => {
                let span = t.span();
                let quote = matches!(self.text.as_bytes().get(span.start), Some(b'"' | b'\''));
                let (line, col) = line_col(self.text, span.start + usize::from(quote));
                Error::ScenarioParse {
                    line,
                    column: col + column - 1,
                    message: format!("in expression '{}': {message}", t.get_ref()),
                }
            }
            other => other,
        })
    }

    fn terms(&self, raw: &[RawTerm], role: OperatorRole) -> Result<OperatorSpec> {
        if raw.is_empty() {
            return Err(invalid("an operator needs at least one term"));
        }
        let terms = raw
            .iter()
            .map(|t| {
                Ok(TermSpec {
                    coefficient: match &t.coefficient {
                        Some(c) => self.expr(c)?,
                        None => Expr::parse("1", self.dim)?,
                    },
                    order: t.order,
                    gamma: t.gamma.clone().unwrap_or_else(|| vec![1.0]),
                    ellipticity: t.ellipticity,
                    backend: t.backend,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for t in &terms {
            if !(t.gamma.len() == 1 || t.gamma.len() == self.dim * self.dim) {
                return Err(invalid(format!(
                    "gamma needs 1 or {} entries, got {}",
                    self.dim * self.dim,
                    t.gamma.len()
                )));
            }
        }
        Ok(OperatorSpec { terms, role })
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ScenarioInvalid(msg.into())
}

fn require<T>(v: Option<T>, what: &str, task: Task) -> Result<T> {
    v.ok_or_else(|| invalid(format!("task {} requires {what}", task.name())))
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::ScenarioParse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    let dim = raw.grid.dim;
    if !(dim == 1 || dim == 2) {
        return Err(invalid(format!("grid dim must be 1 or 2, got {dim}")));
    }
    let ctx = Ctx { text, dim };
    let extent = match raw.grid.extent.get_ref() {
        toml::Value::Float(v) => *v,
        toml::Value::Integer(v) => *v as f64,
        toml::Value::String(t) => ctx
            .expr(&Spanned::new(raw.grid.extent.span(), t.clone()))?
            .constant_value()
            .ok_or_else(|| invalid("grid extent must not depend on x or y"))?,
        other => return Err(invalid(format!("grid extent must be a number, got {other}"))),
    };
    let task = raw.task;
    let opt_expr = |t: &Option<Text>| t.as_ref().map(|t| ctx.expr(t)).transpose();

    let operator = raw
        .operator
        .as_ref()
        .map(|o| ctx.terms(&o.terms, o.role.unwrap_or(OperatorRole::Forward)))
        .transpose()?;
    let potential = raw.potential.as_ref().map(|p| ctx.expr(&p.q)).transpose()?;
    let source = raw
        .source
        .as_ref()
        .map(|s| s.coefficients.iter().map(|c| ctx.expr(c)).collect::<Result<Vec<_>>>())
        .transpose()?;
    let exterior = raw
        .exterior
        .as_ref()
        .map(|e| {
            Ok::<_, Error>(ExteriorSpec {
                data: ctx.expr(&e.f)?,
                window_supported: e.window_supported,
            })
        })
        .transpose()?;

    let spec = match task {
        Task::Forward => {
            let f = raw.forward.as_ref();
            TaskSpec::Forward {
                manufactured: f.map(|f| opt_expr(&f.manufactured)).transpose()?.flatten(),
                forcing: f.map(|f| opt_expr(&f.forcing)).transpose()?.flatten(),
            }
        }
        Task::Dtn => {
            let p = require(raw.probe.as_ref(), "a [probe] operator", task)?;
            TaskSpec::Dtn {
                probe: ctx.terms(&p.terms, p.role.unwrap_or(OperatorRole::Probe))?,
                test_function: raw.dtn.as_ref().map(|d| opt_expr(&d.test_function)).transpose()?.flatten(),
            }
        }
        Task::RecoverQ => TaskSpec::RecoverQ,
        Task::RecoverAlpha => TaskSpec::RecoverAlpha {
            order: require(raw.recover_alpha.as_ref(), "a [recover_alpha] table", task)?.order,
        },
        Task::RecoverTaylor => {
            let t = require(raw.taylor.as_ref(), "a [taylor] table", task)?;
            TaskSpec::RecoverTaylor(TaylorSpec {
                order: t.order,
                eps: t.eps.clone(),
                slope_eps: t.slope_eps.clone(),
            })
        }
        Task::UcpSuite => {
            let u = require(raw.ucp.as_ref(), "a [ucp] table", task)?;
            let operators = u
                .operators
                .iter()
                .map(|o| {
                    Ok(UcpOperator {
                        name: o.name.clone(),
                        operator: ctx.terms(&o.terms, o.role.unwrap_or(OperatorRole::Probe))?,
                        gap_target: o.gap_target,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let exterior = u
                .exterior
                .as_ref()
                .map(|e| {
                    Ok::<_, Error>(ExteriorCheck {
                        coefficient: match &e.coefficient {
                            Some(c) => ctx.expr(c)?,
                            None => Expr::parse("1", dim)?,
                        },
                        window: e.window.clone(),
                        inner_window: e.inner_window.clone(),
                    })
                })
                .transpose()?;
            TaskSpec::UcpSuite(UcpSpec {
                sizes: u.sizes.clone(),
                operators,
                exterior,
                poincare: u.poincare.as_ref().map(|p| PoincareCheck {
                    sigma: p.sigma,
                    samples: p.samples.clone(),
                }),
            })
        }
        Task::Admissibility => {
            let a = require(raw.admissibility.as_ref(), "an [admissibility] table", task)?;
            let cases = a
                .cases
                .iter()
                .map(|c| {
                    Ok(AdmissibilityCase {
                        name: c.name.clone(),
                        operator: ctx.terms(&c.terms, c.role.unwrap_or(OperatorRole::Probe))?,
                        gap_target: c.gap_target,
                        expect: c.expect,
                        expect_witness_orders: c.expect_witness_orders.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            TaskSpec::Admissibility(cases)
        }
        Task::FracopChecks => {
            let c = require(raw.checks.as_ref(), "a [checks] table", task)?;
            TaskSpec::FracopChecks(ChecksSpec {
                symbol_cases: c.symbol_cases,
                semigroup_cases: c.semigroup_cases,
                functional_calculus_fields: c.functional_calculus_fields,
                convergence_sizes: c.convergence_sizes.clone(),
                convergence_orders: c.convergence_orders.clone(),
                points_2d: c.points_2d,
            })
        }
    };

    let mut scenario = Scenario {
        name: raw.name,
        description: raw.description,
        task,
        seed: raw.seed,
        dim,
        extent,
        points: raw.grid.points,
        omega: raw.omega,
        window: raw.window,
        operator,
        potential,
        source,
        exterior,
        method: raw.solver.map(|s| s.method).unwrap_or_default(),
        tolerances: task
            .default_tolerances()
            .iter()
            .map(|&(k, v)| (k.to_string(), v))
            .collect(),
        spec,
        source_text: text.to_string(),
    };
    for (k, v) in raw.tolerances {
        scenario.set_tolerance(&k, v)?;
    }
    scenario.validate()?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// validation and accessors

fn tolerance_key_allowed(task: Task, key: &str, spec: &TaskSpec) -> bool {
    if task.default_tolerances().iter().any(|(k, _)| *k == key) {
        return true;
    }
    if let TaskSpec::RecoverTaylor(t) = spec {
        for prefix in ["abs_error_l", "rel_error_l"] {
            if let Some(l) = key.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()) {
                return l <= t.order;
            }
        }
    }
    false
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.extent, self.points)
    }

    pub fn grid_with_points(&self, points: usize) -> Result<Grid> {
        Grid::new(self.dim, self.extent, points)
    }

    pub fn omega_region(&self, grid: Grid) -> Result<Region> {
        let shape = self
            .omega
            .as_ref()
            .ok_or_else(|| invalid(format!("task {} requires an [omega] region", self.task.name())))?;
        define_region(grid, shape)
    }

    pub fn window_region(&self, grid: Grid, omega: &Region) -> Result<Option<Region>> {
        self.window.as_ref().map(|w| define_window(grid, w, omega)).transpose()
    }

    /// The tolerance or threshold registered under `key`.
    pub fn tolerance(&self, key: &str) -> Option<f64> {
        self.tolerances.get(key).copied()
    }

    /// Sets a tolerance; unknown keys for the task are rejected.
    pub fn set_tolerance(&mut self, key: &str, value: f64) -> Result<()> {
        if !tolerance_key_allowed(self.task, key, &self.spec) {
            return Err(invalid(format!(
                "'{key}' is not a tolerance of task {}",
                self.task.name()
            )));
        }
        check_tolerance_value(key, value)?;
        self.tolerances.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(format!("override '{assignment}' is not KEY=VALUE")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("override '{assignment}': '{v}' is not a number")))?;
        self.set_tolerance(k.trim(), value)
    }

    /// The original file contents.
    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// SHA-256 over the file contents, the seed and the resolved tolerances.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.source_text.as_bytes());
        h.update(b"\0seed=");
        h.update(self.seed.to_le_bytes());
        for (k, v) in &self.tolerances {
            h.update(format!("\0{k}={v:e}").as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("scenario name must be non-empty and contain no path separators"));
        }
        for (k, &v) in &self.tolerances {
            check_tolerance_value(k, v)?;
        }
        let needs_omega = !matches!(self.task, Task::Admissibility | Task::FracopChecks);
        let omega = if needs_omega {
            Some(self.omega_region(grid)?)
        } else {
            None
        };
        let window = match &omega {
            Some(o) => self.window_region(grid, o)?,
            None => None,
        };
        if let Some(e) = &self.exterior {
            if e.window_supported && window.is_none() {
                return Err(invalid("window_supported exterior data needs a [window] region"));
            }
        }
        let needs_operator = matches!(
            self.task,
            Task::Forward | Task::Dtn | Task::RecoverQ | Task::RecoverAlpha | Task::RecoverTaylor
        );
        let p = if needs_operator {
            Some(require(self.operator.as_ref(), "an [operator]", self.task)?.validate(grid)?)
        } else {
            None
        };
        let needs_exterior = match &self.spec {
            TaskSpec::Forward { manufactured, .. } => manufactured.is_none(),
            _ => needs_operator,
        };
        if needs_exterior {
            require(self.exterior.as_ref(), "[exterior] data", self.task)?;
        }
        for e in [&self.potential].into_iter().flatten() {
            e.sample(grid)?;
        }
        match &self.spec {
            TaskSpec::Forward { manufactured, forcing } => {
                if manufactured.is_some() && (forcing.is_some() || self.exterior.is_some()) {
                    return Err(invalid(
                        "a manufactured solution fixes both the forcing and the exterior data",
                    ));
                }
            }
            TaskSpec::Dtn { probe, .. } => {
                let probe = probe.validate(grid)?;
                let top = p.as_ref().map_or(0.0, |p| p.top_order());
                if probe.top_order() > top {
                    return Err(invalid(format!(
                        "probe top order {} exceeds the forward operator's top order {top}",
                        probe.top_order()
                    )));
                }
            }
            TaskSpec::RecoverQ => {
                require(self.potential.as_ref(), "a [potential] (the truth to recover)", self.task)?;
            }
            TaskSpec::RecoverAlpha { order } => {
                let p = p.as_ref().expect("operator validated above");
                if !p.terms().iter().any(|t| t.order() == *order) {
                    return Err(invalid(format!("no operator term has order {order}")));
                }
                if p.terms().len() < 2 {
                    return Err(invalid("coefficient recovery needs at least two operator terms"));
                }
            }
            TaskSpec::RecoverTaylor(t) => {
                let src = require(self.source.as_ref(), "a [source] with Taylor coefficients", self.task)?;
                if src.is_empty() {
                    return Err(invalid("the source needs at least one Taylor coefficient"));
                }
                if self.potential.is_some() {
                    return Err(invalid("a semilinear scenario carries its potential in the source"));
                }
                if t.order > 0 && t.eps.is_empty() {
                    return Err(invalid("taylor.eps must list at least one amplitude"));
                }
                check_amplitudes(&t.eps, "taylor.eps")?;
                check_amplitudes(&t.slope_eps, "taylor.slope_eps")?;
                if t.slope_eps.len() == 1 {
                    return Err(invalid("taylor.slope_eps needs at least two amplitudes"));
                }
                if !t.slope_eps.is_empty() && src[0].constant_value() != Some(0.0) {
                    return Err(invalid("the linearization slope check needs F^(0) = 0"));
                }
            }
            TaskSpec::UcpSuite(u) => {
                if u.sizes.is_empty() {
                    return Err(invalid("ucp.sizes must not be empty"));
                }
                for &n in &u.sizes {
                    let g = self.grid_with_points(n)?;
                    self.omega_region(g)?;
                    for op in &u.operators {
                        op.operator.validate(g)?;
                    }
                }
                if let (Some(e), Some(omega)) = (&u.exterior, &omega) {
                    let w = define_window(grid, &e.window, omega)?;
                    if let Some(inner) = &e.inner_window {
                        if !define_window(grid, inner, omega)?.is_subset_of(&w) {
                            return Err(invalid("ucp.exterior.inner_window must lie inside the window"));
                        }
                    }
                    e.coefficient.sample(grid)?;
                }
                if let Some(p) = &u.poincare {
                    if p.samples.is_empty() || p.samples.contains(&0) {
                        return Err(invalid("ucp.poincare.samples must be positive counts"));
                    }
                }
            }
            TaskSpec::Admissibility(cases) => {
                if cases.is_empty() {
                    return Err(invalid("admissibility.cases must not be empty"));
                }
                for c in cases {
                    c.operator.validate(grid)?;
                }
            }
            TaskSpec::FracopChecks(c) => {
                if self.dim != 1 {
                    return Err(invalid("fracop_checks runs on a 1-D base grid"));
                }
                if c.convergence_sizes.len() < 2 {
                    return Err(invalid("checks.convergence_sizes needs at least two grids"));
                }
                for &n in c.convergence_sizes.iter().chain([&c.points_2d]) {
                    Grid::new(1, self.extent, n)?;
                }
            }
        }
        Ok(())
    }
}

fn check_amplitudes(eps: &[f64], what: &str) -> Result<()> {
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(invalid(format!("{what} entries must be positive")));
    }
    let mut sorted = eps.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid(format!("{what} entries must be distinct")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
name = "smoke"
task = "forward"

[grid]
dim = 1
extent = "pi"
points = 64

[omega]
shape = "box"
center = [0.0]
half_widths = [1.0]

[[operator.terms]]
order = 0.5

[exterior]
f = "gaussian(2, 0.3)"
"#;

    fn err(text: &str) -> Error {
        parse_scenario_str(text).unwrap_err()
    }

    #[test]
    fn smoke_scenario_parses() {
        let s = parse_scenario_str(SMOKE).unwrap();
        assert_eq!(s.task, Task::Forward);
        assert_eq!(s.extent, std::f64::consts::PI);
        assert_eq!(s.tolerance("solver"), Some(1e-10));
        let p = s.operator.as_ref().unwrap().build(s.grid().unwrap()).unwrap();
        assert_eq!(p.top_order(), 0.5);
    }

    #[test]
    fn expression_errors_point_into_the_file() {
        let text = SMOKE.replace("gaussian(2, 0.3)", "gaussian(2, $)");
        match err(&text) {
            Error::ScenarioParse { line, column, .. } => {
                assert_eq!(line, 19);
                assert_eq!(column, 18);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let text = SMOKE.replace("points = 64", "points = = 64");
        assert!(matches!(err(&text), Error::ScenarioParse { line: 8, .. }));
        let text = SMOKE.replace("points = 64", "points = 64\nspacing = 1");
        assert!(matches!(err(&text), Error::ScenarioParse { line: 9, .. }));
    }

    #[test]
    fn probe_order_above_forward_order_is_rejected() {
        let text = SMOKE.replace("task = \"forward\"", "task = \"dtn\"")
            + "\n[[probe.terms]]\norder = 0.75\n";
        match err(&text) {
            Error::ScenarioInvalid(m) => assert!(m.contains("probe top order"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn omega_must_be_interior() {
        let text = SMOKE.replace("half_widths = [1.0]", "half_widths = [4.0]");
        assert!(matches!(err(&text), Error::InvalidRegion(_)));
    }

    #[test]
    fn missing_task_sections_are_named() {
        let text = SMOKE.replace("task = \"forward\"", "task = \"recover_q\"");
        match err(&text) {
            Error::ScenarioInvalid(m) => assert!(m.contains("[potential]"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_are_checked() {
        let mut s = parse_scenario_str(SMOKE).unwrap();
        let before = s.digest();
        s.apply_override("solver=1e-12").unwrap();
        assert_eq!(s.tolerance("solver"), Some(1e-12));
        assert_ne!(s.digest(), before);
        assert!(s.apply_override("tau=0.1").is_err());
        assert!(s.apply_override("solver").is_err());
        assert!(s.apply_override("solver=abc").is_err());
    }

    #[test]
    fn integer_forward_top_order_is_rejected() {
        let text = SMOKE.replace("order = 0.5", "order = 1.0");
        assert!(matches!(err(&text), Error::InvalidOperator(_)));
    }
}
