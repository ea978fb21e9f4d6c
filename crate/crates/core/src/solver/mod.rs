//! Exterior value problems: `P u + q u = F` in Ω, `u = f` in Ω^c, the
//! semilinear variant `P u + F(x, u) = 0`, and the DtN measurements.

mod dtn;
mod linear;
mod semilinear;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dtn::{dtn_apply, dtn_pairing};
pub use linear::{solve_linear, solve_linear_with_matrix, LinearProblem};
pub use semilinear::{solve_semilinear, NewtonOptions, SemilinearProblem, TaylorSource};

use crate::error::Result;
use crate::lattice::io::{write_atomic, write_field_binary};
use crate::lattice::GridField;

/// Which interior solver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Conjugate gradients for symmetric `K`, GMRES otherwise.
    #[default]
    Auto,
    Cg,
    Gmres,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    Cg,
    Gmres,
    Direct,
}

/// Interior solve settings. Convergence means `‖b − Kx‖_∞ ≤ tol·‖b‖_∞`,
/// or the residual has reached the rounding level of one product `Kx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    /// Defaults to ten times the number of interior nodes.
    pub max_iter: Option<usize>,
    pub method: SolveMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: None,
            method: SolveMethod::Auto,
        }
    }
}

/// Discrete shadow of the a-priori estimate: both sides, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `Σ_i ‖u‖_{H^{s_i}}`.
    pub solution_norm: f64,
    /// `Σ_i ‖F‖_{H^{−s_i}} + ‖f‖_{H^{s_M}}` with `f` restricted to Ω^c.
    pub data_norm: f64,
    /// `solution_norm / data_norm` (0 when the data vanish).
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridField,
    /// `max_Ω |P u + q u − F|`, evaluated with the operator itself.
    pub residual_interior: f64,
    /// Backward error of the final interior solve.
    pub backward_error: f64,
    pub iterations: usize,
    pub solver_tag: SolverTag,
    pub bound_report: Option<BoundReport>,
    /// Newton residual max-norms, one per iterate (empty for linear solves).
    pub residual_history: Vec<f64>,
}

/// JSON sidecar stored next to a persisted solution field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSidecar {
    pub residual_interior: f64,
    pub iterations: usize,
    pub solver_tag: SolverTag,
    pub bound_report: Option<BoundReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
}

impl Solution {
    pub fn sidecar(&self) -> SolutionSidecar {
        SolutionSidecar {
            residual_interior: self.residual_interior,
            iterations: self.iterations,
            solver_tag: self.solver_tag,
            bound_report: self.bound_report,
            residual_history: self.residual_history.clone(),
        }
    }

    /// Writes `<stem>.pfl` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_field_binary(&self.u, &dir.join(format!("{stem}.pfl")))?;
        let json = serde_json::to_vec_pretty(&self.sidecar())?;
        write_atomic(&dir.join(format!("{stem}.json")), &json)
    }
}
