//! Browser bindings for the demo page in `www/`.
//!
//! Everything lives on the line `[-π, π)` with Ω = (−1, 1).

use polyfrac::fracop::{apply_fractional, FractionalBackend};
use polyfrac::inverse::recover_q;
use polyfrac::lattice::{define_region, make_grid, Shape};
use polyfrac::polyop::{OperatorRole, PolyFractionalOperator};
use polyfrac::solver::{solve_linear, LinearProblem, SolveOptions};
use polyfrac::{Grid, GridField, Region};
use wasm_bindgen::prelude::*;

const EXTENT: f64 = std::f64::consts::PI;

fn js(e: polyfrac::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn setup(points: usize) -> Result<(Grid, Region), JsError> {
    let grid = make_grid(1, EXTENT, points).map_err(js)?;
    let omega = define_region(grid, &Shape::interval(-1.0, 1.0)).map_err(js)?;
    Ok((grid, omega))
}

fn bump(grid: Grid, center: f64, width: f64) -> GridField {
    GridField::from_fn(grid, |x, _| (-((x - center) / width).powi(2)).exp())
}

fn two_term(grid: Grid, low: f64, high: f64) -> Result<PolyFractionalOperator, JsError> {
    PolyFractionalOperator::isotropic(grid, &[(1.0, low), (1.0, high)], OperatorRole::Forward).map_err(js)
}

/// Node coordinates of an `points`-node grid.
#[wasm_bindgen]
pub fn nodes(points: usize) -> Result<Vec<f64>, JsError> {
    let grid = make_grid(1, EXTENT, points).map_err(js)?;
    Ok((0..grid.len()).map(|i| grid.node_coords(i)[0]).collect())
}

/// `(−Δ)^order` of the bump `exp(−(x/width)²)`.
#[wasm_bindgen]
pub fn fractional_laplacian(points: usize, order: f64, width: f64) -> Result<Vec<f64>, JsError> {
    let grid = make_grid(1, EXTENT, points).map_err(js)?;
    let backend = FractionalBackend::isotropic(grid, order).map_err(js)?;
    let out = apply_fractional(&backend, &bump(grid, 0.0, width)).map_err(js)?;
    Ok(out.values().to_vec())
}

/// Solution of `(−Δ)^low u + (−Δ)^high u + q u = 0` in Ω with
/// `q = q_scale·(1 + x²)` and a bump of exterior data centered at `center`.
#[wasm_bindgen]
pub fn forward_solve(points: usize, low: f64, high: f64, q_scale: f64, center: f64) -> Result<Vec<f64>, JsError> {
    let (grid, omega) = setup(points)?;
    let p = two_term(grid, low, high)?;
    let q = GridField::from_fn(grid, |x, _| q_scale * (1.0 + x * x));
    let f = bump(grid, center, 0.5);
    let prob = LinearProblem::new(p, q, f, omega).map_err(js)?;
    Ok(solve_linear(&prob, &SolveOptions::default()).map_err(js)?.u.values().to_vec())
}

#[wasm_bindgen]
pub struct Recovery {
    truth: Vec<f64>,
    estimate: Vec<f64>,
    rel_error: f64,
    coverage: f64,
}

#[wasm_bindgen]
impl Recovery {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    /// NaN outside the effective set.
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rel_error(&self) -> f64 {
        self.rel_error
    }

    #[wasm_bindgen(getter)]
    pub fn coverage(&self) -> f64 {
        self.coverage
    }
}

/// Measures `u` for the potential `1 + amplitude·cos(πx)` and recovers the
/// potential pointwise where `|u| ≥ tau·max|u|`.
#[wasm_bindgen]
pub fn recover_potential(points: usize, low: f64, high: f64, amplitude: f64, tau: f64) -> Result<Recovery, JsError> {
    let (grid, omega) = setup(points)?;
    let p = two_term(grid, low, high)?;
    let q = GridField::from_fn(grid, |x, _| 1.0 + amplitude * (std::f64::consts::PI * x).cos());
    let prob = LinearProblem::new(p.clone(), q.clone(), bump(grid, 2.0, 0.5), omega.clone()).map_err(js)?;
    let opts = SolveOptions {
        tol: 1e-13,
        ..SolveOptions::default()
    };
    let u = solve_linear(&prob, &opts).map_err(js)?.u;
    let mut rep = recover_q(&p, &u, &omega, tau).map_err(js)?;
    rep.compare(&q).map_err(js)?;
    let estimate = (0..grid.len())
        .map(|i| {
            if rep.effective.region.contains(i) {
                rep.estimate.values()[i]
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(Recovery {
        truth: q.values().to_vec(),
        estimate,
        rel_error: rep.rel_error_on_e.unwrap_or(f64::NAN),
        coverage: rep.coverage,
    })
}
