use nalgebra::DVector;

use super::{BoundReport, Solution, SolveMethod, SolveOptions, SolverTag};
use crate::error::{Error, Result};
use crate::lattice::{embed_values, restrict_field, sobolev_norm, GridField, Region};
use crate::linalg::{self, Criterion};
use crate::polyop::{apply_poly, interior_matrix, InteriorMatrix, PolyFractionalOperator};

/// `P u + q u = F` in Ω, `u = f` in Ω^c.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub operator: PolyFractionalOperator,
    pub potential: GridField,
    /// Exterior data; only its Ω^c values are read.
    pub exterior: GridField,
    /// Interior source; only its Ω values are read.
    pub source: GridField,
    pub omega: Region,
}

impl LinearProblem {
    /// Homogeneous interior equation (`F = 0`).
    pub fn new(
        operator: PolyFractionalOperator,
        potential: GridField,
        exterior: GridField,
        omega: Region,
    ) -> Result<Self> {
        let grid = operator.grid();
        grid.ensure_same(&potential.grid(), "potential")?;
        grid.ensure_same(&exterior.grid(), "exterior data")?;
        grid.ensure_same(&omega.grid(), "omega")?;
        Ok(LinearProblem {
            operator,
            potential,
            source: GridField::zeros(grid),
            exterior,
            omega,
        })
    }

    pub fn with_source(mut self, source: GridField) -> Result<Self> {
        self.operator.grid().ensure_same(&source.grid(), "interior source")?;
        self.source = source;
        Ok(self)
    }
}

/// Solves with a freshly assembled interior matrix.
pub fn solve_linear(prob: &LinearProblem, opts: &SolveOptions) -> Result<Solution> {
    let k = interior_matrix(&prob.operator, &prob.potential, &prob.omega)?;
    solve_linear_with_matrix(prob, &k, opts)
}

/// Solves reusing an interior matrix of `P + q` already assembled on Ω.
pub fn solve_linear_with_matrix(
    prob: &LinearProblem,
    k: &InteriorMatrix,
    opts: &SolveOptions,
) -> Result<Solution> {
    if k.nodes() != prob.omega.nodes().as_slice() {
        return Err(Error::GridMismatch("interior matrix assembled on a different omega".into()));
    }
    prob.exterior.ensure_finite("exterior data")?;
    prob.source.ensure_finite("interior source")?;
    let p = &prob.operator;
    let q = &prob.potential;
    let omega = &prob.omega;
    let outside = omega.complement();

    // u = u0 + e, e the exterior data extended by zero into Ω
    let e = restrict_field(&prob.exterior.real_part(), &outside)?;
    let pe = apply_poly(p, &e)?;
    let rhs_field = prob.source.sub(&pe)?.sub(&e.mul_pointwise(q)?)?;
    let b = DVector::from_vec(omega.gather(&rhs_field)?);

    let kmat = k.matrix();
    let max_iter = opts.max_iter.unwrap_or(10 * k.dim());
    let (x, iterations, tag) = match opts.method {
        SolveMethod::Direct => (linalg::direct_solve(kmat, &b)?, 1, SolverTag::Direct),
        SolveMethod::Cg => {
            let out = linalg::conjugate_gradient(kmat, &b, opts.tol, max_iter)?;
            (out.x, out.iterations, SolverTag::Cg)
        }
        SolveMethod::Gmres => {
            let out = linalg::gmres(kmat, &b, opts.tol, max_iter)?;
            (out.x, out.iterations, SolverTag::Gmres)
        }
        SolveMethod::Auto if k.is_symmetric() => {
            match linalg::conjugate_gradient(kmat, &b, opts.tol, max_iter) {
                Ok(out) => (out.x, out.iterations, SolverTag::Cg),
                // indefinite but symmetric: fall back to a residual-minimizing method
                Err(Error::Singular(_)) => {
                    let out = linalg::gmres(kmat, &b, opts.tol, max_iter)?;
                    (out.x, out.iterations, SolverTag::Gmres)
                }
                Err(err) => return Err(err),
            }
        }
        SolveMethod::Auto => {
            let out = linalg::gmres(kmat, &b, opts.tol, max_iter)?;
            (out.x, out.iterations, SolverTag::Gmres)
        }
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("interior solve produced non-finite values".into()));
    }
    let crit = Criterion::new(kmat, &b, opts.tol);
    let backward_error = crit.backward_error(&(&b - kmat * &x), &x);

    let u0 = embed_values(x.as_slice(), omega)?;
    let u = e.add(&u0)?;
    let residual_interior = interior_residual(p, q, &prob.source, &u, omega)?;
    let bound_report = Some(bound_report(p, &u, &prob.source, &e, omega)?);
    Ok(Solution {
        u,
        residual_interior,
        backward_error,
        iterations,
        solver_tag: tag,
        bound_report,
        residual_history: Vec::new(),
    })
}

/// `max_Ω |P u + q u − F|`.
pub(crate) fn interior_residual(
    p: &PolyFractionalOperator,
    q: &GridField,
    source: &GridField,
    u: &GridField,
    omega: &Region,
) -> Result<f64> {
    let r = apply_poly(p, u)?.add(&u.mul_pointwise(q)?)?.sub(source)?;
    Ok(omega.gather(&r)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

fn bound_report(
    p: &PolyFractionalOperator,
    u: &GridField,
    source: &GridField,
    exterior: &GridField,
    omega: &Region,
) -> Result<BoundReport> {
    let f_in = restrict_field(source, omega)?;
    let mut solution_norm = 0.0;
    let mut data_norm = 0.0;
    for t in p.terms() {
        solution_norm += sobolev_norm(u, t.order())?;
        data_norm += sobolev_norm(&f_in, -t.order())?;
    }
    data_norm += sobolev_norm(exterior, p.top_order())?;
    let ratio = if data_norm > 0.0 {
        solution_norm / data_norm
    } else {
        0.0
    };
    Ok(BoundReport {
        solution_norm,
        data_norm,
        ratio,
    })
}
