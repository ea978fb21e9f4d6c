use super::{solve_linear, LinearProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::lattice::{restrict_field, GridField, Region};
use crate::polyop::{apply_poly, PolyFractionalOperator};

/// `f ↦ (P̃ u_f)|_Ω` where `u_f` solves the exterior problem for `P + q`.
pub fn dtn_apply(
    p: &PolyFractionalOperator,
    q: &GridField,
    probe: &PolyFractionalOperator,
    f: &GridField,
    omega: &Region,
    opts: &SolveOptions,
) -> Result<GridField> {
    if probe.top_order() > p.top_order() {
        return Err(Error::InvalidOperator(format!(
            "probe top order {} exceeds the forward top order {}",
            probe.top_order(),
            p.top_order()
        )));
    }
    p.grid().ensure_same(&probe.grid(), "probe operator")?;
    let prob = LinearProblem::new(p.clone(), q.clone(), f.clone(), omega.clone())?;
    let sol = solve_linear(&prob, opts)?;
    restrict_field(&apply_poly(probe, &sol.u)?, omega)
}

/// `⟨P u_f, g⟩ + (q u_f, g)_Ω` under nodal quadrature.
pub fn dtn_pairing(
    p: &PolyFractionalOperator,
    q: &GridField,
    f: &GridField,
    g: &GridField,
    omega: &Region,
    opts: &SolveOptions,
) -> Result<f64> {
    let prob = LinearProblem::new(p.clone(), q.clone(), f.clone(), omega.clone())?;
    let u = solve_linear(&prob, opts)?.u;
    let qu = restrict_field(&u.mul_pointwise(q)?, omega)?;
    Ok(apply_poly(p, &u)?.dot(g)? + qu.dot(g)?)
}
