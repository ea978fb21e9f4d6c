use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Solution, SolverTag};
use crate::error::{Error, Result};
use crate::lattice::{embed_values, restrict_field, Grid, GridField, Region};
use crate::linalg::{self, Criterion};
use crate::polyop::{apply_poly, interior_matrix, PolyFractionalOperator};

/// Iterates beyond this magnitude abort the Newton iteration.
const BLOWUP: f64 = 1e6;
const MAX_HALVINGS: usize = 30;

/// `F(x, u) = Σ_ℓ F^(ℓ)(x) u^ℓ / ℓ!`.
#[derive(Debug, Clone)]
pub struct TaylorSource {
    coeffs: Vec<GridField>,
}

impl TaylorSource {
    /// `coeffs[ℓ]` is `F^(ℓ)`.
    pub fn new(coeffs: Vec<GridField>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidArgument("Taylor source needs at least F^(0)".into()));
        };
        for c in &coeffs {
            first.grid().ensure_same(&c.grid(), "Taylor coefficients")?;
            c.ensure_finite("Taylor coefficient")?;
        }
        Ok(TaylorSource { coeffs })
    }

    /// Only `F^(ℓ) = value` non-zero, constant in space.
    pub fn monomial(grid: Grid, order: usize, value: f64) -> Self {
        let mut coeffs = vec![GridField::zeros(grid); order + 1];
        coeffs[order] = GridField::constant(grid, value);
        TaylorSource { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn grid(&self) -> Grid {
        self.coeffs[0].grid()
    }

    pub fn coefficients(&self) -> &[GridField] {
        &self.coeffs
    }

    fn value_at(&self, node: usize, u: f64) -> f64 {
        // Horner form; dividing by ℓ+1 at each level builds the factorials
        let mut acc = 0.0;
        for l in (0..self.coeffs.len()).rev() {
            acc = acc * u / ((l + 1) as f64) + self.coeffs[l].values()[node];
        }
        acc
    }

    fn derivative_at(&self, node: usize, u: f64) -> f64 {
        let mut acc = 0.0;
        for l in (1..self.coeffs.len()).rev() {
            acc = acc * u / (l as f64) + self.coeffs[l].values()[node];
        }
        acc
    }

    /// `F(x, u(x))` on every node.
    pub fn evaluate(&self, u: &GridField) -> Result<GridField> {
        self.grid().ensure_same(&u.grid(), "Taylor source evaluation")?;
        let vals = u.values().iter().enumerate().map(|(i, &v)| self.value_at(i, v)).collect();
        GridField::from_values(self.grid(), vals)
    }

    /// `∂_u F(x, u(x))` on every node.
    pub fn derivative(&self, u: &GridField) -> Result<GridField> {
        self.grid().ensure_same(&u.grid(), "Taylor source derivative")?;
        let vals = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| self.derivative_at(i, v))
            .collect();
        GridField::from_values(self.grid(), vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target for `max_Ω |P u + F(x, u)|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step length of the halving line search.
    pub damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 30,
            damping: 1.0,
        }
    }
}

/// `P u + F(x, u) = 0` in Ω, `u = f` in Ω^c.
#[derive(Debug, Clone)]
pub struct SemilinearProblem {
    pub operator: PolyFractionalOperator,
    pub source: TaylorSource,
    pub exterior: GridField,
    pub omega: Region,
    pub newton: NewtonOptions,
}

impl SemilinearProblem {
    pub fn new(
        operator: PolyFractionalOperator,
        source: TaylorSource,
        exterior: GridField,
        omega: Region,
        newton: NewtonOptions,
    ) -> Result<Self> {
        let grid = operator.grid();
        grid.ensure_same(&source.grid(), "Taylor source")?;
        grid.ensure_same(&exterior.grid(), "exterior data")?;
        grid.ensure_same(&omega.grid(), "omega")?;
        if !(newton.tol > 0.0) || !(newton.damping > 0.0 && newton.damping <= 1.0) {
            return Err(Error::InvalidArgument(
                "Newton tolerance must be positive and damping in (0, 1]".into(),
            ));
        }
        Ok(SemilinearProblem {
            operator,
            source,
            exterior,
            omega,
            newton,
        })
    }
}

struct Interior<'a> {
    k: &'a DMatrix<f64>,
    lift: &'a DVector<f64>,
    source: &'a TaylorSource,
    nodes: &'a [usize],
}

impl Interior<'_> {
    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = self.k * x + self.lift;
        for (i, &node) in self.nodes.iter().enumerate() {
            r[i] += self.source.value_at(node, x[i]);
        }
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = self.k.clone();
        for (i, &node) in self.nodes.iter().enumerate() {
            j[(i, i)] += self.source.derivative_at(node, x[i]);
        }
        j
    }
}

fn check_blowup(x: &DVector<f64>, history: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
        return Err(Error::NewtonDiverged {
            iterations: history.len().saturating_sub(1),
            history: history.to_vec(),
        });
    }
    Ok(())
}

/// Newton's method from `u = f` (zero in Ω) with a halving line search on
/// the interior residual max-norm.
pub fn solve_semilinear(prob: &SemilinearProblem) -> Result<Solution> {
    let p = &prob.operator;
    let grid = p.grid();
    let omega = &prob.omega;
    prob.exterior.ensure_finite("exterior data")?;
    let k = interior_matrix(p, &GridField::zeros(grid), omega)?;
    let nodes = k.nodes().to_vec();
    let e = restrict_field(&prob.exterior.real_part(), &omega.complement())?;
    let lift = DVector::from_vec(omega.gather(&apply_poly(p, &e)?)?);
    let sys = Interior {
        k: k.matrix(),
        lift: &lift,
        source: &prob.source,
        nodes: &nodes,
    };
    let opts = prob.newton;

    let mut x = DVector::<f64>::zeros(nodes.len());
    let mut r = sys.residual(&x);
    let mut history = vec![r.amax()];
    let mut backward_error = 0.0;
    let mut steps = 0;
    while r.amax() > opts.tol {
        if steps == opts.max_iter {
            return Err(Error::NewtonDiverged {
                iterations: steps,
                history,
            });
        }
        let j = sys.jacobian(&x);
        let delta = linalg::direct_solve(&j, &(-&r))?;
        backward_error = Criterion::new(&j, &r, 0.0).backward_error(&(&j * &delta + &r), &delta);
        let current = r.amax();
        let mut step = opts.damping;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &x + &delta * step;
            check_blowup(&trial, &history)?;
            let rt = sys.residual(&trial);
            if rt.amax() < current {
                accepted = Some((trial, rt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, rn)) = accepted else {
            return Err(Error::NewtonDiverged {
                iterations: steps,
                history,
            });
        };
        x = xn;
        r = rn;
        steps += 1;
        history.push(r.amax());
    }

    let u = e.add(&embed_values(x.as_slice(), omega)?)?;
    let full = apply_poly(p, &u)?.add(&prob.source.evaluate(&u)?)?;
    let residual_interior = omega.gather(&full)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Solution {
        u,
        residual_interior,
        backward_error,
        iterations: steps,
        solver_tag: SolverTag::Direct,
        bound_report: None,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    #[test]
    fn taylor_evaluation_rules() {
        let grid = make_grid(1, 1.0, 8).unwrap();
        let c = |v: f64| GridField::constant(grid, v);
        let src = TaylorSource::new(vec![c(0.5), c(2.0), c(3.0), c(6.0)]).unwrap();
        let u = c(0.1);
        // 0.5 + 2u + 3u²/2 + 6u³/6
        let expect = 0.5 + 0.2 + 1.5 * 0.01 + 0.001;
        assert!((src.evaluate(&u).unwrap().values()[3] - expect).abs() < 1e-15);
        // 2 + 3u + 3u²
        let dexpect = 2.0 + 0.3 + 3.0 * 0.01;
        assert!((src.derivative(&u).unwrap().values()[3] - dexpect).abs() < 1e-15);
        let zero = GridField::zeros(grid);
        assert_eq!(src.evaluate(&zero).unwrap().values()[0], 0.5);
        assert_eq!(src.derivative(&zero).unwrap().values()[0], 2.0);
    }
}
