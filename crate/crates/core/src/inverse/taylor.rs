use super::{linearize, EffectiveSet, RecoveryReport};
use crate::error::{Error, Result};
use crate::lattice::{GridField, Region};
use crate::polyop::{apply_poly, PolyFractionalOperator};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Incomplete Bell polynomial `B_{n,k}(x_1, …, x_{n−k+1})`; `xs[0]` is `x_1`.
pub fn bell_polynomial(n: usize, k: usize, xs: &[f64]) -> f64 {
    // table[m][j] = B_{m,j}
    let mut table = vec![vec![0.0; k + 1]; n + 1];
    table[0][0] = 1.0;
    for m in 1..=n {
        for j in 1..=k.min(m) {
            let mut s = 0.0;
            for i in 1..=(m - j + 1) {
                if let Some(&x) = xs.get(i - 1) {
                    s += binomial(m - 1, i - 1) * x * table[m - i][j - 1];
                }
            }
            table[m][j] = s;
        }
    }
    table[n][k]
}

/// Taylor coefficient recovery from known linearizations.
///
/// `derivatives[ℓ−1]` is `u^(ℓ) = ∂_ε^ℓ u|_{ε=0}` for the data family `εf`.
/// Differentiating `P u_ε + Σ_k F^(k) u_ε^k/k! = 0` ℓ times at `ε = 0` gives
/// `P u^(ℓ) + Σ_{k=1}^{ℓ} F^(k) B_{ℓ,k}(u^(1), …) = 0`, solved for `F^(ℓ)`
/// on `{|u^(1)|^ℓ > τ max |u^(1)|^ℓ}`. When `u_full` (the solution for `f`
/// itself) is given, `F^(0)` is recovered last from the full equation.
/// Returned reports are indexed by ℓ; entry 0 is present only with `u_full`.
pub fn recover_taylor_from_derivatives(
    p: &PolyFractionalOperator,
    derivatives: &[GridField],
    u_full: Option<&GridField>,
    omega: &Region,
    tau: f64,
) -> Result<Vec<RecoveryReport>> {
    let grid = p.grid();
    let order = derivatives.len();
    let mut reports: Vec<RecoveryReport> = Vec::with_capacity(order + 1);
    let mut coeffs: Vec<GridField> = Vec::with_capacity(order);
    for l in 1..=order {
        let u1 = &derivatives[0];
        let power = u1.map(|v| v.powi(l as i32));
        let set = EffectiveSet::new(&power, omega, tau, &format!("u1^{l}"))?;
        let pu = apply_poly(p, &derivatives[l - 1])?;
        let mut est = vec![0.0; grid.len()];
        let mut xs = vec![0.0; l];
        for i in set.region.nodes() {
            for (slot, d) in xs.iter_mut().zip(derivatives) {
                *slot = d.values()[i];
            }
            let mut num = pu.values()[i];
            for (k, fk) in coeffs.iter().enumerate() {
                num += fk.values()[i] * bell_polynomial(l, k + 1, &xs);
            }
            est[i] = -num / power.values()[i];
        }
        let field = GridField::from_values(grid, est)?;
        coeffs.push(field.clone());
        reports.push(RecoveryReport::new(field, set, omega));
    }
    if let Some(u) = u_full {
        let set = match reports.last() {
            Some(r) => r.effective.clone(),
            None => EffectiveSet::whole(omega, "omega")?,
        };
        let pu = apply_poly(p, u)?;
        let mut est = vec![0.0; grid.len()];
        for i in set.region.nodes() {
            let ui = u.values()[i];
            let mut s = pu.values()[i];
            let mut power = 1.0;
            for (k, fk) in coeffs.iter().enumerate() {
                power *= ui / (k + 1) as f64;
                s += fk.values()[i] * power;
            }
            est[i] = -s;
        }
        reports.insert(0, RecoveryReport::new(GridField::from_values(grid, est)?, set, omega));
    }
    Ok(reports)
}

/// Full pipeline: query the forward model at `±ε·f1` for every `ε` in the
/// schedule and at `f1`, estimate `u^(1..L)` by [`linearize`], then recover
/// `F^(0..L)`. Reports are indexed by ℓ = 0..=L.
pub fn recover_taylor(
    p: &PolyFractionalOperator,
    f1: &GridField,
    order: usize,
    omega: &Region,
    eps_schedule: &[f64],
    tau: f64,
    mut forward: impl FnMut(&GridField) -> Result<GridField>,
) -> Result<Vec<RecoveryReport>> {
    let u_full = forward(f1)?;
    if order == 0 {
        return recover_taylor_from_derivatives(p, &[], Some(&u_full), omega, tau);
    }
    if eps_schedule.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Stencil("amplitude schedule entries must be positive".into()));
    }
    let mut solutions = Vec::with_capacity(2 * eps_schedule.len());
    for &eps in eps_schedule {
        for e in [eps, -eps] {
            solutions.push((e, forward(&f1.scale(e))?));
        }
    }
    let derivatives = (1..=order)
        .map(|l| linearize(&solutions, l))
        .collect::<Result<Vec<_>>>()?;
    recover_taylor_from_derivatives(p, &derivatives, Some(&u_full), omega, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_polynomials_small_cases() {
        let x = [2.0, 3.0, 5.0, 7.0];
        // B_{n,n} = x1^n, B_{n,1} = x_n
        assert_eq!(bell_polynomial(3, 3, &x), 8.0);
        assert_eq!(bell_polynomial(4, 1, &x), 7.0);
        // B_{3,2} = 3 x1 x2
        assert_eq!(bell_polynomial(3, 2, &x), 18.0);
        // B_{4,2} = 4 x1 x3 + 3 x2²
        assert_eq!(bell_polynomial(4, 2, &x), 4.0 * 2.0 * 5.0 + 3.0 * 9.0);
        assert_eq!(bell_polynomial(0, 0, &x), 1.0);
        assert_eq!(bell_polynomial(2, 0, &x), 0.0);
    }
}
