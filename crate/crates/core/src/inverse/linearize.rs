use crate::error::{Error, Result};
use crate::lattice::GridField;

/// Weights `c[k][i]` such that `Σ_i c[k][i] g(x_i) ≈ g^{(k)}(z)` for every
/// `k ≤ max_order`, exact for polynomials of degree `< x.len()`.
pub fn finite_difference_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Estimate of `∂_ε^ℓ u|_{ε=0}` from solutions at several amplitudes.
///
/// The weights interpolate through every supplied point plus `(0, 0)`
/// (unless an `ε = 0` solution is supplied), which equals repeated
/// Richardson extrapolation of the central differences. A single pair `±ε`
/// gives the plain central difference.
pub fn linearize(solutions: &[(f64, GridField)], order: usize) -> Result<GridField> {
    if order == 0 {
        return Err(Error::Stencil("derivative order must be at least 1".into()));
    }
    let Some((_, first)) = solutions.first() else {
        return Err(Error::Stencil("no solutions supplied".into()));
    };
    let grid = first.grid();
    let mut points: Vec<(f64, Option<&GridField>)> = Vec::with_capacity(solutions.len() + 1);
    for (eps, u) in solutions {
        grid.ensure_same(&u.grid(), "linearization stencil")?;
        if !eps.is_finite() {
            return Err(Error::Stencil(format!("non-finite amplitude {eps}")));
        }
        if points.iter().any(|(e, _)| e == eps) {
            return Err(Error::Stencil(format!("amplitude {eps} supplied twice")));
        }
        points.push((*eps, Some(u)));
    }
    if !points.iter().any(|(e, _)| *e == 0.0) {
        points.push((0.0, None));
    }
    if points.len() < order + 1 {
        return Err(Error::Stencil(format!(
            "order {order} needs {} amplitudes including 0, got {}",
            order + 1,
            points.len()
        )));
    }
    points.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(a.0.total_cmp(&b.0)));
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let w = &finite_difference_weights(0.0, &xs, order)[order];
    let mut acc = vec![0.0; grid.len()];
    for ((_, u), &wi) in points.iter().zip(w) {
        if let Some(u) = u {
            for (a, v) in acc.iter_mut().zip(u.values()) {
                *a += wi * v;
            }
        }
    }
    GridField::from_values(grid, acc)
}
