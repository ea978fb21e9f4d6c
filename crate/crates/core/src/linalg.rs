//! Dense Krylov solvers used by the exterior solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct KrylovOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// `‖A‖_∞`, the largest absolute row sum.
pub(crate) fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Relative residual test `‖b − Ax‖_∞ ≤ tol·‖b‖_∞`, floored at the
/// rounding level `ROUNDING_FLOOR·ε·(‖A‖_∞‖x‖_∞ + ‖b‖_∞)` of one matvec so
/// that tiny tolerances stay attainable.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Criterion {
    tol: f64,
    a_norm: f64,
    b_norm: f64,
}

const ROUNDING_FLOOR: f64 = 32.0;

impl Criterion {
    pub(crate) fn new(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Self {
        Criterion {
            tol,
            a_norm: inf_norm(a),
            b_norm: max_norm(b),
        }
    }

    pub(crate) fn target(&self, x: &DVector<f64>) -> f64 {
        let floor = ROUNDING_FLOOR * f64::EPSILON * (self.a_norm * max_norm(x) + self.b_norm);
        (self.tol * self.b_norm).max(floor)
    }

    /// `‖r‖_∞ / (‖A‖_∞‖x‖_∞ + ‖b‖_∞)`.
    pub(crate) fn backward_error(&self, r: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let denom = self.a_norm * max_norm(x) + self.b_norm;
        if denom == 0.0 {
            0.0
        } else {
            max_norm(r) / denom
        }
    }
}

/// Conjugate gradients for symmetric positive definite `a`. Converged when
/// the true residual passes [`Criterion`]; the recursive residual is
/// replaced by the true one whenever they disagree.
pub(crate) fn conjugate_gradient(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let crit = Criterion::new(a, b, tol);
    let mut x = DVector::zeros(n);
    if max_norm(b) == 0.0 {
        return Ok(KrylovOutcome { x, iterations: 0 });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut iterations = 0;
    while iterations < max_iter {
        let ap = a * &p;
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!(
                "conjugate gradients met non-positive curvature {pap:e}"
            )));
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        iterations += 1;
        if max_norm(&r) <= crit.target(&x) {
            let true_r = b - a * &x;
            if max_norm(&true_r) <= crit.target(&x) {
                return Ok(KrylovOutcome { x, iterations });
            }
            // drifted: restart from the current iterate
            r = true_r;
            rr = r.dot(&r);
            p = r.clone();
            continue;
        }
        let rr_new = r.dot(&r);
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    let residual = max_norm(&(b - a * &x));
    if residual <= crit.target(&x) {
        return Ok(KrylovOutcome { x, iterations });
    }
    Err(Error::NotConverged {
        method: "conjugate gradients",
        iterations,
        residual,
    })
}

/// Full (unrestarted) GMRES with modified Gram–Schmidt and Givens rotations.
/// The Arnoldi cycle is repeated from the current iterate if the true residual
/// has not yet passed [`Criterion`] once the Krylov space saturates.
pub(crate) fn gmres(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let crit = Criterion::new(a, b, tol);
    let mut x = DVector::zeros(n);
    if max_norm(b) == 0.0 {
        return Ok(KrylovOutcome { x, iterations: 0 });
    }
    let mut iterations = 0;
    while iterations < max_iter {
        let r = b - a * &x;
        let target = crit.target(&x);
        if max_norm(&r) <= target {
            return Ok(KrylovOutcome { x, iterations });
        }
        let beta = r.norm();
        let m = n.min(max_iter - iterations);
        let mut basis: Vec<DVector<f64>> = vec![r / beta];
        let mut hess = DMatrix::<f64>::zeros(m + 1, m);
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = DVector::<f64>::zeros(m + 1);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = a * &basis[k];
            for (j, v) in basis.iter().enumerate() {
                let hjk = w.dot(v);
                hess[(j, k)] = hjk;
                w.axpy(-hjk, v, 1.0);
            }
            let hnext = w.norm();
            hess[(k + 1, k)] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[(j, k)] + sn[j] * hess[(j + 1, k)];
                hess[(j + 1, k)] = -sn[j] * hess[(j, k)] + cs[j] * hess[(j + 1, k)];
                hess[(j, k)] = t;
            }
            let denom = hess[(k, k)].hypot(hess[(k + 1, k)]);
            if denom == 0.0 {
                return Err(Error::Singular("GMRES breakdown on a singular system".into()));
            }
            cs[k] = hess[(k, k)] / denom;
            sn[k] = hess[(k + 1, k)] / denom;
            hess[(k, k)] = denom;
            hess[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            iterations += 1;
            // ‖r‖_∞ ≤ ‖r‖_2 = |g_{k+1}|
            if g[k + 1].abs() <= target || hnext <= 1e-14 * beta {
                break;
            }
            basis.push(w / hnext);
        }
        let mut y = DVector::<f64>::zeros(k_used);
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[(i, j)] * y[j];
            }
            y[i] = s / hess[(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            x.axpy(*yj, &basis[j], 1.0);
        }
    }
    let residual = max_norm(&(b - a * &x));
    if residual <= crit.target(&x) {
        return Ok(KrylovOutcome { x, iterations });
    }
    Err(Error::NotConverged {
        method: "GMRES",
        iterations,
        residual,
    })
}

/// LU with partial pivoting.
pub(crate) fn direct_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization found a zero pivot".into()))
}

pub(crate) fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).amax() <= rel_tol * a.amax()
}

pub(crate) fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
