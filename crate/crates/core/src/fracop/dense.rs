use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::AnisotropyField;
use crate::error::{Error, Result};
use crate::lattice::{forward_transform, inverse_transform, Grid, GridField};

/// Dense matrices above this many unknowns are refused.
pub const DEFAULT_DOF_CAP: usize = 4096;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest are treated as exact zeros.
pub const ZERO_EIGENVALUE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Nodes with any lattice index equal to 0 (the box rim) are pinned to zero.
    DirichletOnBox,
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Arc<DMatrix<f64>>,
}

/// Dense symmetric matrix over a set of lattice nodes, with a lazily
/// computed and cached eigendecomposition.
#[derive(Debug)]
pub struct SelfAdjointOperator {
    grid: Grid,
    dofs: Vec<usize>,
    matrix: DMatrix<f64>,
    eigen: OnceLock<Eigen>,
}

impl SelfAdjointOperator {
    /// Validates near-symmetry, then stores `(A + Aᵀ)/2`.
    pub fn new(grid: Grid, dofs: Vec<usize>, matrix: DMatrix<f64>) -> Result<Self> {
        let n = dofs.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, expected {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if dofs.iter().any(|&d| d >= grid.len()) {
            return Err(Error::InvalidOperator("degree of freedom outside the grid".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("self-adjoint operator"));
        }
        let scale = matrix.amax();
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidOperator(format!(
                "matrix is not symmetric: ‖A−Aᵀ‖ = {asym:e}, ‖A‖ = {scale:e}"
            )));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(SelfAdjointOperator {
            grid,
            dofs,
            matrix,
            eigen: OnceLock::new(),
        })
    }

    fn with_eigen(grid: Grid, dofs: Vec<usize>, eigen: Eigen) -> Self {
        let v = &*eigen.vectors;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * eigen.values[j]);
        let m = &scaled * v.transpose();
        let matrix = (&m + m.transpose()) * 0.5;
        let cell = OnceLock::new();
        let _ = cell.set(eigen);
        SelfAdjointOperator {
            grid,
            dofs,
            matrix,
            eigen: cell,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Lattice node of every row/column.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigen(&self) -> &Eigen {
        self.eigen.get_or_init(|| sorted_eigen(self.matrix.clone()))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().values.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values.first().copied().unwrap_or(0.0)
    }

    /// `A u`, reading `u` on the degrees of freedom and writing zero elsewhere.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.grid.ensure_same(&u.grid(), "operator application")?;
        let x = DVector::from_iterator(self.dofs.len(), self.dofs.iter().map(|&d| u.values()[d]));
        let y = &self.matrix * x;
        let mut out = vec![0.0; self.grid.len()];
        for (&d, v) in self.dofs.iter().zip(y.iter()) {
            out[d] = *v;
        }
        GridField::from_values(self.grid, out)
    }

    /// Debug dump of the dense matrix as CSV rows.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.matrix)
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub(crate) fn sorted_eigen(matrix: DMatrix<f64>) -> Eigen {
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Eigen {
        values,
        vectors: Arc::new(vectors),
    }
}

/// `λ^σ` with the zero-clamping convention: tiny or slightly negative
/// eigenvalues count as 0, `0^σ = 0` for `σ > 0`, and `σ = 0` is the identity.
pub(crate) fn spectral_power(lambda: f64, lambda_max: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    if lambda < ZERO_EIGENVALUE_RATIO * lambda_max {
        0.0
    } else {
        lambda.powf(sigma)
    }
}

pub(crate) fn check_psd(op: &SelfAdjointOperator) -> Result<()> {
    let eig = op.eigen();
    let lo = eig.values.first().copied().unwrap_or(0.0);
    let hi = eig.values.last().copied().unwrap_or(0.0);
    if lo < -PSD_TOL * hi.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidOperator(format!(
            "base operator is not positive semidefinite (min eigenvalue {lo:e}, max {hi:e})"
        )));
    }
    Ok(())
}

/// Second-order conservative finite-difference discretization of `−∇·γ(x)∇`.
pub fn assemble_elliptic(
    grid: Grid,
    gamma: &AnisotropyField,
    boundary: Boundary,
) -> Result<SelfAdjointOperator> {
    assemble_elliptic_with_cap(grid, gamma, boundary, DEFAULT_DOF_CAP)
}

pub fn assemble_elliptic_with_cap(
    grid: Grid,
    gamma: &AnisotropyField,
    boundary: Boundary,
    cap: usize,
) -> Result<SelfAdjointOperator> {
    grid.ensure_same(&gamma.grid(), "anisotropy field")?;
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let on_rim = |node: usize| {
        boundary == Boundary::DirichletOnBox && grid.node_indices(node)[..dim].contains(&0)
    };
    let dofs: Vec<usize> = (0..grid.len()).filter(|&i| !on_rim(i)).collect();
    if dofs.len() > cap {
        return Err(Error::DofCapExceeded {
            dofs: dofs.len(),
            cap,
        });
    }
    let mut slot = vec![usize::MAX; grid.len()];
    for (k, &d) in dofs.iter().enumerate() {
        slot[d] = k;
    }
    let shift = |node: usize, axis: usize, step: isize| -> usize {
        let mut idx = grid.node_indices(node);
        idx[axis] = ((idx[axis] as isize + step).rem_euclid(n as isize)) as usize;
        grid.flat_index(idx)
    };
    let h2 = grid.spacing() * grid.spacing();
    let mut a = DMatrix::<f64>::zeros(dofs.len(), dofs.len());
    let mut add = |row: usize, col: usize, v: f64| {
        let (r, c) = (slot[row], slot[col]);
        if r != usize::MAX && c != usize::MAX {
            a[(r, c)] += v;
        }
    };

    for node in 0..grid.len() {
        for axis in 0..dim {
            // flux through the face between `node` and its + neighbour
            let next = shift(node, axis, 1);
            let g = 0.5 * (gamma.at(node).entry(axis, axis) + gamma.at(next).entry(axis, axis)) / h2;
            add(node, node, g);
            add(next, next, g);
            add(node, next, -g);
            add(next, node, -g);
        }
    }

    if dim == 2 {
        // −D_x(γ₁₂ D_y u) − D_y(γ₁₂ D_x u) with centred differences
        let w = 1.0 / (4.0 * h2);
        for node in 0..grid.len() {
            for (outer, inner) in [(0usize, 1usize), (1, 0)] {
                for so in [1isize, -1] {
                    let mid = shift(node, outer, so);
                    let g = gamma.at(mid).entry(0, 1);
                    for si in [1isize, -1] {
                        let col = shift(mid, inner, si);
                        add(node, col, -(so as f64) * (si as f64) * g * w);
                    }
                }
            }
        }
    }

    SelfAdjointOperator::new(grid, dofs, a)
}

/// `base^σ` by functional calculus on the cached eigendecomposition.
pub fn fractional_power(base: &SelfAdjointOperator, sigma: f64) -> Result<SelfAdjointOperator> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("fractional order must be positive, got {sigma}")));
    }
    check_psd(base)?;
    let eig = base.eigen();
    let top = base.max_eigenvalue();
    let values = eig
        .values
        .iter()
        .map(|&l| spectral_power(l, top, sigma))
        .collect();
    Ok(SelfAdjointOperator::with_eigen(
        base.grid,
        base.dofs.clone(),
        Eigen {
            values,
            vectors: Arc::clone(&eig.vectors),
        },
    ))
}

/// Real circulant matrix whose eigenvalue on every lattice plane wave is
/// `symbol(ξ)`: the exact discrete realization of a Fourier multiplier.
pub fn circulant_from_symbol(
    grid: Grid,
    symbol: impl Fn([f64; 2]) -> f64,
) -> Result<SelfAdjointOperator> {
    let len = grid.len();
    if len > DEFAULT_DOF_CAP {
        return Err(Error::DofCapExceeded {
            dofs: len,
            cap: DEFAULT_DOF_CAP,
        });
    }
    let mut delta = vec![0.0; len];
    delta[0] = 1.0;
    let mut spec = forward_transform(&GridField::from_values(grid, delta)?);
    for (idx, c) in spec.coefficients_mut().iter_mut().enumerate() {
        *c *= symbol(grid.frequency_vector(idx));
    }
    let kernel = inverse_transform(&spec).into_values();
    let n = grid.points_per_axis();
    let m = DMatrix::from_fn(len, len, |a, b| {
        let ia = grid.node_indices(a);
        let ib = grid.node_indices(b);
        let d = [(ia[0] + n - ib[0]) % n, (ia[1] + n - ib[1]) % n];
        kernel[grid.flat_index(d)]
    });
    SelfAdjointOperator::new(grid, (0..len).collect(), m)
}
