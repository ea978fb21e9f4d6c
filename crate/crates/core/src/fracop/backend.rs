use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::dense::{check_psd, spectral_power, SelfAdjointOperator};
use super::AnisotropyMatrix;
use crate::error::{Error, Result};
use crate::lattice::{forward_transform, inverse_transform, Grid, GridField};

#[derive(Debug, Clone)]
pub enum BackendKind {
    /// Exact multiplier `(ξᵀγξ)^σ` on the lattice plane waves, constant `γ`.
    FourierSymbol { grid: Grid, gamma: AnisotropyMatrix },
    /// `Σ λ_j^σ v_j v_jᵀ` over an assembled self-adjoint operator.
    MatrixFunction { base: Arc<SelfAdjointOperator> },
}

/// One realization of `(−∇·γ∇)^σ`.
#[derive(Debug, Clone)]
pub struct FractionalBackend {
    kind: BackendKind,
    order: f64,
}

fn check_order(order: f64) -> Result<()> {
    if order >= 0.0 && order.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fractional order must be a finite non-negative number, got {order}"
        )))
    }
}

impl FractionalBackend {
    /// Order 0 is accepted and acts as the identity (probe operators use it).
    pub fn fourier(grid: Grid, gamma: AnisotropyMatrix, order: f64) -> Result<Self> {
        check_order(order)?;
        if gamma.dim() != grid.dim() {
            return Err(Error::InvalidArgument("anisotropy dimension differs from the grid".into()));
        }
        Ok(FractionalBackend {
            kind: BackendKind::FourierSymbol { grid, gamma },
            order,
        })
    }

    /// Fourier backend of the isotropic fractional Laplacian.
    pub fn isotropic(grid: Grid, order: f64) -> Result<Self> {
        Self::fourier(grid, AnisotropyMatrix::identity(grid.dim()), order)
    }

    pub fn matrix_function(base: Arc<SelfAdjointOperator>, order: f64) -> Result<Self> {
        check_order(order)?;
        check_psd(&base)?;
        Ok(FractionalBackend {
            kind: BackendKind::MatrixFunction { base },
            order,
        })
    }

    /// Same realization, different order; the cached eigenbasis is shared.
    pub fn with_order(&self, order: f64) -> Result<Self> {
        check_order(order)?;
        Ok(FractionalBackend {
            kind: self.kind.clone(),
            order,
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn kind(&self) -> &BackendKind {
        &self.kind
    }

    pub fn grid(&self) -> Grid {
        match &self.kind {
            BackendKind::FourierSymbol { grid, .. } => *grid,
            BackendKind::MatrixFunction { base } => base.grid(),
        }
    }

    /// Constant anisotropy of a Fourier backend.
    pub fn gamma(&self) -> Option<AnisotropyMatrix> {
        match &self.kind {
            BackendKind::FourierSymbol { gamma, .. } => Some(*gamma),
            BackendKind::MatrixFunction { .. } => None,
        }
    }

    /// `(ξᵀγξ)^σ` for the Fourier backend.
    pub fn symbol(&self, xi: [f64; 2]) -> Option<f64> {
        self.gamma().map(|g| g.quadratic_form(xi).powf(self.order))
    }

    /// Columns `b` / rows `a` of the discrete operator restricted to `nodes`:
    /// entry `(a, b)` is `((−Δ_γ)^σ δ_b)(a)`.
    pub fn block(&self, nodes: &[usize]) -> Result<DMatrix<f64>> {
        let grid = self.grid();
        match &self.kind {
            BackendKind::FourierSymbol { .. } => {
                // translation invariance: every column is a shift of the response to δ₀
                let mut delta = vec![0.0; grid.len()];
                delta[0] = 1.0;
                let kernel = apply_fractional(self, &GridField::from_values(grid, delta)?)?;
                let k = kernel.values();
                let n = grid.points_per_axis();
                Ok(DMatrix::from_fn(nodes.len(), nodes.len(), |r, c| {
                    let ia = grid.node_indices(nodes[r]);
                    let ib = grid.node_indices(nodes[c]);
                    k[grid.flat_index([(ia[0] + n - ib[0]) % n, (ia[1] + n - ib[1]) % n])]
                }))
            }
            BackendKind::MatrixFunction { base } => {
                let mut slot = vec![usize::MAX; grid.len()];
                for (k, &d) in base.dofs().iter().enumerate() {
                    slot[d] = k;
                }
                if nodes.iter().any(|&n| slot[n] == usize::MAX) {
                    return Err(Error::InvalidOperator(
                        "block requested on nodes outside the operator's degrees of freedom".into(),
                    ));
                }
                let eig = base.eigen();
                let top = base.max_eigenvalue();
                let powers: Vec<f64> = eig
                    .values
                    .iter()
                    .map(|&l| spectral_power(l, top, self.order))
                    .collect();
                let v = &*eig.vectors;
                let rows = DMatrix::from_fn(nodes.len(), v.ncols(), |r, j| v[(slot[nodes[r]], j)]);
                let scaled = DMatrix::from_fn(nodes.len(), v.ncols(), |r, j| rows[(r, j)] * powers[j]);
                Ok(scaled * rows.transpose())
            }
        }
    }
}

/// Discrete `(−Δ_γ)^σ u`.
pub fn apply_fractional(backend: &FractionalBackend, u: &GridField) -> Result<GridField> {
    let grid = backend.grid();
    grid.ensure_same(&u.grid(), "fractional operator input")?;
    u.ensure_finite("fractional operator input")?;
    match &backend.kind {
        BackendKind::FourierSymbol { gamma, .. } => {
            let mut spec = forward_transform(u);
            for (idx, c) in spec.coefficients_mut().iter_mut().enumerate() {
                *c *= gamma.quadratic_form(grid.frequency_vector(idx)).powf(backend.order);
            }
            Ok(inverse_transform(&spec))
        }
        BackendKind::MatrixFunction { base } => {
            let eig = base.eigen();
            let top = base.max_eigenvalue();
            let v = &*eig.vectors;
            let dofs = base.dofs();
            let apply_real = |values: &[f64]| -> Vec<f64> {
                let x = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| values[d]));
                let mut w = v.tr_mul(&x);
                for (wj, &l) in w.iter_mut().zip(&eig.values) {
                    *wj *= spectral_power(l, top, backend.order);
                }
                let y = v * w;
                let mut out = vec![0.0; grid.len()];
                for (&d, val) in dofs.iter().zip(y.iter()) {
                    out[d] = *val;
                }
                out
            };
            let re = apply_real(u.values());
            match u.imag() {
                None => GridField::from_values(grid, re),
                Some(im) => GridField::from_complex(grid, re, apply_real(im)),
            }
        }
    }
}

/// `⟨(−Δ_γ)^{σ/2} u, (−Δ_γ)^{σ/2} v⟩` under nodal quadrature.
pub fn half_power_form(backend: &FractionalBackend, u: &GridField, v: &GridField) -> Result<f64> {
    u.grid().ensure_same(&v.grid(), "half power form")?;
    let half = backend.with_order(0.5 * backend.order)?;
    let hu = apply_fractional(&half, u)?;
    let hv = apply_fractional(&half, v)?;
    hu.dot(&hv)
}
