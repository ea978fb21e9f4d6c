//! Single anisotropic fractional Laplacian `(−∇·γ∇)^σ`, `σ ≥ 0`.
//!
//! Two realizations share one interface, [`FractionalBackend`]:
//! an exact Fourier multiplier for constant `γ`, and functional calculus
//! `λ ↦ λ^σ` on the eigendecomposition of an assembled dense operator.
//! Eigenvalues below `1e-12·λ_max` are treated as zero.

mod anisotropy;
mod backend;
mod dense;

pub use anisotropy::{AnisotropyField, AnisotropyMatrix};
pub use backend::{apply_fractional, half_power_form, BackendKind, FractionalBackend};
pub use dense::{
    assemble_elliptic, assemble_elliptic_with_cap, circulant_from_symbol, fractional_power,
    matrix_to_csv, Boundary, Eigen, SelfAdjointOperator, DEFAULT_DOF_CAP, ZERO_EIGENVALUE_RATIO,
};
