//! Numerical laboratory for poly-fractional exterior value problems
//! `Σ α_i(x)(−∇·γ_i∇)^{s_i} u + q u = 0` in Ω, `u = f` in Ω^c, posed on a
//! periodic lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: grids, fields, discrete Fourier transforms, regions.
//! * [`fracop`]: a single anisotropic fractional Laplacian, realised either
//!   through its Fourier symbol or by functional calculus on a dense matrix.
//! * [`polyop`]: sums of such terms, interior Galerkin matrices, and the
//!   admissibility checker.
//! * [`solver`]: linear and semilinear exterior solves, DtN measurements.
//! * [`inverse`]: pointwise recovery of potentials, coefficients and
//!   Taylor coefficients of a semilinear source from a single solution.
//! * [`ucp`]: discrete non-degeneracy probes and inequality constants.
//! * [`harness`]: scenario files, runs, persistence and plot data.

pub mod error;
pub mod fracop;
pub mod harness;
pub mod inverse;
pub mod lattice;
pub(crate) mod linalg;
pub mod polyop;
pub mod solver;
pub mod ucp;

pub use error::{Error, Result};
pub use lattice::{Grid, GridField, Region};
