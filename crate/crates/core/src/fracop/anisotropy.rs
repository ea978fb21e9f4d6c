use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Grid;

const SYMMETRY_TOL: f64 = 1e-14;
const SPECTRUM_SLACK: f64 = 1e-12;

/// Constant symmetric positive definite matrix `γ` with a validated
/// ellipticity constant `λ`: `λ|ξ|² ≤ ξᵀγξ ≤ λ⁻¹|ξ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyMatrix {
    dim: usize,
    entries: [f64; 4],
    ellipticity: f64,
}

impl AnisotropyMatrix {
    /// `entries` is row-major, `dim × dim`.
    pub fn new(dim: usize, entries: &[f64], ellipticity: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) || entries.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "anisotropy needs {} entries for dim {dim}",
                dim * dim
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("anisotropy matrix"));
        }
        if !(ellipticity > 0.0 && ellipticity <= 1.0) {
            return Err(Error::Ellipticity(format!(
                "ellipticity constant must lie in (0, 1], got {ellipticity}"
            )));
        }
        let mut m = [0.0; 4];
        if dim == 1 {
            m[0] = entries[0];
        } else {
            if (entries[1] - entries[2]).abs() > SYMMETRY_TOL {
                return Err(Error::Ellipticity(format!(
                    "matrix is not symmetric: {} vs {}",
                    entries[1], entries[2]
                )));
            }
            m.copy_from_slice(entries);
        }
        let gamma = AnisotropyMatrix {
            dim,
            entries: m,
            ellipticity,
        };
        let [lo, hi] = gamma.eigenvalues();
        let slack = SPECTRUM_SLACK * hi.abs().max(1.0);
        if lo < ellipticity - slack || hi > 1.0 / ellipticity + slack {
            return Err(Error::Ellipticity(format!(
                "eigenvalues [{lo}, {hi}] outside [{ellipticity}, {}]",
                1.0 / ellipticity
            )));
        }
        Ok(gamma)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0).expect("identity is elliptic")
    }

    /// `c·I` with the tightest admissible ellipticity constant.
    pub fn scalar(dim: usize, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Ellipticity(format!("scalar anisotropy must be positive, got {c}")));
        }
        let entries: Vec<f64> = match dim {
            1 => vec![c],
            _ => vec![c, 0.0, 0.0, c],
        };
        Self::new(dim, &entries, c.min(1.0 / c))
    }

    /// Diagonal `diag(a, b)` in 2-D.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        let entries: Vec<f64> = match dim {
            1 => vec![values[0]],
            2 => vec![values[0], 0.0, 0.0, values[1]],
            _ => return Err(Error::InvalidArgument("diagonal needs 1 or 2 values".into())),
        };
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0, f64::max);
        Self::new(dim, &entries, lo.min(1.0 / hi).min(1.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.dim == 1 {
            self.entries[0]
        } else {
            self.entries[2 * i + j]
        }
    }

    /// Ascending eigenvalues (the second equals the first in 1-D).
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.entries[0], self.entries[0]];
        }
        let [a, b, _, d] = self.entries;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - radius, mean + radius]
    }

    /// `ξᵀγξ`.
    pub fn quadratic_form(&self, xi: [f64; 2]) -> f64 {
        if self.dim == 1 {
            self.entries[0] * xi[0] * xi[0]
        } else {
            let [a, b, _, d] = self.entries;
            a * xi[0] * xi[0] + 2.0 * b * xi[0] * xi[1] + d * xi[1] * xi[1]
        }
    }

    /// The factor `c` with `self = c·other`, if one exists (to 1e-12 relative).
    pub fn proportionality_to(&self, other: &AnisotropyMatrix) -> Option<f64> {
        if self.dim != other.dim {
            return None;
        }
        let n = self.dim * self.dim;
        let (pivot, _) = other.entries[..n]
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        let c = self.entries[pivot] / other.entries[pivot];
        let scale = self.entries[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ok = (0..n).all(|i| (self.entries[i] - c * other.entries[i]).abs() <= 1e-12 * scale);
        (ok && c > 0.0).then_some(c)
    }

    /// `Some(c)` when the matrix is `c·I`.
    pub fn as_scalar(&self) -> Option<f64> {
        self.proportionality_to(&AnisotropyMatrix::identity(self.dim))
    }
}

/// Per-node anisotropy `γ(x)` sharing one global ellipticity constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyField {
    grid: Grid,
    matrices: Vec<AnisotropyMatrix>,
    ellipticity: f64,
    smooth: bool,
}

impl AnisotropyField {
    pub fn constant(grid: Grid, gamma: AnisotropyMatrix) -> Result<Self> {
        if gamma.dim() != grid.dim() {
            return Err(Error::InvalidArgument("anisotropy dimension differs from the grid".into()));
        }
        Ok(AnisotropyField {
            grid,
            matrices: vec![gamma; grid.len()],
            ellipticity: gamma.ellipticity(),
            smooth: true,
        })
    }

    /// Samples `γ(x, y)` (row-major entries) at every node and validates each
    /// against the global `ellipticity`.
    pub fn from_fn(
        grid: Grid,
        ellipticity: f64,
        smooth: bool,
        f: impl Fn(f64, f64) -> Vec<f64>,
    ) -> Result<Self> {
        let matrices = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.node_coords(i);
                AnisotropyMatrix::new(grid.dim(), &f(x, y), ellipticity)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AnisotropyField {
            grid,
            matrices,
            ellipticity,
            smooth,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn at(&self, node: usize) -> &AnisotropyMatrix {
        &self.matrices[node]
    }

    /// The common matrix when `γ` does not vary.
    pub fn as_constant(&self) -> Option<AnisotropyMatrix> {
        let first = self.matrices[0];
        self.matrices.iter().all(|m| *m == first).then_some(first)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let e = (self.ellipticity * c.min(1.0 / c)).min(1.0);
        let matrices = self
            .matrices
            .iter()
            .map(|m| {
                let entries: Vec<f64> = (0..m.dim() * m.dim())
                    .map(|k| c * m.entry(k / m.dim(), k % m.dim()))
                    .collect();
                AnisotropyMatrix::new(m.dim(), &entries, e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AnisotropyField {
            grid: self.grid,
            matrices,
            ellipticity: e,
            smooth: self.smooth,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_symmetry_and_spectrum() {
        assert!(AnisotropyMatrix::new(2, &[2.0, 0.5, 0.5, 1.0], 0.4).is_ok());
        assert!(matches!(
            AnisotropyMatrix::new(2, &[2.0, 0.5, 0.4, 1.0], 0.4),
            Err(Error::Ellipticity(_))
        ));
        // eigenvalue 3 exceeds 1/0.4
        assert!(AnisotropyMatrix::new(2, &[3.0, 0.0, 0.0, 1.0], 0.4).is_err());
        assert!(AnisotropyMatrix::new(1, &[-1.0], 0.5).is_err());
    }

    #[test]
    fn proportionality() {
        let a = AnisotropyMatrix::new(2, &[2.0, 0.5, 0.5, 1.0], 0.4).unwrap();
        let b = AnisotropyMatrix::new(2, &[1.0, 0.25, 0.25, 0.5], 0.2).unwrap();
        assert_eq!(a.proportionality_to(&b), Some(2.0));
        assert_eq!(AnisotropyMatrix::scalar(2, 3.0).unwrap().as_scalar(), Some(3.0));
        assert_eq!(a.as_scalar(), None);
    }

    #[test]
    fn quadratic_form_matches_matrix_product() {
        let a = AnisotropyMatrix::new(2, &[2.0, 0.5, 0.5, 1.0], 0.4).unwrap();
        let xi = [0.3, -1.7];
        let direct = 2.0 * 0.09 + 2.0 * 0.5 * 0.3 * -1.7 + 1.0 * 1.7 * 1.7;
        assert!((a.quadratic_form(xi) - direct).abs() < 1e-14);
    }
}
