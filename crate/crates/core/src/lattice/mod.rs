//! Periodic computational lattice on the box `[-L, L)^dim`.
//!
//! Every field in the crate lives on a [`Grid`]: the unknown, the exterior
//! data, potentials and coefficient fields alike. Fields are stored
//! row-major with the last axis contiguous, so node `(i, j)` of a 2-D grid
//! sits at index `i * N + j` and has coordinates `(x_i, y_j)`.

mod fft;
mod field;
pub mod io;
mod region;

pub use fft::{forward_transform, inverse_transform, Spectrum};
pub use field::GridField;
pub use region::{define_region, define_window, embed_field, embed_values, restrict_field, Region, RegionKind, Shape};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform periodic lattice with `N` points per axis on `[-L, L)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extent: f64,
    points_per_axis: usize,
}

pub fn make_grid(dim: usize, extent: f64, points_per_axis: usize) -> Result<Grid> {
    Grid::new(dim, extent, points_per_axis)
}

impl Grid {
    pub fn new(dim: usize, extent: f64, points_per_axis: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        Ok(Grid {
            dim,
            extent,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Total node count `N^dim`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h = 2L / N`; exact because `N` is a power of two.
    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points_per_axis as f64
    }

    /// Quadrature weight `h^dim` of a single node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates `x_j = -L + j h` along one axis.
    pub fn axis_coordinates(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points_per_axis)
            .map(|j| -self.extent + j as f64 * h)
            .collect()
    }

    /// Signed wave number `k` stored at FFT slot `j` (`k ∈ {-N/2, …, N/2-1}`).
    pub fn wave_number(&self, slot: usize) -> i64 {
        let n = self.points_per_axis;
        if slot < n / 2 {
            slot as i64
        } else {
            slot as i64 - n as i64
        }
    }

    /// Angular frequency `ξ = πk/L` at FFT slot `j`.
    pub fn frequency_at_slot(&self, slot: usize) -> f64 {
        self.wave_number(slot) as f64 * (PI / self.extent)
    }

    /// Frequencies `ξ_k = πk/L` for `k = -N/2, …, N/2-1`, in ascending order.
    pub fn frequencies(&self) -> Vec<f64> {
        let half = (self.points_per_axis / 2) as i64;
        (-half..half).map(|k| k as f64 * (PI / self.extent)).collect()
    }

    /// Frequencies in FFT slot order, one entry per slot along an axis.
    pub fn slot_frequencies(&self) -> Vec<f64> {
        (0..self.points_per_axis)
            .map(|j| self.frequency_at_slot(j))
            .collect()
    }

    /// Per-axis lattice indices of a flat node index.
    pub fn node_indices(&self, index: usize) -> [usize; 2] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [index, 0],
            _ => [index / n, index % n],
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.points_per_axis + idx[1],
        }
    }

    /// Physical coordinates of a node; the second entry is 0 in 1-D.
    pub fn node_coords(&self, index: usize) -> [f64; 2] {
        let h = self.spacing();
        let [i, j] = self.node_indices(index);
        let x = -self.extent + i as f64 * h;
        let y = if self.dim == 2 {
            -self.extent + j as f64 * h
        } else {
            0.0
        };
        [x, y]
    }

    /// Frequency vector `(ξ_1, ξ_2)` of a flat spectral index.
    pub fn frequency_vector(&self, index: usize) -> [f64; 2] {
        let [i, j] = self.node_indices(index);
        let x = self.frequency_at_slot(i);
        let y = if self.dim == 2 {
            self.frequency_at_slot(j)
        } else {
            0.0
        };
        [x, y]
    }

    /// `|ξ|²` for every flat spectral index, in FFT slot order.
    pub fn squared_frequencies(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let [a, b] = self.frequency_vector(idx);
                a * a + b * b
            })
            .collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {self:?} vs {other:?}"
            )))
        }
    }
}

/// Discrete `H^s` norm `‖(1+|ξ|²)^{s/2} û‖_{L²}` with Parseval-consistent
/// quadrature, so that `s = 0` returns the nodal `L²` norm.
pub fn sobolev_norm(u: &GridField, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!("Sobolev index must be finite, got {s}")));
    }
    u.ensure_finite("sobolev_norm input")?;
    let grid = u.grid();
    let spectrum = forward_transform(u);
    let weights = grid.squared_frequencies();
    let sum: f64 = spectrum
        .coefficients()
        .iter()
        .zip(&weights)
        .map(|(c, &k2)| (1.0 + k2).powf(s) * c.norm_sqr())
        .sum();
    Ok((sum * grid.cell_volume() / grid.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_with_extent_pi_has_integer_frequencies() {
        let g = make_grid(1, PI, 16).unwrap();
        assert_eq!(g.spacing(), 2.0 * PI / 16.0);
        let expected: Vec<f64> = (-8..8).map(|k| k as f64).collect();
        assert_eq!(g.frequencies(), expected);
    }

    #[test]
    fn two_dimensional_grid_sizes() {
        let g = make_grid(2, 1.0, 32).unwrap();
        assert_eq!(g.len(), 1024);
        assert_eq!(g.spacing(), 1.0 / 16.0);
        assert_eq!(g.spacing() * 32.0, 2.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(1, 1.0, 10), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(3, 1.0, 16), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1, 1.0, 4), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1, -1.0, 16), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn frequency_list_symmetric_except_nyquist() {
        let g = make_grid(1, 2.5, 32).unwrap();
        let f = g.frequencies();
        assert_eq!(f[0], -16.0 * (PI / 2.5));
        for k in 1..16 {
            assert_eq!(f[16 + k], -f[16 - k]);
        }
        assert_eq!(f[16], 0.0);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = make_grid(1, 1.0, 16).unwrap();
        let u = GridField::zeros(g);
        for s in [-1.0, 0.0, 0.5, 2.0] {
            assert_eq!(sobolev_norm(&u, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn sobolev_norm_of_single_mode() {
        // 2-D mode with |ξ|² = 4 (k = (2, 0) on L = π).
        let g = make_grid(2, PI, 16).unwrap();
        let u = GridField::plane_wave(g, &[2, 0]);
        let l2 = u.l2_norm();
        let h1 = sobolev_norm(&u, 1.0).unwrap();
        assert!((h1 - 5f64.sqrt() * l2).abs() <= 1e-12 * h1);

        // dense summation oracle: direct quadrature of |u|² and |∇u|²-free weight
        let vol = g.cell_volume();
        let direct: f64 = (0..g.len())
            .map(|i| {
                let re = u.values()[i];
                let im = u.imag().unwrap()[i];
                5.0 * (re * re + im * im) * vol
            })
            .sum::<f64>()
            .sqrt();
        assert!((h1 - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn non_finite_fields_are_rejected() {
        let g = make_grid(1, 1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        let u = GridField::from_values(g, v).unwrap();
        assert!(matches!(sobolev_norm(&u, 1.0), Err(Error::NonFinite(_))));
    }
}
