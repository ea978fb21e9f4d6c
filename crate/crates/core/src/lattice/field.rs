use std::f64::consts::PI;

use super::Grid;
use crate::error::{Error, Result};

/// Real- or complex-valued samples on every lattice node.
///
/// A field is *real-flagged* when `imag` is `None`. Complex fields only
/// appear as plane-wave probes; everything the solvers produce is real.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        GridField {
            grid,
            re: vec![0.0; grid.len()],
            im: None,
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        GridField {
            grid,
            re: vec![value; grid.len()],
            im: None,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridField {
            grid,
            re: values,
            im: None,
        })
    }

    pub fn from_complex(grid: Grid, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != grid.len() || im.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values per component",
                grid.len()
            )));
        }
        Ok(GridField {
            grid,
            re,
            im: Some(im),
        })
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1-D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let re = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.node_coords(i);
                f(x, y)
            })
            .collect();
        GridField { grid, re, im: None }
    }

    /// Complex plane wave `e^{iξ·x}` with `ξ = πk/L` for integer wave numbers `k`.
    pub fn plane_wave(grid: Grid, wave_numbers: &[i64]) -> Self {
        // ξ·x = −π(k₁ + k₂) + 2π(k₁i + k₂j)/N on the nodes; reduce the second
        // part exactly in integers so the phase carries one rounding only
        let kx = wave_numbers.first().copied().unwrap_or(0);
        let ky = wave_numbers.get(1).copied().unwrap_or(0);
        let points = grid.points_per_axis() as i64;
        let sign = if (kx + ky).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let n = grid.len();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for idx in 0..n {
            let [i, j] = grid.node_indices(idx);
            let m = (kx * i as i64 + ky * j as i64).rem_euclid(points);
            let phase = 2.0 * PI * m as f64 / points as f64;
            re.push(sign * phase.cos());
            im.push(sign * phase.sin());
        }
        GridField {
            grid,
            re,
            im: Some(im),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    /// Real part of the samples.
    pub fn values(&self) -> &[f64] {
        &self.re
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub fn imag(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.re
    }

    pub fn real_part(&self) -> GridField {
        GridField {
            grid: self.grid,
            re: self.re.clone(),
            im: None,
        }
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        let finite = self.re.iter().all(|v| v.is_finite())
            && self
                .im
                .as_ref()
                .is_none_or(|im| im.iter().all(|v| v.is_finite()));
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            grid: self.grid,
            re: self.re.iter().map(|&v| f(v)).collect(),
            im: None,
        }
    }

    pub fn scale(&self, c: f64) -> GridField {
        GridField {
            grid: self.grid,
            re: self.re.iter().map(|v| c * v).collect(),
            im: self.im.as_ref().map(|im| im.iter().map(|v| c * v).collect()),
        }
    }

    fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.grid.ensure_same(&other.grid, "field arithmetic")?;
        let re = self.re.iter().zip(&other.re).map(|(&a, &b)| f(a, b)).collect();
        let im = match (&self.im, &other.im) {
            (None, None) => None,
            (a, b) => {
                let zeros = vec![0.0; self.len()];
                let a = a.as_ref().unwrap_or(&zeros);
                let b = b.as_ref().unwrap_or(&zeros);
                Some(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            }
        };
        Ok(GridField {
            grid: self.grid,
            re,
            im,
        })
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &GridField, b: f64) -> Result<GridField> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// Nodewise product with a real multiplier field.
    pub fn mul_pointwise(&self, multiplier: &GridField) -> Result<GridField> {
        self.grid.ensure_same(&multiplier.grid, "pointwise product")?;
        let m = &multiplier.re;
        Ok(GridField {
            grid: self.grid,
            re: self.re.iter().zip(m).map(|(a, b)| a * b).collect(),
            im: self
                .im
                .as_ref()
                .map(|im| im.iter().zip(m).map(|(a, b)| a * b).collect()),
        })
    }

    /// Quadrature pairing `⟨u, v⟩ = h^d Σ u v` (real parts).
    pub fn dot(&self, other: &GridField) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "inner product")?;
        let mut sum: f64 = self.re.iter().zip(&other.re).map(|(a, b)| a * b).sum();
        if let (Some(a), Some(b)) = (&self.im, &other.im) {
            sum += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        }
        Ok(sum * self.grid.cell_volume())
    }

    /// Discrete `L²` norm `sqrt(h^d Σ |u|²)`.
    pub fn l2_norm(&self) -> f64 {
        let mut sum: f64 = self.re.iter().map(|v| v * v).sum();
        if let Some(im) = &self.im {
            sum += im.iter().map(|v| v * v).sum::<f64>();
        }
        (sum * self.grid.cell_volume()).sqrt()
    }

    /// Largest nodal modulus.
    pub fn max_abs(&self) -> f64 {
        match &self.im {
            None => self.re.iter().fold(0.0, |m, v| m.max(v.abs())),
            Some(im) => self
                .re
                .iter()
                .zip(im)
                .fold(0.0, |m, (a, b)| m.max(a.hypot(*b))),
        }
    }

    /// Relative `L²` distance `‖self − reference‖ / ‖reference‖`.
    pub fn relative_l2_error(&self, reference: &GridField) -> Result<f64> {
        let diff = self.sub(reference)?;
        let denom = reference.l2_norm();
        Ok(if denom == 0.0 {
            diff.l2_norm()
        } else {
            diff.l2_norm() / denom
        })
    }
}
