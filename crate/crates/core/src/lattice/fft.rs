use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::{Grid, GridField};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized DFT coefficients of a lattice field, in FFT slot order.
///
/// The forward transform uses the `e^{-iξ·x}` sign; [`inverse_transform`]
/// carries the `1/N^dim` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
    real_input: bool,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>, real_input: bool) -> Self {
        assert_eq!(coeffs.len(), grid.len(), "spectrum length must match the grid");
        Spectrum {
            grid,
            coeffs,
            real_input,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_real_input(&self) -> bool {
        self.real_input
    }
}

pub(crate) fn transform_in_place(grid: Grid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.points_per_axis();
    PLANNER.with(|planner| {
        let fft = planner.borrow_mut().plan_fft(n, direction);
        // contiguous last axis
        fft.process(data);
        if grid.dim() == 2 {
            let mut column = vec![Complex64::default(); n];
            for j in 0..n {
                for i in 0..n {
                    column[i] = data[i * n + j];
                }
                fft.process(&mut column);
                for i in 0..n {
                    data[i * n + j] = column[i];
                }
            }
        }
    });
}

pub fn forward_transform(u: &GridField) -> Spectrum {
    let grid = u.grid();
    let mut data: Vec<Complex64> = match u.imag() {
        None => u.values().iter().map(|&r| Complex64::new(r, 0.0)).collect(),
        Some(im) => u
            .values()
            .iter()
            .zip(im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect(),
    };
    transform_in_place(grid, &mut data, FftDirection::Forward);
    Spectrum {
        grid,
        coeffs: data,
        real_input: u.is_real(),
    }
}

/// Inverse DFT. Spectra of real-flagged fields come back real-flagged with
/// the (rounding-level) imaginary residue discarded.
pub fn inverse_transform(spectrum: &Spectrum) -> GridField {
    let grid = spectrum.grid;
    let mut data = spectrum.coeffs.clone();
    transform_in_place(grid, &mut data, FftDirection::Inverse);
    let scale = 1.0 / grid.len() as f64;
    let re: Vec<f64> = data.iter().map(|c| c.re * scale).collect();
    if spectrum.real_input {
        GridField::from_values(grid, re).expect("length preserved")
    } else {
        let im = data.iter().map(|c| c.im * scale).collect();
        GridField::from_complex(grid, re, im).expect("length preserved")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        GridField::from_values(grid, v).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        for (dim, n) in [(1, 64), (2, 16)] {
            let g = make_grid(dim, 1.7, n).unwrap();
            let u = random_field(g, 11);
            let back = inverse_transform(&forward_transform(&u));
            assert!(back.is_real());
            let err = back.sub(&u).unwrap().max_abs();
            assert!(err <= 1e-12 * u.max_abs(), "round trip error {err}");
        }
    }

    #[test]
    fn real_field_has_negligible_imaginary_residue() {
        let g = make_grid(2, 1.0, 16).unwrap();
        let u = random_field(g, 5);
        let mut data = forward_transform(&u).coefficients().to_vec();
        transform_in_place(g, &mut data, FftDirection::Inverse);
        let max_im = data.iter().fold(0.0f64, |m, c| m.max(c.im.abs())) / g.len() as f64;
        assert!(max_im <= 1e-12 * u.max_abs());
    }

    #[test]
    fn parseval_matches_l2_norm() {
        let g = make_grid(1, 3.0, 128).unwrap();
        let u = random_field(g, 3);
        let s = crate::lattice::sobolev_norm(&u, 0.0).unwrap();
        assert!((s - u.l2_norm()).abs() <= 1e-12 * s);
    }

    #[test]
    fn plane_wave_lands_on_its_slot() {
        let g = make_grid(1, std::f64::consts::PI, 16).unwrap();
        let u = GridField::plane_wave(g, &[3]);
        let spec = forward_transform(&u);
        for (j, c) in spec.coefficients().iter().enumerate() {
            if j == 3 {
                assert!((c.norm() - 16.0).abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12);
            }
        }
    }
}
