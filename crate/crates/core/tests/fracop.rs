use std::sync::Arc;

use polyfrac::fracop::{
    apply_fractional, assemble_elliptic, half_power_form, AnisotropyField, AnisotropyMatrix, Boundary,
    FractionalBackend,
};
use polyfrac::lattice::make_grid;
use polyfrac::{Grid, GridField};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn grid_1d() -> Grid {
    make_grid(1, 2.0, 32).unwrap()
}

fn grid_2d() -> Grid {
    make_grid(2, 1.5, 8).unwrap()
}

fn fields(grid: Grid) -> impl Strategy<Value = (GridField, GridField)> {
    let n = grid.len();
    (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n)).prop_map(move |(a, b)| {
        (GridField::from_values(grid, a).unwrap(), GridField::from_values(grid, b).unwrap())
    })
}

/// Symmetric positive definite 2x2 with eigenvalues in [0.5, 2].
fn gamma_2d() -> impl Strategy<Value = AnisotropyMatrix> {
    (0.5f64..2.0, 0.5f64..2.0, 0.0f64..std::f64::consts::PI).prop_map(|(l1, l2, t)| {
        let (c, s) = (t.cos(), t.sin());
        let off = (l1 - l2) * c * s;
        AnisotropyMatrix::new(2, &[l1 * c * c + l2 * s * s, off, off, l1 * s * s + l2 * c * c], 0.49).unwrap()
    })
}

/// Both backends on `grid`: Fourier with `gamma`, and the matrix function
/// of the periodic finite-difference operator with a variable `γ(x)`.
fn backends(grid: Grid, gamma: AnisotropyMatrix, order: f64) -> [FractionalBackend; 2] {
    let field = AnisotropyField::from_fn(grid, 0.5, true, |x, y| {
        let c = 1.0 + 0.3 * (x + y).sin();
        if grid.dim() == 1 {
            vec![c]
        } else {
            vec![c, 0.0, 0.0, c]
        }
    })
    .unwrap();
    let base = Arc::new(assemble_elliptic(grid, &field, Boundary::Periodic).unwrap());
    [
        FractionalBackend::fourier(grid, gamma, order).unwrap(),
        FractionalBackend::matrix_function(base, order).unwrap(),
    ]
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn self_adjoint_and_nonnegative((u, v) in fields(grid_2d()), gamma in gamma_2d(), order in 0.0f64..3.0) {
        for b in backends(grid_2d(), gamma, order) {
            let pu = apply_fractional(&b, &u).unwrap();
            let pv = apply_fractional(&b, &v).unwrap();
            let (left, right) = (pu.dot(&v).unwrap(), u.dot(&pv).unwrap());
            let scale = pu.l2_norm() * v.l2_norm() + u.l2_norm() * pv.l2_norm();
            prop_assert!((left - right).abs() <= 1e-10 * scale, "{:?}: {left} vs {right}", b.kind());
            prop_assert!(pu.dot(&u).unwrap() >= -1e-12 * u.l2_norm().powi(2));
        }
    }

    #[test]
    fn semigroup_law((u, _) in fields(grid_1d()), s1 in 0.0f64..3.0, s2 in 0.0f64..3.0, g in 0.5f64..2.0) {
        let gamma = AnisotropyMatrix::scalar(1, g).unwrap();
        let first = backends(grid_1d(), gamma, s1);
        let second = backends(grid_1d(), gamma, s2);
        let both = backends(grid_1d(), gamma, s1 + s2);
        for k in 0..2 {
            let composed = apply_fractional(&first[k], &apply_fractional(&second[k], &u).unwrap()).unwrap();
            let direct = apply_fractional(&both[k], &u).unwrap();
            let err = composed.relative_l2_error(&direct).unwrap();
            prop_assert!(err <= 1e-9, "{:?}: {err:e}", both[k].kind());
        }
    }

    #[test]
    fn half_power_form_matches_the_pairing((u, v) in fields(grid_1d()), order in 0.0f64..2.5) {
        for b in backends(grid_1d(), AnisotropyMatrix::identity(1), order) {
            let form = half_power_form(&b, &u, &v).unwrap();
            let pairing = apply_fractional(&b, &u).unwrap().dot(&v).unwrap();
            let scale = apply_fractional(&b, &u).unwrap().l2_norm() * v.l2_norm();
            prop_assert!((form - pairing).abs() <= 1e-10 * scale.max(1.0), "{form} vs {pairing}");
        }
    }

    #[test]
    fn scalar_anisotropy_pulls_out_as_a_power((u, _) in fields(grid_2d()), c in 0.25f64..4.0, order in 0.0f64..3.0) {
        let grid = grid_2d();
        let scaled = FractionalBackend::fourier(grid, AnisotropyMatrix::scalar(2, c).unwrap(), order).unwrap();
        let plain = FractionalBackend::isotropic(grid, order).unwrap();
        let lhs = apply_fractional(&scaled, &u).unwrap();
        let rhs = apply_fractional(&plain, &u).unwrap().scale(c.powf(order));
        let err = lhs.relative_l2_error(&rhs).unwrap();
        prop_assert!(err <= 1e-13, "{err:e}");
    }
}

#[test]
fn order_one_reproduces_the_base_operators() {
    let grid = grid_1d();
    let u = GridField::from_fn(grid, |x, _| (-(x * x)).exp() * (3.0 * x).sin());

    // Fourier: −u'' of a band-limited field is exact
    let wave = GridField::from_fn(grid, |x, _| (std::f64::consts::PI * x).cos());
    let got = apply_fractional(&FractionalBackend::isotropic(grid, 1.0).unwrap(), &wave).unwrap();
    let want = wave.scale(std::f64::consts::PI.powi(2));
    assert!(got.relative_l2_error(&want).unwrap() <= 1e-13);

    // matrix function at order 1 is the base matrix itself
    let identity = AnisotropyField::constant(grid, AnisotropyMatrix::identity(1)).unwrap();
    let base = Arc::new(assemble_elliptic(grid, &identity, Boundary::Periodic).unwrap());
    let powered = apply_fractional(&FractionalBackend::matrix_function(Arc::clone(&base), 1.0).unwrap(), &u).unwrap();
    let h2 = grid.spacing().powi(2);
    let v = u.values();
    let n = v.len();
    let stencil: Vec<f64> = (0..n)
        .map(|i| (2.0 * v[i] - v[(i + 1) % n] - v[(i + n - 1) % n]) / h2)
        .collect();
    let want = GridField::from_values(grid, stencil).unwrap();
    assert!(powered.relative_l2_error(&want).unwrap() <= 1e-12);
}

#[test]
fn fourier_order_zero_is_the_identity() {
    let grid = grid_1d();
    let u = GridField::from_fn(grid, |x, _| x.sin() + 0.5 * (2.0 * x).cos());
    let out = apply_fractional(&FractionalBackend::isotropic(grid, 0.0).unwrap(), &u).unwrap();
    assert!(out.relative_l2_error(&u).unwrap() <= 1e-14);
}
