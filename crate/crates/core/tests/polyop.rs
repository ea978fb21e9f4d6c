use polyfrac::fracop::{AnisotropyMatrix, FractionalBackend};
use polyfrac::lattice::{define_region, embed_values, make_grid, restrict_field, Shape};
use polyfrac::polyop::{apply_poly, check_admissible, interior_matrix, OperatorRole, PolyFractionalOperator, PolyTerm};
use polyfrac::{Grid, GridField};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn grid() -> Grid {
    make_grid(1, 2.5, 64).unwrap()
}

fn random_field(grid: Grid) -> impl Strategy<Value = GridField> {
    prop::collection::vec(-1.0f64..1.0, grid.len()).prop_map(move |v| GridField::from_values(grid, v).unwrap())
}

/// Strictly increasing orders with a non-integer top.
fn orders(max_terms: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.95, 1..=max_terms).prop_map(|steps| {
        let mut acc = 0.0;
        steps.iter().map(|s| {
            acc += s;
            acc
        })
        .collect()
    })
    .prop_filter("non-integer top order", |o: &Vec<f64>| {
        let top = *o.last().unwrap();
        (top - top.round()).abs() > 1e-6
    })
}

/// Variable positive coefficients `a + b·sin(kx)`.
fn variable_operator(grid: Grid, orders: &[f64], seeds: &[(f64, f64)]) -> PolyFractionalOperator {
    let terms = orders
        .iter()
        .zip(seeds)
        .map(|(&s, &(a, b))| {
            let coef = GridField::from_fn(grid, |x, _| a + b * (2.0 * x).sin());
            PolyTerm::variable(coef, FractionalBackend::isotropic(grid, s).unwrap()).unwrap()
        })
        .collect();
    PolyFractionalOperator::new(terms, OperatorRole::Forward).unwrap()
}

fn coefficient_seeds() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1.0f64..3.0, -0.9f64..0.9), 4)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn apply_poly_is_linear(
        o in orders(4), seeds in coefficient_seeds(),
        u in random_field(grid()), v in random_field(grid()),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let p = variable_operator(grid(), &o, &seeds);
        let lhs = apply_poly(&p, &u.scale(a).add(&v.scale(b)).unwrap()).unwrap();
        let rhs = apply_poly(&p, &u).unwrap().scale(a).add(&apply_poly(&p, &v).unwrap().scale(b)).unwrap();
        let scale = a.abs() * apply_poly(&p, &u).unwrap().l2_norm() + b.abs() * apply_poly(&p, &v).unwrap().l2_norm();
        prop_assert!(lhs.sub(&rhs).unwrap().l2_norm() <= 1e-11 * scale.max(1e-300));
    }

    #[test]
    fn plane_waves_scale_by_the_summed_symbol(
        o in orders(3),
        coefs in prop::collection::vec(0.1f64..5.0, 3),
        (l1, l2, t) in (0.5f64..2.0, 0.5f64..2.0, 0.0f64..std::f64::consts::PI),
        k in (-7i64..8, -7i64..8).prop_filter("nonzero", |k| *k != (0, 0)),
    ) {
        let grid = make_grid(2, 1.5, 16).unwrap();
        let (c, s) = (t.cos(), t.sin());
        let off = (l1 - l2) * c * s;
        let gamma = AnisotropyMatrix::new(2, &[l1 * c * c + l2 * s * s, off, off, l1 * s * s + l2 * c * c], 0.49).unwrap();
        let terms = o.iter().zip(&coefs).map(|(&s, &a)| {
            PolyTerm::constant(a, FractionalBackend::fourier(grid, gamma, s).unwrap()).unwrap()
        }).collect();
        let p = PolyFractionalOperator::new(terms, OperatorRole::Forward).unwrap();

        let scale = std::f64::consts::PI / grid.extent();
        let z = gamma.quadratic_form([k.0 as f64 * scale, k.1 as f64 * scale]);
        let lambda: f64 = o.iter().zip(&coefs).map(|(&s, &a)| a * z.powf(s)).sum();

        let wave = GridField::plane_wave(grid, &[k.0, k.1]);
        let out = apply_poly(&p, &wave).unwrap();
        let (wr, wi) = (wave.values(), wave.imag().unwrap());
        let (or, oi) = (out.values(), out.imag().unwrap());
        let mut num = 0.0;
        let mut den = 0.0;
        let mut res = 0.0;
        for i in 0..wr.len() {
            num += wr[i] * or[i] + wi[i] * oi[i];
            den += wr[i] * wr[i] + wi[i] * wi[i];
            res += (or[i] - lambda * wr[i]).powi(2) + (oi[i] - lambda * wi[i]).powi(2);
        }
        let eigen_err = (num / den - lambda).abs() / lambda;
        prop_assert!(eigen_err <= 1e-12, "eigenvalue {eigen_err:e}");
        // the whole field also carries top-mode rounding, scaled by λ_max/λ
        let field_err = (res / den).sqrt() / lambda;
        prop_assert!(field_err <= 1e-9, "field {field_err:e}");
    }

    #[test]
    fn interior_matrix_matches_the_operator(
        o in orders(3), seeds in coefficient_seeds(), values in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let grid = grid();
        let omega = define_region(grid, &Shape::interval(-1.0, 1.0)).unwrap();
        let p = variable_operator(grid, &o, &seeds);
        let q = GridField::from_fn(grid, |x, _| 1.0 + x * x);
        let k = interior_matrix(&p, &q, &omega).unwrap();
        let inside = &values[..omega.count()];
        let u = embed_values(inside, &omega).unwrap();
        let direct = restrict_field(&apply_poly(&p, &u).unwrap().add(&u.mul_pointwise(&q).unwrap()).unwrap(), &omega).unwrap();
        let x = nalgebra::DVector::from_column_slice(inside);
        let via_matrix = k.matrix() * x;
        let want = omega.gather(&direct).unwrap();
        let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = via_matrix.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-10 * norm, "{:e}", diff / norm);
    }

    #[test]
    fn admissibility_ignores_term_order(
        spec in prop::collection::vec((0.2f64..3.0, 0.5f64..2.0, 0.5f64..2.0), 1..=4).prop_shuffle(),
    ) {
        let grid = grid();
        let build = |terms: &[(f64, f64, f64)]| {
            let t = terms.iter().map(|&(s, a, g)| {
                let gamma = AnisotropyMatrix::scalar(1, g).unwrap();
                PolyTerm::constant(a, FractionalBackend::fourier(grid, gamma, s).unwrap()).unwrap()
            }).collect();
            PolyFractionalOperator::new(t, OperatorRole::Probe)
        };
        let Ok(p) = build(&spec) else { return Ok(()) };
        let mut sorted = spec.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let q = build(&sorted).unwrap();
        let (v1, v2) = (check_admissible(&p), check_admissible(&q));
        prop_assert_eq!(v1.status, v2.status);
        prop_assert_eq!(v1.witness, v2.witness);
        prop_assert_eq!(check_admissible(&p).status, v1.status);
    }
}
