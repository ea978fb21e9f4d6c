use polyfrac::lattice::{define_region, make_grid, restrict_field, Shape};
use polyfrac::polyop::{apply_poly, OperatorRole, PolyFractionalOperator};
use polyfrac::solver::{
    dtn_apply, dtn_pairing, solve_linear, solve_semilinear, LinearProblem, NewtonOptions,
    SemilinearProblem, SolveMethod, SolveOptions, SolverTag, TaylorSource,
};
use polyfrac::{Error, Grid, GridField, Region};

fn line(n: usize) -> (Grid, Region) {
    let grid = make_grid(1, std::f64::consts::PI, n).unwrap();
    let omega = define_region(grid, &Shape::interval(-1.0, 1.0)).unwrap();
    (grid, omega)
}

fn disc(n: usize) -> (Grid, Region) {
    let grid = make_grid(2, 1.0, n).unwrap();
    let omega = define_region(
        grid,
        &Shape::Ball {
            center: vec![0.0, 0.0],
            radius: 0.5,
        },
    )
    .unwrap();
    (grid, omega)
}

fn two_term(grid: Grid) -> PolyFractionalOperator {
    PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5), (1.0, 1.5)], OperatorRole::Forward).unwrap()
}

fn half(grid: Grid) -> PolyFractionalOperator {
    PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5)], OperatorRole::Forward).unwrap()
}

fn bump(grid: Grid, center: f64, width: f64) -> GridField {
    GridField::from_fn(grid, move |x, _| (-((x - center) / width).powi(2)).exp())
}

fn l2_on(u: &GridField, omega: &Region) -> f64 {
    restrict_field(u, omega).unwrap().l2_norm()
}

fn manufactured_error(grid: Grid, omega: &Region, opts: &SolveOptions) -> f64 {
    let p = two_term(grid);
    let q = GridField::from_fn(grid, |x, _| 1.0 + x * x);
    let w = 0.3 * grid.extent();
    let exact = GridField::from_fn(grid, |x, y| (-(x * x + y * y) / (w * w)).exp());
    let rhs = apply_poly(&p, &exact).unwrap().add(&exact.mul_pointwise(&q).unwrap()).unwrap();
    let prob = LinearProblem::new(p, q, exact.clone(), omega.clone())
        .unwrap()
        .with_source(restrict_field(&rhs, omega).unwrap())
        .unwrap();
    let sol = solve_linear(&prob, opts).unwrap();
    sol.u.relative_l2_error(&exact).unwrap()
}

#[test]
fn zero_data_gives_zero_solution() {
    let (grid, omega) = line(64);
    let prob = LinearProblem::new(half(grid), GridField::zeros(grid), GridField::zeros(grid), omega)
        .unwrap();
    let sol = solve_linear(&prob, &SolveOptions::default()).unwrap();
    assert_eq!(sol.u.max_abs(), 0.0);
    assert_eq!(sol.iterations, 0);
}

#[test]
fn manufactured_solution_across_grids() {
    let opts = SolveOptions::default();
    for n in [64, 128, 256] {
        let (grid, omega) = line(n);
        let err = manufactured_error(grid, &omega, &opts);
        assert!(err <= 10.0 * opts.tol, "1-D N={n}: {err:e}");
    }
    for n in [16, 32] {
        let (grid, omega) = disc(n);
        let err = manufactured_error(grid, &omega, &opts);
        assert!(err <= 10.0 * opts.tol, "2-D N={n}: {err:e}");
    }
}

#[test]
fn every_method_recovers_the_manufactured_solution() {
    let (grid, omega) = line(128);
    for method in [SolveMethod::Cg, SolveMethod::Gmres, SolveMethod::Direct] {
        let opts = SolveOptions {
            method,
            ..SolveOptions::default()
        };
        assert!(manufactured_error(grid, &omega, &opts) < 1e-9, "{method:?}");
    }
}

#[test]
fn exterior_values_are_copied_exactly() {
    let (grid, omega) = line(128);
    let f = bump(grid, 2.0, 0.3);
    let prob = LinearProblem::new(two_term(grid), GridField::constant(grid, 1.0), f.clone(), omega.clone())
        .unwrap();
    let sol = solve_linear(&prob, &SolveOptions::default()).unwrap();
    for i in 0..grid.len() {
        if !omega.contains(i) {
            assert_eq!(sol.u.values()[i].to_bits(), f.values()[i].to_bits());
        }
    }
    assert_eq!(sol.solver_tag, SolverTag::Cg);
    assert!(sol.residual_interior <= 1e-8);
}

#[test]
fn large_potential_damps_the_interior_solution() {
    let (grid, omega) = line(128);
    let f = bump(grid, 1.6, 0.3);
    let norms: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&c| {
            let prob = LinearProblem::new(half(grid), GridField::constant(grid, c), f.clone(), omega.clone())
                .unwrap();
            l2_on(&solve_linear(&prob, &SolveOptions::default()).unwrap().u, &omega)
        })
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn solution_map_is_linear_and_bound_ratio_is_scale_free() {
    let (grid, omega) = line(128);
    let q = GridField::from_fn(grid, |x, _| 1.0 + x * x);
    let f1 = bump(grid, 2.0, 0.3);
    let f2 = bump(grid, -1.8, 0.4);
    let solve = |f: &GridField| {
        let prob = LinearProblem::new(two_term(grid), q.clone(), f.clone(), omega.clone()).unwrap();
        solve_linear(&prob, &SolveOptions::default()).unwrap()
    };
    let (a, b) = (0.7, -2.3);
    let combo = solve(&f1.lincomb(a, &f2, b).unwrap()).u;
    let expect = solve(&f1).u.lincomb(a, &solve(&f2).u, b).unwrap();
    assert!(combo.relative_l2_error(&expect).unwrap() < 1e-9);

    let r1 = solve(&f1).bound_report.unwrap().ratio;
    let r10 = solve(&f1.scale(10.0)).bound_report.unwrap().ratio;
    assert!(r1 > 0.0 && ((r10 - r1) / r1).abs() < 0.01);
}

#[test]
fn iteration_cap_is_reported() {
    let (grid, omega) = line(128);
    let prob = LinearProblem::new(two_term(grid), GridField::zeros(grid), bump(grid, 2.0, 0.3), omega)
        .unwrap();
    let opts = SolveOptions {
        max_iter: Some(1),
        ..SolveOptions::default()
    };
    assert!(matches!(solve_linear(&prob, &opts), Err(Error::NotConverged { .. })));
}

fn semilinear(grid: Grid, omega: &Region, src: TaylorSource, f: GridField) -> SemilinearProblem {
    SemilinearProblem::new(half(grid), src, f, omega.clone(), NewtonOptions::default()).unwrap()
}

#[test]
fn linear_source_takes_one_newton_step() {
    let (grid, omega) = line(128);
    let q = GridField::from_fn(grid, |x, _| 2.0 + x.cos());
    let src = TaylorSource::new(vec![GridField::zeros(grid), q.clone()]).unwrap();
    let f = bump(grid, 2.0, 0.3);
    let sol = solve_semilinear(&semilinear(grid, &omega, src, f.clone())).unwrap();
    assert_eq!(sol.iterations, 1);
    let lin = LinearProblem::new(half(grid), q, f, omega).unwrap();
    let reference = solve_linear(&lin, &SolveOptions { tol: 1e-14, ..Default::default() }).unwrap();
    assert!(sol.u.relative_l2_error(&reference.u).unwrap() < 1e-11);
}

#[test]
fn zero_data_semilinear() {
    let (grid, omega) = line(64);
    let sol = solve_semilinear(&semilinear(grid, &omega, TaylorSource::monomial(grid, 2, 1.0), GridField::zeros(grid)))
        .unwrap();
    assert_eq!(sol.u.max_abs(), 0.0);
    assert_eq!(sol.iterations, 0);
}

#[test]
fn quadratic_source_deviates_from_linearization_at_second_order() {
    let (grid, omega) = line(128);
    let f = bump(grid, 2.0, 0.3);
    let u1 = {
        let prob = LinearProblem::new(half(grid), GridField::zeros(grid), f.clone(), omega.clone()).unwrap();
        solve_linear(&prob, &SolveOptions { tol: 1e-14, ..Default::default() }).unwrap().u
    };
    let eps = [1e-2, 1e-3, 1e-4];
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let sol = solve_semilinear(&semilinear(grid, &omega, TaylorSource::monomial(grid, 2, 1.0), f.scale(e)))
                .unwrap();
            sol.u.sub(&u1.scale(e)).unwrap().l2_norm()
        })
        .collect();
    for k in 0..2 {
        let slope = (errs[k] / errs[k + 1]).log10() / (eps[k] / eps[k + 1]).log10();
        assert!(slope >= 1.9, "slope {slope} from {errs:?}");
    }
}

#[test]
fn newton_converges_quadratically() {
    let (grid, omega) = line(128);
    let src = TaylorSource::new(vec![
        GridField::zeros(grid),
        GridField::zeros(grid),
        GridField::constant(grid, 1.0),
        GridField::constant(grid, 6.0),
    ])
    .unwrap();
    let sol = solve_semilinear(&semilinear(grid, &omega, src, bump(grid, 2.0, 0.3).scale(0.5))).unwrap();
    let h = &sol.residual_history;
    assert!(h.len() >= 4, "{h:?}");
    let tail = &h[h.len() - 4..];
    for w in tail.windows(2) {
        if w[1] > 1e-13 {
            assert!(w[1] / (w[0] * w[0]) < 10.0, "history {h:?}");
        }
    }
}

#[test]
fn dtn_measurement_identities() {
    let (grid, omega) = line(128);
    let p = two_term(grid);
    let f = bump(grid, 2.0, 0.3);
    let opts = SolveOptions::default();
    let zero = GridField::zeros(grid);

    let same = dtn_apply(&p, &zero, &p, &f, &omega, &opts).unwrap();
    let lin = LinearProblem::new(p.clone(), zero.clone(), f.clone(), omega.clone()).unwrap();
    let u = solve_linear(&lin, &opts).unwrap().u;
    assert!(same.max_abs() <= 1e-8 * apply_poly(&p, &u).unwrap().max_abs());

    let identity = PolyFractionalOperator::isotropic(grid, &[(1.0, 0.0)], OperatorRole::Probe).unwrap();
    let read = dtn_apply(&p, &zero, &identity, &f, &omega, &opts).unwrap();
    assert!(read.sub(&restrict_field(&u, &omega).unwrap()).unwrap().max_abs() < 1e-14);

    let q = GridField::from_fn(grid, |x, _| 1.0 + x * x);
    let with_q = dtn_apply(&p, &q, &p, &f, &omega, &opts).unwrap();
    let lin = LinearProblem::new(p.clone(), q.clone(), f.clone(), omega.clone()).unwrap();
    let uq = solve_linear(&lin, &opts).unwrap().u;
    let expect = restrict_field(&uq.mul_pointwise(&q).unwrap().scale(-1.0), &omega).unwrap();
    assert!(with_q.sub(&expect).unwrap().max_abs() <= 1e-8 * expect.max_abs());

    let too_high = PolyFractionalOperator::isotropic(grid, &[(1.0, 2.5)], OperatorRole::Probe).unwrap();
    assert!(dtn_apply(&p, &zero, &too_high, &f, &omega, &opts).is_err());
}

#[test]
fn dtn_pairing_identities() {
    let (grid, omega) = line(128);
    let p = two_term(grid);
    let f = bump(grid, 2.0, 0.3);
    let opts = SolveOptions::default();
    let zero = GridField::zeros(grid);
    let inside = restrict_field(&bump(grid, 0.2, 0.3), &omega).unwrap();
    let lin = LinearProblem::new(p.clone(), zero.clone(), f.clone(), omega.clone()).unwrap();
    let u = solve_linear(&lin, &opts).unwrap().u;
    let scale = apply_poly(&p, &u).unwrap().l2_norm() * inside.l2_norm();
    assert!(dtn_pairing(&p, &zero, &f, &inside, &omega, &opts).unwrap().abs() <= 1e-8 * scale);
    assert_eq!(dtn_pairing(&p, &zero, &f, &zero, &omega, &opts).unwrap(), 0.0);

    let q = GridField::from_fn(grid, |x, _| 1.0 + x * x);
    let node = omega.nodes()[omega.count() / 3];
    let mut delta = vec![0.0; grid.len()];
    delta[node] = 1.0;
    let g = GridField::from_values(grid, delta).unwrap();
    let pairing = dtn_pairing(&p, &q, &f, &g, &omega, &opts).unwrap();
    let measured = dtn_apply(&p, &q, &p, &f, &omega, &opts).unwrap();
    let lin = LinearProblem::new(p.clone(), q.clone(), f.clone(), omega.clone()).unwrap();
    let uq = solve_linear(&lin, &opts).unwrap().u;
    let expect = grid.spacing() * (measured.values()[node] + q.values()[node] * uq.values()[node]);
    assert!((pairing - expect).abs() <= 1e-8);
}
