//! Poly-fractional operators `Σ α_i(x)(−∇·γ_i∇)^{s_i}`, their interior
//! Galerkin matrices over Ω, and the admissibility checker.

mod admissible;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use admissible::{
    check_admissible, check_admissible_with, AdmissibilityStatus, AdmissibilityVerdict, GapTarget,
    ProductForm, WitnessTerm,
};

use crate::error::{Error, Result};
use crate::fracop::{apply_fractional, BackendKind, FractionalBackend};
use crate::lattice::{forward_transform, inverse_transform, Grid, GridField, Region};
use crate::linalg;

/// What an operator is used for; each role carries its own validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorRole {
    /// The forward operator `P`: positive coefficients, positive orders,
    /// non-integer top order.
    Forward,
    /// A measurement probe: order 0 allowed, coefficient sign unrestricted.
    Probe,
    /// A posynomial multiplier.
    Multiplier,
}

/// `α(x)·(−Δ_γ)^s`.
#[derive(Debug, Clone)]
pub struct PolyTerm {
    coefficient: GridField,
    constant: Option<f64>,
    backend: FractionalBackend,
}

impl PolyTerm {
    pub fn constant(value: f64, backend: FractionalBackend) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("term coefficient"));
        }
        Ok(PolyTerm {
            coefficient: GridField::constant(backend.grid(), value),
            constant: Some(value),
            backend,
        })
    }

    pub fn variable(coefficient: GridField, backend: FractionalBackend) -> Result<Self> {
        backend.grid().ensure_same(&coefficient.grid(), "term coefficient")?;
        coefficient.ensure_finite("term coefficient")?;
        if !coefficient.is_real() {
            return Err(Error::InvalidArgument("term coefficients must be real".into()));
        }
        let first = coefficient.values()[0];
        let constant = coefficient
            .values()
            .iter()
            .all(|&v| v == first)
            .then_some(first);
        Ok(PolyTerm {
            coefficient,
            constant,
            backend,
        })
    }

    pub fn order(&self) -> f64 {
        self.backend.order()
    }

    pub fn backend(&self) -> &FractionalBackend {
        &self.backend
    }

    pub fn coefficient(&self) -> &GridField {
        &self.coefficient
    }

    /// The coefficient value when it is the same on every node.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// Same term with the coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> PolyTerm {
        PolyTerm {
            coefficient: self.coefficient.scale(c),
            constant: self.constant.map(|v| v * c),
            backend: self.backend.clone(),
        }
    }

    fn describe(&self) -> String {
        let coef = match self.constant {
            Some(c) => format!("{c}"),
            None => "field".to_string(),
        };
        let op = match self.backend.kind() {
            BackendKind::FourierSymbol { gamma, .. } => {
                let g: Vec<String> = (0..gamma.dim())
                    .flat_map(|i| (0..gamma.dim()).map(move |j| (i, j)))
                    .map(|(i, j)| format!("{}", gamma.entry(i, j)))
                    .collect();
                format!("fourier[{}]", g.join(","))
            }
            BackendKind::MatrixFunction { base } => format!("matrix[{}dofs]", base.dofs().len()),
        };
        format!("{coef}*{op}^{}", self.order())
    }
}

/// Ordered sum of [`PolyTerm`]s with strictly increasing orders.
#[derive(Debug, Clone)]
pub struct PolyFractionalOperator {
    terms: Vec<PolyTerm>,
    role: OperatorRole,
}

fn is_integer(v: f64) -> bool {
    (v - v.round()).abs() <= 1e-12 * v.abs().max(1.0)
}

impl PolyFractionalOperator {
    /// Terms are sorted by order; duplicate orders are rejected.
    pub fn new(mut terms: Vec<PolyTerm>, role: OperatorRole) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidOperator("operator needs at least one term".into()));
        }
        let grid = terms[0].backend.grid();
        for t in &terms {
            grid.ensure_same(&t.backend.grid(), "operator terms")?;
        }
        terms.sort_by(|a, b| a.order().total_cmp(&b.order()));
        if terms.windows(2).any(|w| w[0].order() == w[1].order()) {
            return Err(Error::InvalidOperator("term orders must be strictly increasing".into()));
        }
        if role == OperatorRole::Forward {
            if terms[0].order() <= 0.0 {
                return Err(Error::InvalidOperator(
                    "order 0 terms are only allowed in probe operators".into(),
                ));
            }
            let top = terms[terms.len() - 1].order();
            if is_integer(top) {
                return Err(Error::InvalidOperator(format!(
                    "forward operator top order must be non-integer, got {top}"
                )));
            }
            if terms.iter().any(|t| t.coefficient.values().iter().any(|&a| a <= 0.0)) {
                return Err(Error::InvalidOperator(
                    "forward operator coefficients must be positive on every node".into(),
                ));
            }
        }
        Ok(PolyFractionalOperator { terms, role })
    }

    /// Convenience: constant coefficients on isotropic Fourier backends.
    pub fn isotropic(grid: Grid, terms: &[(f64, f64)], role: OperatorRole) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|&(c, s)| PolyTerm::constant(c, FractionalBackend::isotropic(grid, s)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms, role)
    }

    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    pub fn role(&self) -> OperatorRole {
        self.role
    }

    pub fn grid(&self) -> Grid {
        self.terms[0].backend.grid()
    }

    pub fn top_order(&self) -> f64 {
        self.terms[self.terms.len() - 1].order()
    }

    /// True when every coefficient is constant and every backend is a
    /// Fourier multiplier: such an operator is a symmetric convolution.
    pub fn is_constant_symbol(&self) -> bool {
        self.terms.iter().all(|t| {
            t.constant.is_some() && matches!(t.backend.kind(), BackendKind::FourierSymbol { .. })
        })
    }

    /// The operator without the term at `index` (same role check skipped).
    pub fn without_term(&self, index: usize) -> Result<Self> {
        if index >= self.terms.len() || self.terms.len() == 1 {
            return Err(Error::InvalidArgument(format!(
                "cannot remove term {index} from a {}-term operator",
                self.terms.len()
            )));
        }
        let mut terms = self.terms.clone();
        terms.remove(index);
        Ok(PolyFractionalOperator {
            terms,
            role: OperatorRole::Probe,
        })
    }

    /// All coefficients multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        PolyFractionalOperator {
            terms: self.terms.iter().map(|t| t.scaled(c)).collect(),
            role: self.role,
        }
    }

    /// Short stable description used in report digests.
    pub fn describe(&self) -> String {
        self.terms
            .iter()
            .map(PolyTerm::describe)
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// `Σ_i α_i · (−Δ_{γ_i})^{s_i} u`, nodewise.
pub fn apply_poly(p: &PolyFractionalOperator, u: &GridField) -> Result<GridField> {
    p.grid().ensure_same(&u.grid(), "poly-fractional input")?;
    let mut acc: Option<GridField> = None;
    for t in &p.terms {
        let v = apply_fractional(&t.backend, u)?;
        let term = match t.constant {
            Some(c) => v.scale(c),
            None => v.mul_pointwise(&t.coefficient)?,
        };
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    Ok(acc.expect("operators have at least one term"))
}

/// Galerkin matrix of `P + q` over the nodal basis of Ω.
#[derive(Debug, Clone)]
pub struct InteriorMatrix {
    nodes: Vec<usize>,
    matrix: DMatrix<f64>,
    symmetric: bool,
}

impl InteriorMatrix {
    /// Flat lattice indices of the rows/columns, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Whether `K` passed the symmetry test `‖K − Kᵀ‖_max ≤ 1e-10‖K‖_max`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn to_csv(&self) -> String {
        crate::fracop::matrix_to_csv(&self.matrix)
    }
}

/// `K[a][b] = (P δ_b + q δ_b)(a)` for `a, b ∈ Ω`.
pub fn interior_matrix(
    p: &PolyFractionalOperator,
    q: &GridField,
    omega: &Region,
) -> Result<InteriorMatrix> {
    let grid = p.grid();
    grid.ensure_same(&omega.grid(), "interior matrix region")?;
    grid.ensure_same(&q.grid(), "interior matrix potential")?;
    q.ensure_finite("potential")?;
    let nodes = omega.nodes();
    if nodes.is_empty() {
        return Err(Error::InvalidRegion("omega is empty".into()));
    }
    let n = nodes.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for t in &p.terms {
        let block = t.backend.block(&nodes)?;
        let alpha = t.coefficient.values();
        for r in 0..n {
            let a = alpha[nodes[r]];
            for c in 0..n {
                k[(r, c)] += a * block[(r, c)];
            }
        }
    }
    let qv = q.values();
    for (r, &node) in nodes.iter().enumerate() {
        k[(r, r)] += qv[node];
    }
    let symmetric = linalg::is_symmetric(&k, 1e-10);
    Ok(InteriorMatrix {
        nodes,
        matrix: k,
        symmetric,
    })
}

/// Nodal Gram matrix of the `H^s` norm on `nodes`:
/// `‖u‖²_{H^s} = h^d · uᵀ G u` for `u` supported on `nodes`.
pub fn sobolev_gram(grid: Grid, s: f64, nodes: &[usize]) -> Result<DMatrix<f64>> {
    let mut delta = vec![0.0; grid.len()];
    delta[0] = 1.0;
    let mut spec = forward_transform(&GridField::from_values(grid, delta)?);
    for (idx, c) in spec.coefficients_mut().iter_mut().enumerate() {
        let xi = grid.frequency_vector(idx);
        *c *= (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).powf(s);
    }
    let kernel = inverse_transform(&spec);
    let k = kernel.values();
    let n = grid.points_per_axis();
    let g = DMatrix::from_fn(nodes.len(), nodes.len(), |r, c| {
        let ia = grid.node_indices(nodes[r]);
        let ib = grid.node_indices(nodes[c]);
        k[grid.flat_index([(ia[0] + n - ib[0]) % n, (ia[1] + n - ib[1]) % n])]
    });
    Ok((&g + g.transpose()) * 0.5)
}

/// Smallest generalized eigenvalue of `(K + Kᵀ)/2` against the `H^{s_M}`
/// Gram matrix: the minimum of `⟨(P+q)u, u⟩ / ‖u‖²_{H^{s_M}}` over
/// Ω-supported `u`. Positive values are evidence of coercivity.
pub fn coercivity_probe(p: &PolyFractionalOperator, q: &GridField, omega: &Region) -> Result<f64> {
    let k = interior_matrix(p, q, omega)?;
    let ksym = (k.matrix() + k.matrix().transpose()) * 0.5;
    let g = sobolev_gram(p.grid(), p.top_order(), k.nodes())?;
    min_generalized_eigenvalue(&ksym, &g)
}

fn min_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("Sobolev Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let n = a.nrows();
    // C = L⁻¹ A L⁻ᵀ
    let mut y = a.clone();
    if !l.solve_lower_triangular_mut(&mut y) {
        return Err(Error::Singular("triangular solve failed".into()));
    }
    let mut c = y.transpose();
    if !l.solve_lower_triangular_mut(&mut c) {
        return Err(Error::Singular("triangular solve failed".into()));
    }
    let c = (&c + c.transpose()) * 0.5;
    let vals: DVector<f64> = c.symmetric_eigenvalues();
    Ok((0..n).map(|i| vals[i]).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{define_region, make_grid, Shape};

    fn setup() -> (Grid, Region) {
        let grid = make_grid(1, std::f64::consts::PI, 64).unwrap();
        let omega = define_region(grid, &Shape::interval(-1.0, 1.0)).unwrap();
        (grid, omega)
    }

    #[test]
    fn two_term_plane_wave_scales_by_ten() {
        let grid = make_grid(1, std::f64::consts::PI, 32).unwrap();
        let p = PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5), (1.0, 1.5)], OperatorRole::Forward)
            .unwrap();
        let u = GridField::plane_wave(grid, &[2]);
        let pu = apply_poly(&p, &u).unwrap();
        let expect = u.scale(10.0);
        assert!(pu.sub(&expect).unwrap().max_abs() < 1e-12 * 10.0);
    }

    #[test]
    fn single_term_matches_apply_fractional() {
        let (grid, _) = setup();
        let b = FractionalBackend::isotropic(grid, 0.7).unwrap();
        let p = PolyFractionalOperator::new(vec![PolyTerm::constant(1.0, b.clone()).unwrap()], OperatorRole::Forward)
            .unwrap();
        let u = GridField::from_fn(grid, |x, _| (-x * x).exp());
        let a = apply_poly(&p, &u).unwrap();
        let c = apply_fractional(&b, &u).unwrap();
        assert_eq!(a.values(), c.values());
    }

    #[test]
    fn forward_operator_validation() {
        let (grid, _) = setup();
        assert!(PolyFractionalOperator::isotropic(grid, &[(1.0, 1.0)], OperatorRole::Forward).is_err());
        assert!(PolyFractionalOperator::isotropic(grid, &[(-1.0, 0.5)], OperatorRole::Forward).is_err());
        assert!(PolyFractionalOperator::isotropic(grid, &[(1.0, 0.0), (1.0, 0.5)], OperatorRole::Forward).is_err());
        assert!(PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5), (2.0, 0.5)], OperatorRole::Probe).is_err());
        let p = PolyFractionalOperator::isotropic(grid, &[(1.0, 1.5), (1.0, 0.0)], OperatorRole::Probe).unwrap();
        assert_eq!(p.terms()[0].order(), 0.0);
        assert_eq!(p.top_order(), 1.5);
    }

    #[test]
    fn half_order_interior_matrix_is_spd() {
        let (grid, omega) = setup();
        let p = PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5)], OperatorRole::Forward).unwrap();
        let k = interior_matrix(&p, &GridField::zeros(grid), &omega).unwrap();
        assert!(k.is_symmetric());
        let eig = k.matrix().clone().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn potential_shift_shifts_diagonal() {
        let (grid, omega) = setup();
        let p = PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5), (2.0, 1.5)], OperatorRole::Forward)
            .unwrap();
        let q = GridField::from_fn(grid, |x, _| 1.0 + x * x);
        let k0 = interior_matrix(&p, &q, &omega).unwrap();
        let q2 = q.map(|v| v + 3.0);
        let k1 = interior_matrix(&p, &q2, &omega).unwrap();
        let diff = k1.matrix() - k0.matrix();
        let id = DMatrix::<f64>::identity(k0.dim(), k0.dim()) * 3.0;
        assert!((diff - id).amax() < 1e-12);
    }

    #[test]
    fn interior_matrix_columns_are_operator_responses() {
        let (grid, omega) = setup();
        let alpha = GridField::from_fn(grid, |x, _| 1.5 + 0.3 * x.sin());
        let p = PolyFractionalOperator::new(
            vec![
                PolyTerm::variable(alpha, FractionalBackend::isotropic(grid, 0.5).unwrap()).unwrap(),
                PolyTerm::constant(0.7, FractionalBackend::isotropic(grid, 1.25).unwrap()).unwrap(),
            ],
            OperatorRole::Forward,
        )
        .unwrap();
        let q = GridField::from_fn(grid, |x, _| x.cos());
        let k = interior_matrix(&p, &q, &omega).unwrap();
        assert!(!k.is_symmetric());
        for col in [0, k.dim() / 2, k.dim() - 1] {
            let mut delta = vec![0.0; grid.len()];
            delta[k.nodes()[col]] = 1.0;
            let d = GridField::from_values(grid, delta).unwrap();
            let resp = apply_poly(&p, &d).unwrap().add(&d.mul_pointwise(&q).unwrap()).unwrap();
            for (row, &node) in k.nodes().iter().enumerate() {
                assert!((k.matrix()[(row, col)] - resp.values()[node]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coercivity_probe_sign() {
        let (grid, omega) = setup();
        let p = PolyFractionalOperator::isotropic(grid, &[(1.0, 0.5)], OperatorRole::Forward).unwrap();
        let pos = coercivity_probe(&p, &GridField::zeros(grid), &omega).unwrap();
        assert!(pos > 0.0);
        let neg = coercivity_probe(&p, &GridField::constant(grid, -1e6), &omega).unwrap();
        assert!(neg < 0.0);
        let c = 2.0;
        let shifted = coercivity_probe(&p, &GridField::constant(grid, c), &omega).unwrap();
        let g = sobolev_gram(grid, 0.5, &omega.nodes()).unwrap();
        let gmax = g.symmetric_eigenvalues().max();
        assert!(shifted >= pos + c / gmax - 1e-9);
    }

    #[test]
    fn sobolev_gram_reproduces_norm() {
        let (grid, omega) = setup();
        let u = GridField::from_fn(grid, |x, _| if x.abs() < 1.0 { (1.0 - x * x).powi(2) } else { 0.0 });
        let v = DVector::from_vec(omega.gather(&u).unwrap());
        let g = sobolev_gram(grid, 0.75, &omega.nodes()).unwrap();
        let quad = grid.cell_volume() * v.dot(&(&g * &v));
        let norm = crate::lattice::sobolev_norm(&u, 0.75).unwrap();
        assert!((quad.sqrt() - norm).abs() < 1e-12 * norm);
    }
}
