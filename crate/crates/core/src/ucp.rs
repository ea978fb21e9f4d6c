//! Discrete non-degeneracy probes: interior nullspace gaps, constant
//! symbol positivity, the exterior elliptic extension system, and sampled
//! Poincaré / Sobolev constants. All outputs are statements about the
//! discretization, never about the continuum.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracop::{apply_fractional, FractionalBackend};
use crate::lattice::io::write_atomic;
use crate::lattice::{embed_values, Grid, GridField, Region};
use crate::linalg;
use crate::polyop::{interior_matrix, PolyFractionalOperator};

/// Relative floor below which a probe is declared degenerate.
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeContext {
    InteriorGap,
    SymbolPositivity,
    ExteriorExtension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Nondegenerate,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UcpProbeReport {
    pub context: ProbeContext,
    /// Smallest singular value (or smallest symbol value for
    /// [`ProbeContext::SymbolPositivity`]).
    pub min_singular_value: f64,
    /// Threshold the verdict compares against.
    pub floor: f64,
    pub verdict: Verdict,
    pub grid: Grid,
    pub operator_digest: String,
    pub seed: Option<u64>,
}

impl UcpProbeReport {
    fn new(context: ProbeContext, value: f64, scale: f64, grid: Grid, digest: String) -> Self {
        let floor = DEFAULT_FLOOR_RATIO * scale;
        UcpProbeReport {
            context,
            min_singular_value: value,
            floor,
            verdict: if value > floor {
                Verdict::Nondegenerate
            } else {
                Verdict::Degenerate
            },
            grid,
            operator_digest: digest,
            seed: None,
        }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.verdict == Verdict::Nondegenerate
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}

/// Smallest singular value of the interior matrix of `probe` (with `q = 0`).
/// Positive means the only Ω-supported field annihilated in Ω is zero.
pub fn interior_gap(probe: &PolyFractionalOperator, omega: &Region) -> Result<UcpProbeReport> {
    let grid = probe.grid();
    let k = interior_matrix(probe, &GridField::zeros(grid), omega)?;
    let smin = linalg::min_singular_value(k.matrix());
    Ok(UcpProbeReport::new(
        ProbeContext::InteriorGap,
        smin,
        k.matrix().amax(),
        grid,
        probe.describe(),
    ))
}

/// Coefficients `(α_i, γ_i, s_i)` of a constant isotropic operator.
fn isotropic_constants(probe: &PolyFractionalOperator) -> Result<Vec<(f64, f64, f64)>> {
    probe
        .terms()
        .iter()
        .map(|t| {
            let alpha = t.constant_value().ok_or_else(|| {
                Error::InvalidOperator("symbol positivity needs constant coefficients".into())
            })?;
            if !(alpha > 0.0) {
                return Err(Error::InvalidOperator(format!(
                    "symbol positivity needs positive coefficients, got {alpha}"
                )));
            }
            let gamma = t
                .backend()
                .gamma()
                .and_then(|g| g.as_scalar())
                .ok_or_else(|| {
                    Error::InvalidOperator("symbol positivity needs isotropic constant anisotropy".into())
                })?;
            Ok((alpha, gamma, t.order()))
        })
        .collect()
}

/// `Σ_i α_i (γ_i |ξ|²)^{s_i}` at `|ξ|² = k2`.
pub fn isotropic_symbol(terms: &[(f64, f64, f64)], k2: f64) -> f64 {
    terms.iter().map(|&(a, g, s)| a * (g * k2).powf(s)).sum()
}

/// Minimum of the operator symbol over the lattice's nonzero frequencies.
pub fn symbol_positivity(probe: &PolyFractionalOperator) -> Result<UcpProbeReport> {
    let terms = isotropic_constants(probe)?;
    let grid = probe.grid();
    let mut k2s: Vec<f64> = grid.squared_frequencies().into_iter().filter(|&k| k > 0.0).collect();
    k2s.sort_by(f64::total_cmp);
    k2s.dedup();
    let values: Vec<f64> = k2s.iter().map(|&k2| isotropic_symbol(&terms, k2)).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(0.0, f64::max);
    Ok(UcpProbeReport::new(
        ProbeContext::SymbolPositivity,
        min,
        max,
        grid,
        probe.describe(),
    ))
}

/// `ℒ = −∇·a∇` on the exterior, `a` scalar and uniformly positive there.
#[derive(Debug, Clone)]
pub struct ExteriorEllipticOperator {
    coefficient: GridField,
    a_min: f64,
}

impl ExteriorEllipticOperator {
    pub fn new(coefficient: GridField, omega: &Region) -> Result<Self> {
        omega.grid().ensure_same(&coefficient.grid(), "exterior coefficient")?;
        coefficient.ensure_finite("exterior coefficient")?;
        let a_min = omega
            .complement()
            .gather(&coefficient)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if !(a_min > 0.0) {
            return Err(Error::Ellipticity(format!(
                "exterior coefficient must be positive on the exterior, minimum {a_min}"
            )));
        }
        Ok(ExteriorEllipticOperator { coefficient, a_min })
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn coefficient(&self) -> &GridField {
        &self.coefficient
    }
}

/// Lattice neighbours `(node, axis)` of a node under periodic wrap.
fn neighbours(grid: Grid, node: usize) -> Vec<(usize, usize)> {
    let n = grid.points_per_axis();
    let idx = grid.node_indices(node);
    let mut out = Vec::with_capacity(2 * grid.dim());
    for axis in 0..grid.dim() {
        for step in [1, n - 1] {
            let mut j = idx;
            j[axis] = (j[axis] + step) % n;
            out.push((grid.flat_index(j), axis));
        }
    }
    out
}

/// Smallest singular value of the stacked exterior system: `h²ℒ u = 0` at
/// every exterior node whose stencil stays in the exterior, and `u = 0` on
/// `W`, over all exterior nodal values. Values in Ω are never referenced.
pub fn exterior_extension_gap(
    op: &ExteriorEllipticOperator,
    window: &Region,
    omega: &Region,
) -> Result<UcpProbeReport> {
    let grid = omega.grid();
    grid.ensure_same(&window.grid(), "window")?;
    if window.is_empty() {
        return Err(Error::InvalidRegion("window W is empty".into()));
    }
    let exterior = omega.complement();
    if !window.is_subset_of(&exterior) {
        return Err(Error::InvalidRegion("window W must lie in the exterior".into()));
    }
    let cols = exterior.nodes();
    let mut slot = vec![usize::MAX; grid.len()];
    for (c, &node) in cols.iter().enumerate() {
        slot[node] = c;
    }
    let a = op.coefficient.values();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for &node in &cols {
        let nb = neighbours(grid, node);
        if nb.iter().any(|&(m, _)| slot[m] == usize::MAX) {
            continue;
        }
        let mut row = vec![(slot[node], 0.0)];
        for (m, _) in nb {
            let face = 0.5 * (a[node] + a[m]);
            row[0].1 += face;
            row.push((slot[m], -face));
        }
        rows.push(row);
    }
    for node in window.nodes() {
        rows.push(vec![(slot[node], 1.0)]);
    }
    let mut mat = DMatrix::<f64>::zeros(rows.len(), cols.len());
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            mat[(r, c)] += v;
        }
    }
    let smin = if mat.nrows() < mat.ncols() {
        0.0
    } else {
        linalg::min_singular_value(&mat)
    };
    let digest = format!(
        "exterior -div(a grad), a_min {}, |W| {}, rows {}",
        op.a_min,
        window.count(),
        rows.len()
    );
    Ok(UcpProbeReport::new(
        ProbeContext::ExteriorExtension,
        smin,
        mat.amax(),
        grid,
        digest,
    ))
}

/// Independent standard normal values on the nodes of `omega`, sample by
/// sample, from one ChaCha8 stream seeded with `seed`.
fn sample_fields(omega: &Region, samples: usize, seed: u64) -> impl Iterator<Item = Result<GridField>> + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = omega.count();
    (0..samples).map(move |_| {
        let vals: Vec<f64> = (0..count).map(|_| StandardNormal.sample(&mut rng)).collect();
        embed_values(&vals, omega)
    })
}

/// `‖(−Δ)^{σ/2} u‖_{L²}`; order 0 is the plain norm.
fn half_norm(u: &GridField, order: f64) -> Result<f64> {
    if order == 0.0 {
        return Ok(u.l2_norm());
    }
    let b = FractionalBackend::isotropic(u.grid(), 0.5 * order)?;
    Ok(apply_fractional(&b, u)?.l2_norm())
}

/// Largest sampled `‖(−Δ)^{r/2}u‖ / ‖(−Δ)^{s/2}u‖` over Ω-supported
/// random fields.
pub fn sobolev_probe(r: f64, s: f64, omega: &Region, samples: usize, seed: u64) -> Result<f64> {
    if !(r >= 0.0 && s >= r && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 <= r <= s, got r = {r}, s = {s}")));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let mut best = 0.0f64;
    for u in sample_fields(omega, samples, seed) {
        let u = u?;
        let ratio = if r == s { 1.0 } else { half_norm(&u, r)? / half_norm(&u, s)? };
        best = best.max(ratio);
    }
    Ok(best)
}

/// Largest sampled `‖u‖ / ‖(−Δ)^{σ/2}u‖` over Ω-supported random fields.
pub fn poincare_probe(sigma: f64, omega: &Region, samples: usize, seed: u64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("order must be positive, got {sigma}")));
    }
    sobolev_probe(0.0, sigma, omega, samples, seed)
}

/// Every sampled ratio, in stream order (for plots and the max property).
pub fn sobolev_ratios(r: f64, s: f64, omega: &Region, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if !(r >= 0.0 && s >= r) {
        return Err(Error::InvalidArgument(format!("need 0 <= r <= s, got r = {r}, s = {s}")));
    }
    sample_fields(omega, samples, seed)
        .map(|u| {
            let u = u?;
            Ok(if r == s { 1.0 } else { half_norm(&u, r)? / half_norm(&u, s)? })
        })
        .collect()
}
