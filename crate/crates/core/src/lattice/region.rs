use serde::{Deserialize, Serialize};

use super::{Grid, GridField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Omega,
    OmegaComplement,
    WindowW,
    EffectiveE,
    Full,
}

/// Axis-aligned box or ball; nodes strictly inside belong to the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl Shape {
    pub fn interval(lo: f64, hi: f64) -> Shape {
        Shape::Box {
            center: vec![0.5 * (lo + hi)],
            half_widths: vec![0.5 * (hi - lo)],
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        let l = grid.extent();
        let inside = |c: f64, r: f64| c - r > -l && c + r < l;
        let (center, ok) = match self {
            Shape::Box {
                center,
                half_widths,
            } => {
                if half_widths.len() != grid.dim() || half_widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::InvalidRegion(format!(
                        "box needs {} positive half widths",
                        grid.dim()
                    )));
                }
                let ok = center
                    .iter()
                    .zip(half_widths)
                    .all(|(&c, &w)| inside(c, w));
                (center, ok)
            }
            Shape::Ball { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidRegion("ball radius must be positive".into()));
                }
                (center, center.iter().all(|&c| inside(c, *radius)))
            }
        };
        if center.len() != grid.dim() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidRegion(format!(
                "center must have {} finite coordinates",
                grid.dim()
            )));
        }
        if !ok {
            return Err(Error::InvalidRegion(format!(
                "{self:?} is not strictly inside the box [-{l}, {l})^{}",
                grid.dim()
            )));
        }
        Ok(())
    }

    fn contains(&self, point: [f64; 2], dim: usize) -> bool {
        match self {
            Shape::Box {
                center,
                half_widths,
            } => (0..dim).all(|d| (point[d] - center[d]).abs() < half_widths[d]),
            Shape::Ball { center, radius } => {
                let r2: f64 = (0..dim).map(|d| (point[d] - center[d]).powi(2)).sum();
                r2 < radius * radius
            }
        }
    }
}

/// Node mask on a lattice, tagged with the role it plays.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: Grid,
    mask: Vec<bool>,
    kind: RegionKind,
}

/// Realizes Ω as the set of nodes strictly inside `shape`.
pub fn define_region(grid: Grid, shape: &Shape) -> Result<Region> {
    shape.validate(&grid)?;
    let mask: Vec<bool> = (0..grid.len())
        .map(|i| shape.contains(grid.node_coords(i), grid.dim()))
        .collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::InvalidRegion(format!("{shape:?} contains no lattice nodes")));
    }
    Ok(Region {
        grid,
        mask,
        kind: RegionKind::Omega,
    })
}

/// Exterior measurement window `W ⊂ Ω^c`.
pub fn define_window(grid: Grid, shape: &Shape, omega: &Region) -> Result<Region> {
    grid.ensure_same(&omega.grid, "window vs omega")?;
    let mut region = define_region(grid, shape)?;
    if region.mask.iter().zip(&omega.mask).any(|(&w, &o)| w && o) {
        return Err(Error::InvalidRegion(
            "window W must lie in the exterior of omega".into(),
        ));
    }
    region.kind = RegionKind::WindowW;
    Ok(region)
}

impl Region {
    pub fn full(grid: Grid) -> Region {
        Region {
            grid,
            mask: vec![true; grid.len()],
            kind: RegionKind::Full,
        }
    }

    /// Effective set: a nonempty subset of `omega` given by `mask`.
    pub fn effective(omega: &Region, mask: Vec<bool>) -> Result<Region> {
        if mask.len() != omega.grid.len() {
            return Err(Error::GridMismatch("effective mask length".into()));
        }
        if mask.iter().zip(&omega.mask).any(|(&e, &o)| e && !o) {
            return Err(Error::InvalidRegion(
                "effective set must be a subset of omega".into(),
            ));
        }
        Ok(Region {
            grid: omega.grid,
            mask,
            kind: RegionKind::EffectiveE,
        })
    }

    pub fn from_mask(grid: Grid, mask: Vec<bool>, kind: RegionKind) -> Result<Region> {
        if mask.len() != grid.len() {
            return Err(Error::GridMismatch("mask length".into()));
        }
        Ok(Region { grid, mask, kind })
    }

    pub fn complement(&self) -> Region {
        Region {
            grid: self.grid,
            mask: self.mask.iter().map(|m| !m).collect(),
            kind: match self.kind {
                RegionKind::Omega => RegionKind::OmegaComplement,
                RegionKind::OmegaComplement => RegionKind::Omega,
                other => other,
            },
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Flat indices of the masked nodes, ascending.
    pub fn nodes(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// Masked values of `u` in node order.
    pub fn gather(&self, u: &GridField) -> Result<Vec<f64>> {
        self.grid.ensure_same(&u.grid(), "gather")?;
        Ok(self
            .mask
            .iter()
            .zip(u.values())
            .filter_map(|(&m, &v)| m.then_some(v))
            .collect())
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.grid == other.grid && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

/// Zeroes every node outside `r`.
pub fn restrict_field(u: &GridField, r: &Region) -> Result<GridField> {
    r.grid.ensure_same(&u.grid(), "restrict")?;
    let mask = GridField::from_values(
        r.grid,
        r.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )?;
    u.mul_pointwise(&mask)
}

/// Extension by zero of a field living on `r`.
pub fn embed_field(v: &GridField, r: &Region) -> Result<GridField> {
    restrict_field(v, r)
}

/// Places a compact vector of values (one per masked node, in node order)
/// onto the lattice, zero elsewhere.
pub fn embed_values(values: &[f64], r: &Region) -> Result<GridField> {
    if values.len() != r.count() {
        return Err(Error::GridMismatch(format!(
            "region has {} nodes, got {} values",
            r.count(),
            values.len()
        )));
    }
    let mut out = vec![0.0; r.grid.len()];
    for (&node, &v) in r.nodes().iter().zip(values) {
        out[node] = v;
    }
    GridField::from_values(r.grid, out)
}
