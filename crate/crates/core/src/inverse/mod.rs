//! Pointwise recovery formulas from a single solution field: the potential,
//! one anisotropy coefficient, and the Taylor coefficients of a semilinear
//! source via higher-order linearization.

mod linearize;
mod taylor;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use linearize::{finite_difference_weights, linearize};
pub use taylor::{bell_polynomial, recover_taylor, recover_taylor_from_derivatives};

use crate::error::{Error, Result};
use crate::fracop::{apply_fractional, FractionalBackend};
use crate::lattice::io::{write_atomic, write_field_binary};
use crate::lattice::{GridField, Region};
use crate::polyop::{apply_poly, PolyFractionalOperator};

/// Default relative threshold for effective sets.
pub const DEFAULT_TAU: f64 = 1e-3;

/// `{x ∈ Ω : |g(x)| > τ·max_Ω |g|}` for a generator field `g`.
#[derive(Debug, Clone)]
pub struct EffectiveSet {
    pub region: Region,
    pub tau: f64,
    pub generator: String,
}

impl EffectiveSet {
    pub fn new(generator_field: &GridField, omega: &Region, tau: f64, generator: &str) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument(format!("threshold must lie in (0, 1), got {tau}")));
        }
        omega.grid().ensure_same(&generator_field.grid(), "effective set generator")?;
        let vals = generator_field.values();
        let peak = omega
            .nodes()
            .iter()
            .fold(0.0f64, |m, &i| m.max(vals[i].abs()));
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::EmptyEffectiveSet(format!("{generator} vanishes on omega")));
        }
        let mask: Vec<bool> = vals
            .iter()
            .zip(omega.mask())
            .map(|(v, &inside)| inside && v.abs() > tau * peak)
            .collect();
        Ok(EffectiveSet {
            region: Region::effective(omega, mask)?,
            tau,
            generator: generator.to_string(),
        })
    }

    /// Every node of `omega`.
    pub fn whole(omega: &Region, generator: &str) -> Result<Self> {
        Ok(EffectiveSet {
            region: Region::effective(omega, omega.mask().to_vec())?,
            tau: 0.0,
            generator: generator.to_string(),
        })
    }

    /// Nodes in both sets.
    pub fn intersect(&self, other: &EffectiveSet) -> Result<EffectiveSet> {
        let mask = self
            .region
            .mask()
            .iter()
            .zip(other.region.mask())
            .map(|(&a, &b)| a && b)
            .collect();
        let region = Region::effective(&self.region, mask)?;
        if region.is_empty() {
            return Err(Error::EmptyEffectiveSet("intersection of effective sets".into()));
        }
        Ok(EffectiveSet {
            region,
            tau: self.tau.max(other.tau),
            generator: format!("{} & {}", self.generator, other.generator),
        })
    }
}

/// A field estimated on an effective set (zero elsewhere).
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub estimate: GridField,
    pub effective: EffectiveSet,
    /// Relative `L²` error over the effective set, once a truth is supplied.
    pub rel_error_on_e: Option<f64>,
    /// Largest nodal error over the effective set, once a truth is supplied.
    pub max_abs_error_on_e: Option<f64>,
    /// Fraction of Ω covered by the effective set.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySidecar {
    pub tau: f64,
    pub coverage: f64,
    #[serde(rename = "rel_error_on_E")]
    pub rel_error_on_e: Option<f64>,
    #[serde(rename = "max_abs_error_on_E")]
    pub max_abs_error_on_e: Option<f64>,
    pub generator: String,
}

impl RecoveryReport {
    fn new(estimate: GridField, effective: EffectiveSet, omega: &Region) -> Self {
        let coverage = effective.region.count() as f64 / omega.count() as f64;
        RecoveryReport {
            estimate,
            effective,
            rel_error_on_e: None,
            max_abs_error_on_e: None,
            coverage,
        }
    }

    /// Fills the error fields against a known field. When the truth
    /// vanishes on E, the relative error falls back to the absolute one.
    pub fn compare(&mut self, truth: &GridField) -> Result<()> {
        self.estimate.grid().ensure_same(&truth.grid(), "recovery truth")?;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut worst = 0.0f64;
        for i in self.effective.region.nodes() {
            let d = self.estimate.values()[i] - truth.values()[i];
            num += d * d;
            den += truth.values()[i] * truth.values()[i];
            worst = worst.max(d.abs());
        }
        self.rel_error_on_e = Some(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() });
        self.max_abs_error_on_e = Some(worst);
        Ok(())
    }

    /// Estimated values on the effective nodes, in node order.
    pub fn values_on_e(&self) -> Vec<f64> {
        self.effective
            .region
            .nodes()
            .iter()
            .map(|&i| self.estimate.values()[i])
            .collect()
    }

    pub fn sidecar(&self) -> RecoverySidecar {
        RecoverySidecar {
            tau: self.effective.tau,
            coverage: self.coverage,
            rel_error_on_e: self.rel_error_on_e,
            max_abs_error_on_e: self.max_abs_error_on_e,
            generator: self.effective.generator.clone(),
        }
    }

    /// Writes `<stem>.pfl` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_field_binary(&self.estimate, &dir.join(format!("{stem}.pfl")))?;
        let json = serde_json::to_vec_pretty(&self.sidecar())?;
        write_atomic(&dir.join(format!("{stem}.json")), &json)
    }
}

/// `−numerator / denominator` on the effective set, zero elsewhere.
fn pointwise_ratio(numerator: &GridField, denominator: &GridField, set: &EffectiveSet) -> Result<GridField> {
    let mut out = vec![0.0; numerator.len()];
    for i in set.region.nodes() {
        out[i] = -numerator.values()[i] / denominator.values()[i];
    }
    GridField::from_values(numerator.grid(), out)
}

/// `q̂ = −(P u)/u` on `E = {|u| > τ max_Ω |u|}`.
pub fn recover_q(p: &PolyFractionalOperator, u: &GridField, omega: &Region, tau: f64) -> Result<RecoveryReport> {
    let u = u.real_part();
    let set = EffectiveSet::new(&u, omega, tau, "u")?;
    let pu = apply_poly(p, &u)?;
    let q = pointwise_ratio(&pu, &u, &set)?;
    Ok(RecoveryReport::new(q, set, omega))
}

/// `α̂_m = −(P_rest u + q u)/w` with `w = (−Δ_{γ_m})^{s_m} u`, on
/// `E' = {|w| > τ max_Ω |w|}`.
pub fn recover_alpha(
    rest: &PolyFractionalOperator,
    q: &GridField,
    u: &GridField,
    m_backend: &FractionalBackend,
    omega: &Region,
    tau: f64,
) -> Result<RecoveryReport> {
    let u = u.real_part();
    let w = apply_fractional(m_backend, &u)?;
    let set = EffectiveSet::new(&w, omega, tau, "fractional power of u")?;
    let num = apply_poly(rest, &u)?.add(&u.mul_pointwise(q)?)?;
    let alpha = pointwise_ratio(&num, &w, &set)?;
    Ok(RecoveryReport::new(alpha, set, omega))
}
