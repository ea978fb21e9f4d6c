//! Sufficient conditions for membership of the admissible algebra.
//!
//! Only the two published families are recognised. A negative answer means
//! "not established", never "not admissible".

use serde::{Deserialize, Serialize};

use super::{is_integer, PolyFractionalOperator};
use crate::fracop::AnisotropyMatrix;

/// Which quantity the two-term gap test `2(b − a) ∉ ℕ` is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapTarget {
    /// The constant coefficients `α_1, α_2`, as printed.
    #[default]
    Coefficients,
    /// The orders `s_1, s_2`.
    Orders,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityStatus {
    AdmissibleExample1Progression,
    AdmissibleExample1Gap,
    AdmissibleExample2,
    NotEstablished,
}

/// One monomial `c·(−Δ_{κγ̂})^e` of the multiplier `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessTerm {
    pub coefficient: f64,
    pub order: f64,
    pub gamma_scale: f64,
}

impl WitnessTerm {
    pub const ONE: WitnessTerm = WitnessTerm {
        coefficient: 1.0,
        order: 0.0,
        gamma_scale: 1.0,
    };
}

/// `Σ_j c_j z^{n_j} + c_r z^r` in the shared symbol variable `z = ξᵀγ̂ξ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductForm {
    /// `(c_j, n_j)` with non-negative integer `n_j`.
    pub integer_terms: Vec<(f64, u32)>,
    /// `(c_r, r)` with non-integer `r`.
    pub fractional_term: (f64, f64),
}

impl ProductForm {
    pub fn evaluate(&self, z: f64) -> f64 {
        let ints: f64 = self
            .integer_terms
            .iter()
            .map(|&(c, n)| c * z.powi(n as i32))
            .sum();
        let (cr, r) = self.fractional_term;
        ints + cr * z.powf(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityVerdict {
    pub status: AdmissibilityStatus,
    /// Multiplier monomials; `[WitnessTerm::ONE]` for `B = 1`, `None` if
    /// no witness was constructed.
    pub witness: Option<Vec<WitnessTerm>>,
    /// Symbol of `B·P` when both are constant-coefficient in one variable.
    pub product: Option<ProductForm>,
    pub notes: String,
}

impl AdmissibilityVerdict {
    pub fn is_admissible(&self) -> bool {
        self.status != AdmissibilityStatus::NotEstablished
    }

    /// `B̂(z) = Σ c (κz)^e`.
    pub fn multiplier_symbol(&self, z: f64) -> Option<f64> {
        self.witness.as_ref().map(|w| {
            w.iter()
                .map(|t| t.coefficient * (t.gamma_scale * z).powf(t.order))
                .sum()
        })
    }
}

/// `(α, c, s)` for one term.
type ScaledTerm = (f64, f64, f64);

/// Shared shape `γ̂` and per-term scales `c_i` with `γ_i = c_i γ̂`, when all
/// terms are constant-coefficient Fourier multipliers.
fn proportional_constants(p: &PolyFractionalOperator) -> Option<(AnisotropyMatrix, Vec<ScaledTerm>)> {
    let reference = p.terms()[0].backend().gamma()?;
    let mut out = Vec::with_capacity(p.terms().len());
    for t in p.terms() {
        let alpha = t.constant_value()?;
        let scale = t.backend().gamma()?.proportionality_to(&reference)?;
        out.push((alpha, scale, t.order()));
    }
    Some((reference, out))
}

fn in_naturals(v: f64) -> bool {
    v > -1e-12 && is_integer(v)
}

/// Multiplier `z^e` making exactly one exponent of `B·P` non-integer.
fn monomial_witness(orders: &[f64]) -> Option<f64> {
    let mut candidates = vec![0.0];
    for &s in orders {
        let e = s.ceil() - s;
        if e > 1e-12 && e < 1.0 - 1e-12 {
            candidates.push(e);
        }
    }
    candidates.into_iter().find(|&e| {
        orders
            .iter()
            .filter(|&&s| !is_integer(s + e))
            .count()
            == 1
    })
}

fn product_form(terms: &[(f64, f64, f64)], e: f64) -> ProductForm {
    let mut integer_terms = Vec::new();
    let mut fractional_term = (0.0, 0.0);
    for &(alpha, scale, order) in terms {
        let c = alpha * scale.powf(order);
        let n = order + e;
        if is_integer(n) {
            integer_terms.push((c, n.round() as u32));
        } else {
            fractional_term = (c, n);
        }
    }
    ProductForm {
        integer_terms,
        fractional_term,
    }
}

fn example1(
    p: &PolyFractionalOperator,
    terms: &[(f64, f64, f64)],
    status: AdmissibilityStatus,
    notes: String,
) -> AdmissibilityVerdict {
    let orders: Vec<f64> = terms.iter().map(|t| t.2).collect();
    match monomial_witness(&orders) {
        Some(e) => AdmissibilityVerdict {
            status,
            witness: Some(vec![WitnessTerm {
                coefficient: 1.0,
                order: e,
                gamma_scale: 1.0,
            }]),
            product: Some(product_form(terms, e)),
            notes,
        },
        None => AdmissibilityVerdict {
            status,
            witness: None,
            product: None,
            notes: format!(
                "{notes}; no single-monomial multiplier found for orders {orders:?}, witness not constructed ({})",
                p.describe()
            ),
        },
    }
}

/// [`check_admissible_with`] using the gap test on coefficients.
pub fn check_admissible(p: &PolyFractionalOperator) -> AdmissibilityVerdict {
    check_admissible_with(p, GapTarget::Coefficients)
}

/// Tests the progression / two-term gap family (constant coefficients,
/// proportional anisotropies), then the integer-orders-plus-one family.
pub fn check_admissible_with(p: &PolyFractionalOperator, gap: GapTarget) -> AdmissibilityVerdict {
    let m = p.terms().len();
    let mut reasons = Vec::new();

    match proportional_constants(p) {
        Some((_, terms)) if m >= 2 => {
            if m == 2 {
                let (a, b) = match gap {
                    GapTarget::Coefficients => (terms[0].0, terms[1].0),
                    GapTarget::Orders => (terms[0].2, terms[1].2),
                };
                let v = 2.0 * (b - a);
                if !in_naturals(v) {
                    let notes = format!("two-term gap condition 2({b} - {a}) = {v} is not a natural number ({gap:?})");
                    return example1(p, &terms, AdmissibilityStatus::AdmissibleExample1Gap, notes);
                }
                reasons.push(format!("gap condition fails: 2({b} - {a}) = {v} is a natural number"));
            }
            let progression = terms.windows(3).all(|w| {
                let (a0, a1, a2) = (w[0].0, w[1].0, w[2].0);
                (2.0 * a1 - a0 - a2).abs() <= 1e-12 * a0.abs().max(a1.abs()).max(a2.abs()).max(1.0)
            });
            if progression {
                let alphas: Vec<f64> = terms.iter().map(|t| t.0).collect();
                let notes = format!("coefficients {alphas:?} form an arithmetic progression");
                return example1(p, &terms, AdmissibilityStatus::AdmissibleExample1Progression, notes);
            }
            reasons.push("coefficients are not an arithmetic progression".into());
        }
        Some(_) => reasons.push("a single term is outside the multi-term family".into()),
        None => reasons.push(
            "coefficients are not all constant or anisotropies are not proportional".into(),
        ),
    }

    let fractional = p.terms().iter().filter(|t| !is_integer(t.order())).count();
    if fractional == 1 {
        let integers: Vec<f64> = p
            .terms()
            .iter()
            .map(|t| t.order())
            .filter(|&s| is_integer(s))
            .collect();
        return AdmissibilityVerdict {
            status: AdmissibilityStatus::AdmissibleExample2,
            witness: Some(vec![WitnessTerm::ONE]),
            product: None,
            notes: format!(
                "integer orders {integers:?} plus one fractional order; multiplier B = 1"
            ),
        };
    }
    reasons.push(format!("{fractional} non-integer orders (need exactly one)"));

    AdmissibilityVerdict {
        status: AdmissibilityStatus::NotEstablished,
        witness: None,
        product: None,
        notes: reasons.join("; "),
    }
}
