//! Finite-observation bound `N₀` for support recovery on Hammerstein systems with the
//! ratio-power threshold `α_n = M (R_n/λ_min^n)^ε`.
//!
//! ```text
//! k₁ = (√C₀ / M)^{2/(1−2ε)},   k₂ = (2M / C₅)^{1/ε}
//! N₀ = max{ 47/C₂, (2k₁/C₃) log(C₂k₁/C₃), (2k₂/C₃) log(C₂k₂/C₃) }
//! ```
//!
//! `C₀` bounds the LS error, `C₂`/`C₃` are the linear growth rates of `R_n` and
//! `λ_min^n`, and `C₅` is the smallest nonzero parameter magnitude. None are known
//! a priori; they are user inputs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub c0: f64,
    pub c2: f64,
    pub c3: f64,
    pub c5: f64,
    pub m_const: f64,
    pub epsilon: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c2", self.c2), ("c3", self.c3), ("c5", self.c5), ("m_const", self.m_const)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        check_epsilon(self.epsilon)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}"));
    }
    Ok(())
}

/// Intermediate quantities of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub k1: f64,
    pub k2: f64,
    /// The three candidates of the max, in order.
    pub terms: [f64; 3],
    pub n0: f64,
}

pub fn bound_terms(inputs: &BoundInputs) -> Result<BoundTerms> {
    inputs.validate()?;
    let BoundInputs { c0, c2, c3, c5, m_const, epsilon } = *inputs;
    let k1 = (c0.sqrt() / m_const).powf(2.0 / (1.0 - 2.0 * epsilon));
    let k2 = (2.0 * m_const / c5).powf(1.0 / epsilon);
    let term = |k: f64| (2.0 * k / c3) * (c2 * k / c3).ln();
    let terms = [47.0 / c2, term(k1), term(k2)];
    let n0 = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundTerms { k1, k2, terms, n0 })
}

pub fn n0_bound(inputs: &BoundInputs) -> Result<f64> {
    Ok(bound_terms(inputs)?.n0)
}

/// `M = 2^{2ε−1} C₀^ε C₅^{1−2ε}`, the threshold constant that balances `k₁ = k₂ = 4C₀/C₅²`.
pub fn optimal_m(c0: f64, c5: f64, epsilon: f64) -> f64 {
    2f64.powf(2.0 * epsilon - 1.0) * c0.powf(epsilon) * c5.powf(1.0 - 2.0 * epsilon)
}

/// Bound at the optimal `M`: `max{47/C₂, (8C₀/(C₃C₅²)) log(4C₂C₀/(C₃C₅²))}`.
///
/// The closed form is cross-checked against [`n0_bound`] evaluated at [`optimal_m`].
pub fn n0_optimal(c0: f64, c2: f64, c3: f64, c5: f64, epsilon: f64) -> Result<f64> {
    let m_const = optimal_m(c0, c5, epsilon);
    let inputs = BoundInputs { c0, c2, c3, c5, m_const, epsilon };
    inputs.validate()?;
    let k = 4.0 * c0 / (c5 * c5);
    let closed = (47.0 / c2).max((2.0 * k / c3) * (c2 * k / c3).ln());
    let general = n0_bound(&inputs)?;
    let scale = closed.abs().max(general.abs()).max(47.0 / c2);
    if (closed - general).abs() > 1e-9 * scale {
        return Err(Error::NumericFailure(format!(
            "optimal-M bound {closed} disagrees with general bound {general}"
        )));
    }
    Ok(closed)
}

/// Scans `N` from just above `max{47, 2t log t}` up to `n_max` and returns the first
/// `N` violating `log N / N < 1/t`, if any.
pub fn log_ratio_violation(t: f64, n_max: u64) -> Option<u64> {
    let start = 47f64.max(2.0 * t * t.ln()).floor() as u64 + 1;
    (start..=n_max).find(|&n| {
        let nf = n as f64;
        nf.ln() / nf >= 1.0 / t
    })
}
