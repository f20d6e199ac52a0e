//! Scalar basis functions for the static nonlinearity.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::jacobi_eigen;
use crate::error::{invalid, Result};

/// Relative eigenvalue floor below which a basis Gram matrix is reported as rank deficient.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// `x^degree`
    Monomial,
    /// Legendre polynomial of the given degree, mapped onto the declared domain.
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisParams {
    pub degree: u32,
}

/// JSON form of a built-in basis function: `{kind, params, domain}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub kind: BasisFamily,
    pub params: BasisParams,
    pub domain: [f64; 2],
}

#[derive(Clone)]
enum Kind {
    Builtin(BasisFamily, u32),
    Custom(String, Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A scalar function `g_j` with a declared input domain `[lo, hi]`.
#[derive(Clone)]
pub struct BasisFunction {
    kind: Kind,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Builtin(fam, d) => write!(f, "{fam:?}({d}) on [{}, {}]", self.lo, self.hi),
            Kind::Custom(name, _) => write!(f, "{name} on [{}, {}]", self.lo, self.hi),
        }
    }
}

fn check_domain(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return invalid(format!("basis domain [{lo}, {hi}] must be a finite nonempty interval"));
    }
    Ok(())
}

fn legendre(degree: u32, t: f64) -> f64 {
    // Bonnet recursion
    let (mut p0, mut p1) = (1.0, t);
    if degree == 0 {
        return p0;
    }
    for k in 1..degree {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

impl BasisFunction {
    pub fn monomial(degree: u32, lo: f64, hi: f64) -> Result<Self> {
        check_domain(lo, hi)?;
        Ok(Self { kind: Kind::Builtin(BasisFamily::Monomial, degree), lo, hi })
    }

    pub fn legendre(degree: u32, lo: f64, hi: f64) -> Result<Self> {
        check_domain(lo, hi)?;
        Ok(Self { kind: Kind::Builtin(BasisFamily::Legendre, degree), lo, hi })
    }

    /// Registers a user function. Custom functions cannot be written back to JSON.
    pub fn custom<F>(name: impl Into<String>, lo: f64, hi: f64, func: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_domain(lo, hi)?;
        Ok(Self { kind: Kind::Custom(name.into(), Arc::new(func)), lo, hi })
    }

    pub fn from_spec(spec: &BasisSpec) -> Result<Self> {
        let [lo, hi] = spec.domain;
        match spec.kind {
            BasisFamily::Monomial => Self::monomial(spec.params.degree, lo, hi),
            BasisFamily::Legendre => Self::legendre(spec.params.degree, lo, hi),
        }
    }

    pub fn to_spec(&self) -> Option<BasisSpec> {
        match &self.kind {
            Kind::Builtin(kind, degree) => {
                Some(BasisSpec { kind: *kind, params: BasisParams { degree: *degree }, domain: [self.lo, self.hi] })
            }
            Kind::Custom(..) => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Evaluates without the domain check.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Builtin(BasisFamily::Monomial, d) => x.powi(*d as i32),
            Kind::Builtin(BasisFamily::Legendre, d) => {
                let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
                legendre(*d, t)
            }
            Kind::Custom(_, f) => f(x),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return invalid(format!("input {x} outside basis domain [{}, {}]", self.lo, self.hi));
        }
        Ok(self.eval_unchecked(x))
    }
}

/// Intersection of all declared domains.
pub fn common_domain(basis: &[BasisFunction]) -> Result<(f64, f64)> {
    let lo = basis.iter().map(|g| g.lo).fold(f64::NEG_INFINITY, f64::max);
    let hi = basis.iter().map(|g| g.hi).fold(f64::INFINITY, f64::min);
    if basis.is_empty() || !(lo < hi) {
        return invalid("basis functions have no common domain");
    }
    Ok((lo, hi))
}

/// `λ_min / λ_max` of the Gram matrix of `{1, g_1, ..., g_m}` over the sample points.
///
/// Values below [`RANK_TOL`] indicate the functions are numerically dependent on these inputs.
pub fn gram_rank_ratio(basis: &[BasisFunction], points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return invalid("need at least one sample point");
    }
    let m = basis.len() + 1;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut row = vec![0.0; m];
    for &x in points {
        row[0] = 1.0;
        for (j, g) in basis.iter().enumerate() {
            row[j + 1] = g.eval(x)?;
        }
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    let eig = jacobi_eigen(&gram)?;
    let max = eig.values[m - 1];
    Ok(if max > 0.0 { eig.values[0].max(0.0) / max } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_and_legendre_values() {
        let g = BasisFunction::monomial(3, -1.0, 1.0).unwrap();
        assert_eq!(g.eval(0.5).unwrap(), 0.125);
        assert!(g.eval(1.5).is_err());
        let l2 = BasisFunction::legendre(2, 0.0, 2.0).unwrap();
        // P2(t) = (3t² − 1)/2 at t = 0 (x = 1) and t = 1 (x = 2)
        assert_eq!(l2.eval(1.0).unwrap(), -0.5);
        assert_eq!(l2.eval(2.0).unwrap(), 1.0);
        assert_eq!(BasisFunction::legendre(0, 0.0, 1.0).unwrap().eval(0.3).unwrap(), 1.0);
    }

    #[test]
    fn rejects_empty_domain() {
        assert!(BasisFunction::monomial(1, 1.0, 1.0).is_err());
        assert!(BasisFunction::monomial(1, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec: BasisSpec =
            serde_json::from_str(r#"{"kind":"monomial","params":{"degree":2},"domain":[-1,1]}"#).unwrap();
        let g = BasisFunction::from_spec(&spec).unwrap();
        assert_eq!(g.to_spec().unwrap(), spec);
        let c = BasisFunction::custom("tanh", -1.0, 1.0, f64::tanh).unwrap();
        assert!(c.to_spec().is_none());
        assert_eq!(c.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn rank_check_flags_duplicates() {
        let pts: Vec<f64> = (0..101).map(|i| -1.0 + 0.02 * i as f64).collect();
        let good: Vec<_> = (1..=3).map(|d| BasisFunction::monomial(d, -1.0, 1.0).unwrap()).collect();
        assert!(gram_rank_ratio(&good, &pts).unwrap() > RANK_TOL);
        let dup = vec![good[0].clone(), good[0].clone()];
        assert!(gram_rank_ratio(&dup, &pts).unwrap() < RANK_TOL);
        // degree 0 duplicates the constant
        let constant = vec![BasisFunction::monomial(0, -1.0, 1.0).unwrap()];
        assert!(gram_rank_ratio(&constant, &pts).unwrap() < RANK_TOL);
    }
}
