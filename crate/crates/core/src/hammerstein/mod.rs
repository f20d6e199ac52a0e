//! Hammerstein systems: a static nonlinearity `f(u) = Σ c_j g_j(u)` feeding an ARX block
//!
//! ```text
//! y_{k+1} = a_1 y_k + … + a_p y_{k+1−p} + b_1 f(u_k) + … + b_q f(u_{k+1−q}) + w_{k+1}
//! ```
//!
//! The model is linear in `θ = (a_1..a_p, b_1c_1..b_1c_m, …, b_qc_1..b_qc_m)` so the
//! sparse identifier applies directly; zero columns of `M = b cᵀ` mark basis
//! functions that do not contribute.

pub mod basis;
pub mod bound;
pub mod factors;
pub mod pipeline;

use std::collections::BTreeSet;

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rls::RegressionSample;
use crate::sparsifier::SparseEstimate;

pub use basis::{BasisFamily, BasisFunction, BasisParams, BasisSpec};
pub use bound::{n0_bound, n0_optimal, optimal_m, BoundInputs, BoundTerms};
pub use factors::recover_factors;

/// Companion eigenvalues closer than this to the unit circle count as unstable.
pub const STABILITY_TOL: f64 = 1e-9;

/// Roots of `A(z) = 1 − a_1 z − … − a_p z^p` (degree drops when trailing `a` are zero).
pub fn ar_polynomial_roots(a: &[f64]) -> Vec<Complex<f64>> {
    companion_eigenvalues(a)
        .unwrap_or_default()
        .into_iter()
        .filter(|l| l.norm() > 0.0)
        .map(|l| Complex::new(1.0, 0.0) / l)
        .collect()
}

/// Nonzero companion eigenvalues; `None` if the Schur iteration does not converge.
fn companion_eigenvalues(a: &[f64]) -> Option<Vec<Complex<f64>>> {
    // trailing zero coefficients only add zero eigenvalues
    let p = a.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
    if p == 0 {
        return Some(Vec::new());
    }
    let mut c = DMatrix::<f64>::zeros(p, p);
    for (j, &aj) in a[..p].iter().enumerate() {
        c[(0, j)] = aj;
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    let schur = Schur::try_new(c, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// True when every root of `A(z)` lies strictly outside the closed unit disk.
pub fn is_stable(a: &[f64]) -> bool {
    companion_eigenvalues(a).is_some_and(|ev| ev.iter().all(|l| l.norm() < 1.0 - STABILITY_TOL))
}

#[derive(Debug, Clone)]
pub struct HammersteinModel {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    basis: Vec<BasisFunction>,
}

impl HammersteinModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, basis: Vec<BasisFunction>) -> Result<Self> {
        if b.is_empty() {
            return invalid("q must be at least 1");
        }
        if c.is_empty() || c.len() != basis.len() {
            return invalid(format!("c has {} entries but {} basis functions are given", c.len(), basis.len()));
        }
        if a.iter().chain(&b).chain(&c).any(|x| !x.is_finite()) {
            return invalid("model coefficients must be finite");
        }
        if b.iter().map(|x| x * x).sum::<f64>() == 0.0 {
            return invalid("gain vector b must be nonzero");
        }
        if !is_stable(&a) {
            let roots: Vec<String> = ar_polynomial_roots(&a)
                .iter()
                .map(|z| format!("{:.6}{:+.6}i (|z|={:.6})", z.re, z.im, z.norm()))
                .collect();
            return invalid(format!("A(z) is not stable; roots: [{}]", roots.join(", ")));
        }
        Ok(Self { a, b, c, basis })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        if spec.a.len() != spec.p || spec.b.len() != spec.q || spec.c.len() != spec.m || spec.basis.len() != spec.m {
            return invalid(format!(
                "declared p={}, q={}, m={} but got {} a, {} b, {} c and {} basis entries",
                spec.p,
                spec.q,
                spec.m,
                spec.a.len(),
                spec.b.len(),
                spec.c.len(),
                spec.basis.len()
            ));
        }
        let basis = spec.basis.iter().map(BasisFunction::from_spec).collect::<Result<Vec<_>>>()?;
        Self::new(spec.a.clone(), spec.b.clone(), spec.c.clone(), basis)
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn q(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn basis(&self) -> &[BasisFunction] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.p() + self.q() * self.m()
    }

    /// Static nonlinearity `f(u) = Σ c_j g_j(u)`.
    pub fn nonlinearity(&self, u: f64) -> Result<f64> {
        self.c.iter().zip(&self.basis).map(|(c, g)| Ok(c * g.eval(u)?)).sum()
    }

    /// 1-based indices `l` with `c_l = 0`.
    pub fn noneffective_truth(&self) -> BTreeSet<usize> {
        self.c.iter().enumerate().filter(|(_, c)| **c == 0.0).map(|(l, _)| l + 1).collect()
    }
}

/// JSON model file: `{p, q, m, a[], b[], c[], basis: [{kind, params, domain}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub basis: Vec<BasisSpec>,
}

/// Input/output record, `u[k-1] = u_k` and `y[k-1] = y_k` for `k = 1..n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IoRecord {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl IoRecord {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Runs the system for `inputs.len()` steps.
///
/// `y_init[i]` holds `y_{−i}` (so `y_init[0] = y_0`); input terms that would
/// reference `u_j` with `j ≤ 0` are dropped.
pub fn simulate(model: &HammersteinModel, inputs: &[f64], noise: &[f64], y_init: &[f64]) -> Result<IoRecord> {
    let n = inputs.len();
    if noise.len() != n {
        return invalid(format!("{} inputs but {} noise values", n, noise.len()));
    }
    if y_init.len() != model.p() {
        return invalid(format!("y_init has {} values, expected p = {}", y_init.len(), model.p()));
    }
    let f: Vec<f64> = inputs.iter().map(|&u| model.nonlinearity(u)).collect::<Result<_>>()?;
    let mut y = Vec::with_capacity(n);
    for t in 1..=n {
        let mut acc = noise[t - 1];
        for (i, ai) in model.a.iter().enumerate() {
            let lag = t as isize - (i as isize + 1);
            acc += ai * if lag >= 1 { y[lag as usize - 1] } else { y_init[(-lag) as usize] };
        }
        for (i, bi) in model.b.iter().enumerate() {
            let lag = t as isize - (i as isize + 1);
            if lag >= 1 {
                acc += bi * f[lag as usize - 1];
            }
        }
        y.push(acc);
    }
    Ok(IoRecord { u: inputs.to_vec(), y })
}

/// Builds `φ_k = (y_k..y_{k+1−p}, g(u_k)..g(u_{k+1−q}))` paired with `y_{k+1}` for
/// every `k` whose lags all lie inside the record.
pub fn build_regressors(io: &IoRecord, p: usize, q: usize, basis: &[BasisFunction]) -> Result<Vec<RegressionSample>> {
    let n = io.len();
    if io.u.len() != n {
        return invalid("input and output sequences differ in length");
    }
    let m = basis.len();
    let r = p + q * m;
    if r == 0 {
        return invalid("regressor would be empty");
    }
    let g: Vec<Vec<f64>> =
        io.u.iter().map(|&u| basis.iter().map(|b| b.eval(u)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let k0 = p.max(q).max(1);
    let mut out = Vec::with_capacity(n.saturating_sub(k0));
    for k in k0..n {
        let mut phi = Vec::with_capacity(r);
        for i in 0..p {
            phi.push(io.y[k - 1 - i]);
        }
        for i in 0..q {
            phi.extend_from_slice(&g[k - 1 - i]);
        }
        out.push(RegressionSample::new(DVector::from_vec(phi), io.y[k]));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedTheta {
    pub theta: DVector<f64>,
    pub p: usize,
    pub q: usize,
    pub m: usize,
}

pub fn pack_theta(model: &HammersteinModel) -> PackedTheta {
    let mut theta = model.a.clone();
    for bi in &model.b {
        theta.extend(model.c.iter().map(|cj| bi * cj));
    }
    PackedTheta { theta: DVector::from_vec(theta), p: model.p(), q: model.q(), m: model.m() }
}

/// Reads entries `p+1..p+q·m` into the `q×m` matrix `M` with `M[(i, l)] = (b_{i+1} c_{l+1})`.
pub fn unpack_m(beta: &DVector<f64>, p: usize, q: usize, m: usize) -> Result<DMatrix<f64>> {
    if beta.len() != p + q * m {
        return invalid(format!("vector has dimension {}, expected p + q·m = {}", beta.len(), p + q * m));
    }
    Ok(DMatrix::from_fn(q, m, |i, l| beta[p + i * m + l]))
}

/// 1-based indices of basis functions whose column of `M` is entirely zero.
pub fn effective_basis(sparse_beta: &SparseEstimate, p: usize, q: usize, m: usize) -> Result<BTreeSet<usize>> {
    let mm = unpack_m(&sparse_beta.beta, p, q, m)?;
    Ok((0..m).filter(|&l| mm.column(l).iter().all(|x| *x == 0.0)).map(|l| l + 1).collect())
}
