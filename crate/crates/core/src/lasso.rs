//! Batch LASSO baseline solved by cyclic coordinate descent.
//!
//! Objective: `Σ_k (y_k − φ_kᵀβ)² + λ Σ_l |β(l)|` (sum of squares, no intercept).

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::rls::RegressionSample;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Default sweep budget for an `r`-dimensional problem.
pub fn default_max_iter(r: usize) -> usize {
    10 * r.max(1) * 1000
}

/// `λ_n = n^exponent`.
pub fn lambda_schedule(n: usize, exponent: f64) -> f64 {
    (n as f64).powf(exponent)
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

#[derive(Debug, Clone)]
pub struct LassoProblem {
    samples: Vec<RegressionSample>,
    lambda: f64,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl LassoProblem {
    pub fn new(samples: Vec<RegressionSample>, lambda: f64) -> Result<Self> {
        let Some(first) = samples.first() else {
            return invalid("LASSO problem needs at least one sample");
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be nonnegative and finite, got {lambda}"));
        }
        let r = first.dim();
        if r == 0 {
            return invalid("regressors must be non-empty");
        }
        let mut gram = DMatrix::zeros(r, r);
        let mut xty = DVector::zeros(r);
        for (k, s) in samples.iter().enumerate() {
            if s.dim() != r {
                return invalid(format!("sample {} has dimension {}, expected {r}", k + 1, s.dim()));
            }
            if !s.is_finite() {
                return invalid(format!("sample {} has non-finite entries", k + 1));
            }
            gram.ger(1.0, &s.phi, &s.phi, 1.0);
            xty.axpy(s.y, &s.phi, 1.0);
        }
        Ok(Self { samples, lambda, gram, xty })
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> &[RegressionSample] {
        &self.samples
    }

    /// `Σ φ_k φ_kᵀ`
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `Σ φ_k y_k`
    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    /// Gradient of the squared-error term, evaluated from the raw samples.
    fn loss_gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for s in &self.samples {
            let resid = s.y - s.phi.dot(beta);
            g.axpy(-2.0 * resid, &s.phi, 1.0);
        }
        g
    }

    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        let sse: f64 = self.samples.iter().map(|s| (s.y - s.phi.dot(beta)).powi(2)).sum();
        sse + self.lambda * beta.lp_norm(1)
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: DVector<f64>,
    pub kkt_residual: f64,
    /// Full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// 1-based coordinates whose regressor column is identically zero.
    pub degenerate: Vec<usize>,
}

/// Largest violation of the subgradient optimality conditions at `beta`.
pub fn kkt_residual(problem: &LassoProblem, beta: &DVector<f64>) -> Result<f64> {
    if beta.len() != problem.dim() {
        return invalid(format!("beta has dimension {}, expected {}", beta.len(), problem.dim()));
    }
    let g = problem.loss_gradient(beta);
    let lambda = problem.lambda;
    Ok(g.iter()
        .zip(beta.iter())
        .map(|(&gl, &bl)| {
            if bl != 0.0 {
                (gl + lambda * bl.signum()).abs()
            } else {
                (gl.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max))
}

/// Cyclic coordinate descent iterate, exposed so callers can step sweep by sweep.
#[derive(Debug, Clone)]
pub struct CoordinateDescent<'a> {
    problem: &'a LassoProblem,
    beta: DVector<f64>,
    degenerate: Vec<usize>,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(problem: &'a LassoProblem, beta0: &DVector<f64>) -> Result<Self> {
        if beta0.len() != problem.dim() {
            return invalid(format!("beta0 has dimension {}, expected {}", beta0.len(), problem.dim()));
        }
        let degenerate = (0..problem.dim()).filter(|&l| problem.gram[(l, l)] == 0.0).map(|l| l + 1).collect();
        Ok(Self { problem, beta: beta0.clone(), degenerate })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// One pass over coordinates 1..r in order; returns the largest coordinate change.
    pub fn sweep(&mut self) -> f64 {
        let gram = &self.problem.gram;
        let xty = &self.problem.xty;
        let half_lambda = 0.5 * self.problem.lambda;
        let mut max_change: f64 = 0.0;
        for l in 0..self.beta.len() {
            let s = gram[(l, l)];
            if s == 0.0 {
                if self.problem.lambda > 0.0 {
                    max_change = max_change.max(self.beta[l].abs());
                    self.beta[l] = 0.0;
                }
                continue;
            }
            let cross: f64 = (0..self.beta.len()).filter(|&j| j != l).map(|j| gram[(l, j)] * self.beta[j]).sum();
            let z = xty[l] - cross;
            let updated = soft_threshold(z, half_lambda) / s;
            max_change = max_change.max((updated - self.beta[l]).abs());
            self.beta[l] = updated;
        }
        max_change
    }

    /// KKT residual from the cached Gram matrix (cheap, used for stopping).
    fn gram_kkt(&self) -> f64 {
        let g = (&self.problem.gram * &self.beta - &self.problem.xty) * 2.0;
        let lambda = self.problem.lambda;
        g.iter()
            .zip(self.beta.iter())
            .map(|(&gl, &bl)| if bl != 0.0 { (gl + lambda * bl.signum()).abs() } else { (gl.abs() - lambda).max(0.0) })
            .fold(0.0, f64::max)
    }
}

/// Runs coordinate descent from `beta0`.
///
/// Stops once the largest coordinate change drops below `tol` and the KKT
/// residual is below `10·tol`, or once sweeps stop moving the iterate beyond
/// rounding. Hitting `max_iter` is not an error: the last iterate is returned
/// with `converged = false`.
pub fn fit_lasso(problem: &LassoProblem, beta0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<LassoSolution> {
    if !(tol > 0.0) {
        return invalid(format!("tol must be positive, got {tol}"));
    }
    if max_iter == 0 {
        return invalid("max_iter must be positive");
    }
    let mut cd = CoordinateDescent::new(problem, beta0)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let change = cd.sweep();
        iterations += 1;
        let rounding = 8.0 * f64::EPSILON * cd.beta.amax();
        if change <= rounding || (change < tol && cd.gram_kkt() < 10.0 * tol) {
            converged = true;
            break;
        }
    }
    let kkt = kkt_residual(problem, &cd.beta)?;
    Ok(LassoSolution { beta: cd.beta, kkt_residual: kkt, iterations, converged, degenerate: cd.degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rls::batch_ls;

    fn one_d(phis: &[f64], ys: &[f64], lambda: f64) -> LassoProblem {
        let samples = phis.iter().zip(ys).map(|(&p, &y)| RegressionSample::from_slice(&[p], y)).collect();
        LassoProblem::new(samples, lambda).unwrap()
    }

    #[test]
    fn lambda_values() {
        assert!((lambda_schedule(16, 0.75) - 8.0).abs() < 1e-12);
        assert_eq!(lambda_schedule(1, 0.75), 1.0);
        assert!((lambda_schedule(10_000, 0.75) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn scalar_closed_form() {
        let prob = one_d(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        let sol = fit_lasso(&prob, &DVector::zeros(1), DEFAULT_TOL, 100).unwrap();
        // soft(2, 0.5) / 2
        assert!((sol.beta[0] - 0.75).abs() < 1e-15);
        assert!(sol.converged);
        assert!(kkt_residual(&prob, &sol.beta).unwrap() < 1e-10);
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let samples: Vec<_> = (0..30)
            .map(|k| {
                let k = k as f64;
                RegressionSample::from_slice(&[k.sin(), (0.7 * k).cos(), 1.0], 0.3 * k.sin() - 2.0 + 0.01 * k)
            })
            .collect();
        let prob = LassoProblem::new(samples.clone(), 0.0).unwrap();
        let sol = fit_lasso(&prob, &DVector::zeros(3), DEFAULT_TOL, default_max_iter(3)).unwrap();
        let ls = batch_ls(&samples, &DVector::zeros(3), 1e12).unwrap();
        assert!((&sol.beta - &ls).amax() < 1e-6);
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn kill_threshold_gives_zero() {
        let samples: Vec<_> = (0..10)
            .map(|k| RegressionSample::from_slice(&[k as f64 - 4.0, (k % 3) as f64], 0.5 * k as f64))
            .collect();
        let prob0 = LassoProblem::new(samples.clone(), 0.0).unwrap();
        let kill = 2.0 * prob0.xty().amax();
        let prob = LassoProblem::new(samples, kill).unwrap();
        let sol = fit_lasso(&prob, &DVector::zeros(2), DEFAULT_TOL, 1000).unwrap();
        assert_eq!(sol.beta, DVector::zeros(2));
        assert_eq!(kkt_residual(&prob, &sol.beta).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_column_is_flagged() {
        let samples = vec![
            RegressionSample::from_slice(&[1.0, 0.0], 1.0),
            RegressionSample::from_slice(&[2.0, 0.0], 2.0),
        ];
        let prob = LassoProblem::new(samples.clone(), 0.0).unwrap();
        let sol = fit_lasso(&prob, &DVector::from_vec(vec![0.0, 3.0]), DEFAULT_TOL, 100).unwrap();
        assert_eq!(sol.degenerate, vec![2]);
        assert_eq!(sol.beta[1], 3.0);
        assert!((sol.beta[0] - 1.0).abs() < 1e-12);

        let prob = LassoProblem::new(samples, 0.1).unwrap();
        let sol = fit_lasso(&prob, &DVector::from_vec(vec![0.0, 3.0]), DEFAULT_TOL, 100).unwrap();
        assert_eq!(sol.beta[1], 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(LassoProblem::new(vec![], 1.0).is_err());
        assert!(LassoProblem::new(vec![RegressionSample::from_slice(&[1.0], 1.0)], -1.0).is_err());
        let prob = one_d(&[1.0], &[1.0], 1.0);
        assert!(fit_lasso(&prob, &DVector::zeros(2), 1e-8, 10).is_err());
        assert!(fit_lasso(&prob, &DVector::zeros(1), 0.0, 10).is_err());
        assert!(kkt_residual(&prob, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn iteration_cap_returns_last_iterate() {
        let samples: Vec<_> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.1;
                RegressionSample::from_slice(&[1.0, 1.0 + 1e-3 * t], t)
            })
            .collect();
        let prob = LassoProblem::new(samples, 0.0).unwrap();
        let sol = fit_lasso(&prob, &DVector::zeros(2), DEFAULT_TOL, 3).unwrap();
        assert_eq!(sol.iterations, 3);
        assert!(!sol.converged);
        assert!(sol.kkt_residual > 0.0);
    }
}
