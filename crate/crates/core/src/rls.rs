//! Recursive least-squares state with an explicitly tracked information matrix.
//!
//! The recursion is
//!
//! ```text
//! a_k     = 1 / (1 + φ_kᵀ P_k φ_k)
//! P_{k+1} = P_k − a_k P_k φ_k φ_kᵀ P_k
//! θ_{k+1} = θ_k + a_k P_k φ_k (y_{k+1} − φ_kᵀ θ_k)
//! ```
//!
//! Alongside `P` the state keeps `F = P_0⁻¹ + Σ φ_k φ_kᵀ` and the regressor
//! energy `R = 1 + Σ ‖φ_k‖²`, which feed the excitation diagnostics and the
//! threshold schedules.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::min_eigenvalue;
use crate::error::{invalid, Result};
use crate::numeric::CompensatedSum;

/// One `(φ_k, y_{k+1})` pair of the regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub phi: DVector<f64>,
    pub y: f64,
}

impl RegressionSample {
    pub fn new(phi: DVector<f64>, y: f64) -> Self {
        Self { phi, y }
    }

    pub fn from_slice(phi: &[f64], y: f64) -> Self {
        Self { phi: DVector::from_column_slice(phi), y }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.phi.iter().all(|x| x.is_finite())
    }
}

/// Gain and innovation of a single update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub gain: f64,
    pub innovation: f64,
}

/// Excitation statistics derived from the information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationStats {
    pub r_n: f64,
    pub lambda_min: f64,
    /// `log R_n / λ_min`
    pub ratio_weakest: f64,
    /// `(R_n / λ_min) · sqrt(log R_n / λ_min)`
    pub ratio_zhao: f64,
}

impl ExcitationStats {
    pub fn from_parts(r_n: f64, lambda_min: f64) -> Self {
        let ratio_weakest = r_n.ln() / lambda_min;
        Self { r_n, lambda_min, ratio_weakest, ratio_zhao: (r_n / lambda_min) * ratio_weakest.sqrt() }
    }

    /// `R_n / λ_min`, the base of the ratio-power threshold schedule.
    pub fn condition_ratio(&self) -> f64 {
        self.r_n / self.lambda_min
    }
}

#[derive(Debug, Clone)]
pub struct RlsState {
    theta: DVector<f64>,
    p: DMatrix<f64>,
    f: DMatrix<f64>,
    energy: CompensatedSum,
    step: usize,
}

impl RlsState {
    /// Starts from `θ₀ = theta0`, `P₀ = p0_scale · I`.
    pub fn new(r: usize, theta0: &DVector<f64>, p0_scale: f64) -> Result<Self> {
        if r == 0 {
            return invalid("regressor dimension must be at least 1");
        }
        if !(p0_scale > 0.0 && p0_scale.is_finite()) {
            return invalid(format!("p0_scale must be positive and finite, got {p0_scale}"));
        }
        if theta0.len() != r {
            return invalid(format!("theta0 has dimension {}, expected {r}", theta0.len()));
        }
        if theta0.iter().any(|x| !x.is_finite()) {
            return invalid("theta0 has non-finite entries");
        }
        Ok(Self {
            theta: theta0.clone(),
            p: DMatrix::identity(r, r) * p0_scale,
            f: DMatrix::identity(r, r) * (1.0 / p0_scale),
            energy: CompensatedSum::new(1.0),
            step: 0,
        })
    }

    pub fn zeros(r: usize, p0_scale: f64) -> Result<Self> {
        Self::new(r, &DVector::zeros(r), p0_scale)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Information matrix `P₀⁻¹ + Σ φφᵀ`.
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// `R_n = 1 + Σ ‖φ_k‖²`.
    pub fn r_energy(&self) -> f64 {
        self.energy.value()
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Consumes one sample.
    pub fn step(&mut self, sample: &RegressionSample) -> Result<UpdateReport> {
        if sample.dim() != self.dim() {
            return invalid(format!(
                "sample dimension {} does not match state dimension {}",
                sample.dim(),
                self.dim()
            ));
        }
        if !sample.is_finite() {
            return invalid("sample has non-finite entries");
        }
        let phi = &sample.phi;
        let p_phi = &self.p * phi;
        let quad = phi.dot(&p_phi);
        let gain = 1.0 / (1.0 + quad);
        let innovation = sample.y - phi.dot(&self.theta);

        // θ uses the pre-update P.
        self.theta.axpy(gain * innovation, &p_phi, 1.0);
        self.p.ger(-gain, &p_phi, &p_phi, 1.0);
        let sym = (&self.p + self.p.transpose()) * 0.5;
        self.p = sym;
        self.f.ger(1.0, phi, phi, 1.0);
        self.energy.add(phi.norm_squared());
        self.step += 1;
        Ok(UpdateReport { gain, innovation })
    }

    pub fn excitation_stats(&self) -> Result<ExcitationStats> {
        Ok(ExcitationStats::from_parts(self.r_energy(), min_eigenvalue(&self.f)?))
    }

    /// Max-abs entry of `P·F − I`.
    pub fn inverse_residual(&self) -> f64 {
        let r = self.dim();
        (&self.p * &self.f - DMatrix::<f64>::identity(r, r)).amax()
    }
}

/// Regularized batch least squares, the closed form the recursion reproduces:
/// `argmin (1/p0_scale)‖θ − θ₀‖² + Σ (y_k − φ_kᵀθ)²`.
pub fn batch_ls(samples: &[RegressionSample], theta0: &DVector<f64>, p0_scale: f64) -> Result<DVector<f64>> {
    let r = theta0.len();
    if r == 0 {
        return invalid("theta0 must be non-empty");
    }
    if !(p0_scale > 0.0 && p0_scale.is_finite()) {
        return invalid(format!("p0_scale must be positive and finite, got {p0_scale}"));
    }
    let mut f = DMatrix::<f64>::identity(r, r) * (1.0 / p0_scale);
    let mut rhs = theta0 * (1.0 / p0_scale);
    for (k, s) in samples.iter().enumerate() {
        if s.dim() != r {
            return invalid(format!("sample {} has dimension {}, expected {r}", k + 1, s.dim()));
        }
        f.ger(1.0, &s.phi, &s.phi, 1.0);
        rhs.axpy(s.y, &s.phi, 1.0);
    }
    match f.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&rhs)),
        None => f
            .lu()
            .solve(&rhs)
            .ok_or_else(|| crate::Error::NumericFailure("information matrix is singular".into())),
    }
}

/// Tracks `‖θ_n − θ‖² / (log R_n / λ_min^n)` along a trajectory.
#[derive(Debug, Clone)]
pub struct ErrorBoundMonitor {
    truth: DVector<f64>,
    max_ratio: f64,
    observations: usize,
}

impl ErrorBoundMonitor {
    pub fn new(truth: DVector<f64>) -> Self {
        Self { truth, max_ratio: 0.0, observations: 0 }
    }

    /// Records the current estimate. Steps where `log R_n = 0` carry no information and are skipped.
    pub fn observe(&mut self, theta: &DVector<f64>, stats: &ExcitationStats) -> Option<f64> {
        if stats.ratio_weakest <= 0.0 {
            return None;
        }
        let ratio = (theta - &self.truth).norm_squared() / stats.ratio_weakest;
        self.max_ratio = self.max_ratio.max(ratio);
        self.observations += 1;
        Some(ratio)
    }

    pub fn max_ratio(&self) -> f64 {
        self.max_ratio
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn within(&self, c_max: f64) -> bool {
        self.max_ratio < c_max
    }
}
