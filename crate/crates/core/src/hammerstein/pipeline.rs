//! End-to-end run: simulate → regressors → sparse identification → effective basis → factors.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::common_domain;
use super::{build_regressors, effective_basis, pack_theta, recover_factors, simulate, unpack_m, HammersteinModel, IoRecord};
use crate::error::{invalid, Result};
use crate::identify::{SparseIdentifier, StepRecord};
use crate::numeric::median;
use crate::random::{replicate_seed, rng_from_seed, NoiseSpec};
use crate::rls::RlsState;
use crate::sparsifier::{SparseEstimate, ThresholdSchedule};

/// Simulation and identification settings for a Hammerstein run (`sim.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    /// Seeds the i.i.d. uniform input sequence.
    #[serde(default)]
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Input law support; defaults to the common basis domain.
    #[serde(default)]
    pub input_range: Option<[f64; 2]>,
    #[serde(default)]
    pub y_init: Option<Vec<f64>>,
    #[serde(default = "default_schedule")]
    pub schedule: ThresholdSchedule,
    #[serde(default = "default_p0_scale")]
    pub p0_scale: f64,
    #[serde(default = "default_factor_tol")]
    pub factor_tol: f64,
    /// First step of the growth-rate window.
    #[serde(default = "default_growth_start")]
    pub growth_start: usize,
}

fn default_schedule() -> ThresholdSchedule {
    ThresholdSchedule { kind: crate::sparsifier::ScheduleKind::LogOverN, m_const: 1.0, epsilon: 0.2, fixed_values: None }
}

fn default_p0_scale() -> f64 {
    100.0
}

fn default_factor_tol() -> f64 {
    1e-10
}

fn default_growth_start() -> usize {
    500
}

impl SimulationConfig {
    pub fn new(n: usize, seed: u64, noise_variance: f64) -> Self {
        Self {
            n,
            seed,
            noise: NoiseSpec { law: Default::default(), variance: noise_variance, seed: replicate_seed(seed, 1) },
            input_range: None,
            y_init: None,
            schedule: default_schedule(),
            p0_scale: default_p0_scale(),
            factor_tol: default_factor_tol(),
            growth_start: default_growth_start(),
        }
    }

    /// Re-seeds inputs with `seed` and noise with its first sub-seed.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.noise.seed = replicate_seed(seed, 1);
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be positive");
        }
        self.noise.validate()?;
        self.schedule.clone().validated()?;
        if !(self.p0_scale > 0.0) {
            return invalid("p0_scale must be positive");
        }
        if !(self.factor_tol > 0.0) {
            return invalid("factor_tol must be positive");
        }
        if let Some([lo, hi]) = self.input_range {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return invalid(format!("input_range [{lo}, {hi}] is empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub r_over_n: f64,
    pub lambda_over_n: f64,
}

/// Linear-growth diagnostic for `R_n` and `λ_min^n` over a window.
///
/// The extremes of `R_n/n` and `λ_min^n/n` on the window are empirical stand-ins
/// for the constants `C₁, C₂` and `C₃, C₄` of the growth bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub rows: Vec<GrowthRow>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Both ratios stay within a factor 10 of their window median.
    pub within_band: bool,
}

/// Builds the growth diagnostic from identification records with `start ≤ n ≤ end`.
pub fn growth_check(records: &[StepRecord], start: usize, end: usize) -> Result<GrowthCheck> {
    let rows: Vec<GrowthRow> = records
        .iter()
        .filter(|r| r.n >= start && r.n <= end)
        .map(|r| GrowthRow {
            n: r.n,
            r_over_n: r.stats.r_n / r.n as f64,
            lambda_over_n: r.stats.lambda_min / r.n as f64,
        })
        .collect();
    if rows.is_empty() {
        return invalid(format!("no records in growth window [{start}, {end}]"));
    }
    let r: Vec<f64> = rows.iter().map(|g| g.r_over_n).collect();
    let l: Vec<f64> = rows.iter().map(|g| g.lambda_over_n).collect();
    let band = |v: &[f64]| {
        let med = median(v);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        med > 0.0 && lo > 0.0 && hi / med <= 10.0 && med / lo <= 10.0
    };
    let within_band = band(&r) && band(&l);
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthCheck { c1: min(&r), c2: max(&r), c3: min(&l), c4: max(&l), within_band, rows })
}

#[derive(Debug, Clone)]
pub struct HammersteinRun {
    pub io: IoRecord,
    pub records: Vec<StepRecord>,
    pub truth: DVector<f64>,
    pub final_estimate: SparseEstimate,
    pub m_hat: DMatrix<f64>,
    /// 1-based indices of basis functions with an all-zero column in `M̂`.
    pub noneffective: BTreeSet<usize>,
    /// `None` when every column of `M̂` was thresholded away.
    pub factors: Option<(DVector<f64>, DVector<f64>)>,
    pub growth: GrowthCheck,
}

impl HammersteinRun {
    /// `‖θ_n − θ‖` of the unthresholded estimate at step `n` (1-based).
    pub fn parameter_error_at(&self, n: usize) -> Option<f64> {
        self.records.get(n.checked_sub(1)?).map(|r| (&r.theta - &self.truth).norm())
    }

    /// `‖M̂ − b̂ĉᵀ‖_F / ‖M̂‖_F`.
    pub fn factor_relative_error(&self) -> Option<f64> {
        let (b, c) = self.factors.as_ref()?;
        Some((&self.m_hat - b * c.transpose()).norm() / self.m_hat.norm())
    }
}

/// Draws `n` i.i.d. uniform inputs on `[lo, hi]`.
pub fn uniform_inputs(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

pub fn run_pipeline(model: &HammersteinModel, config: &SimulationConfig) -> Result<HammersteinRun> {
    config.validate()?;
    let (lo, hi) = match config.input_range {
        Some([lo, hi]) => (lo, hi),
        None => common_domain(model.basis())?,
    };
    let inputs = uniform_inputs(config.n, lo, hi, config.seed);
    let noise = config.noise.sample(config.n);
    let y_init = config.y_init.clone().unwrap_or_else(|| vec![0.0; model.p()]);
    let io = simulate(model, &inputs, &noise, &y_init)?;

    let samples = build_regressors(&io, model.p(), model.q(), model.basis())?;
    if samples.is_empty() {
        return invalid("record too short to form a regressor");
    }
    let state = RlsState::zeros(model.dim(), config.p0_scale)?;
    let mut identifier = SparseIdentifier::new(state, config.schedule.clone())?;
    let records = identifier.run(&samples)?;
    let final_estimate = records.last().map(|r| r.estimate.clone()).expect("non-empty stream");

    let m_hat = unpack_m(&final_estimate.beta, model.p(), model.q(), model.m())?;
    let noneffective = effective_basis(&final_estimate, model.p(), model.q(), model.m())?;
    let factors = if m_hat.iter().all(|x| *x == 0.0) { None } else { Some(recover_factors(&m_hat, config.factor_tol)?) };
    let growth = growth_check(&records, config.growth_start.min(records.len()), records.len())?;

    Ok(HammersteinRun { io, records, truth: pack_theta(model).theta, final_estimate, m_hat, noneffective, factors, growth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hammerstein::BasisFunction;

    fn model() -> HammersteinModel {
        let basis: Vec<_> = (1..=3).map(|d| BasisFunction::monomial(d, -1.0, 1.0).unwrap()).collect();
        HammersteinModel::new(vec![0.5], vec![1.0, 0.6], vec![1.5, 0.0, 1.0], basis).unwrap()
    }

    #[test]
    fn noiseless_error_shrinks() {
        let mut cfg = SimulationConfig::new(3000, 11, 0.0);
        cfg.growth_start = 100;
        let run = run_pipeline(&model(), &cfg).unwrap();
        let early = run.parameter_error_at(300).unwrap();
        let late = run.parameter_error_at(run.records.len()).unwrap();
        assert!(late < early, "{late} !< {early}");
        assert_eq!(run.noneffective, BTreeSet::from([2]));
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg: SimulationConfig = serde_json::from_str(r#"{"n": 100, "noise": {"variance": 0.1}}"#).unwrap();
        assert_eq!(cfg.p0_scale, 100.0);
        assert!(cfg.validate().is_ok());
        assert!(serde_json::from_str::<SimulationConfig>(r#"{"n": 100, "noise": {"variance": 0.1}, "x": 1}"#).is_err());
        let bad = SimulationConfig { input_range: Some([1.0, 1.0]), ..cfg.clone() };
        assert!(bad.validate().is_err());
        let bad = SimulationConfig { n: 0, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn growth_band() {
        let cfg = SimulationConfig::new(1500, 3, 0.1);
        let run = run_pipeline(&model(), &cfg).unwrap();
        assert!(run.growth.within_band);
        assert!(run.growth.c1 <= run.growth.c2 && run.growth.c3 <= run.growth.c4);
        assert!(growth_check(&run.records, 5000, 6000).is_err());
    }
}
