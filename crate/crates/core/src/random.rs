//! Seeded random streams.
//!
//! All generators are ChaCha8 seeded from a `u64`; Gaussian draws use
//! `rand_distr::StandardNormal` (ziggurat). Replicate `j` of a campaign seeded
//! with `s` uses the sub-seed `s ^ (j · 0x9E3779B97F4A7C15)` (wrapping multiply),
//! so results do not depend on how replicates are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SEED_SPLIT: u64 = 0x9E37_79B9_7F4A_7C15;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    seed ^ (replicate as u64).wrapping_mul(SEED_SPLIT)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    #[default]
    Gaussian,
}

/// Observation noise `w_{k+1}`: zero-mean with the given variance.
///
/// A variance of exactly zero gives a noiseless stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub law: NoiseLaw,
    pub variance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(variance: f64, seed: u64) -> Result<Self> {
        let spec = Self { law: NoiseLaw::Gaussian, variance, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return invalid(format!("noise variance must be nonnegative and finite, got {}", self.variance));
        }
        Ok(())
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// One draw from an external generator.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            NoiseLaw::Gaussian => self.std_dev() * standard_normal(rng),
        }
    }

    /// `n` draws from this spec's own seed.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        let mut rng = rng_from_seed(self.seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean;

    #[test]
    fn replicate_zero_keeps_seed() {
        assert_eq!(replicate_seed(42, 0), 42);
        assert_ne!(replicate_seed(42, 1), replicate_seed(42, 2));
    }

    #[test]
    fn noise_is_reproducible() {
        let spec = NoiseSpec::gaussian(0.1, 7).unwrap();
        assert_eq!(spec.sample(100), spec.sample(100));
        assert!(NoiseSpec::gaussian(-1.0, 0).is_err());
        assert!(NoiseSpec::gaussian(0.0, 0).unwrap().sample(5).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000;
        let spec = NoiseSpec::gaussian(0.1, 2024).unwrap();
        let draws = spec.sample(n);
        let m = mean(&draws);
        let var = draws.iter().map(|w| (w - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sigma2 = 0.1;
        // standard errors of the sample mean and variance for a normal law
        let se_mean = (sigma2 / n as f64).sqrt();
        let se_var = sigma2 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(m.abs() < 5.0 * se_mean, "mean {m}");
        assert!((var - sigma2).abs() < 5.0 * se_var, "var {var}");
    }
}
