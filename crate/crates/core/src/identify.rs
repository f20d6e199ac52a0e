//! Streaming sparse identification: one RLS update followed by thresholding per sample.

use nalgebra::DVector;

use crate::error::Result;
use crate::rls::{ExcitationStats, RegressionSample, RlsState, UpdateReport};
use crate::sparsifier::{sparsify, SparseEstimate, ThresholdSchedule};

/// Everything observed after consuming sample `n`.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub n: usize,
    pub theta: DVector<f64>,
    pub estimate: SparseEstimate,
    pub stats: ExcitationStats,
    pub update: UpdateReport,
}

#[derive(Debug, Clone)]
pub struct SparseIdentifier {
    state: RlsState,
    schedule: ThresholdSchedule,
}

impl SparseIdentifier {
    pub fn new(state: RlsState, schedule: ThresholdSchedule) -> Result<Self> {
        Ok(Self { state, schedule: schedule.validated()? })
    }

    pub fn state(&self) -> &RlsState {
        &self.state
    }

    pub fn schedule(&self) -> &ThresholdSchedule {
        &self.schedule
    }

    pub fn push(&mut self, sample: &RegressionSample) -> Result<StepRecord> {
        let update = self.state.step(sample)?;
        let n = self.state.step_count();
        let stats = self.state.excitation_stats()?;
        let alpha = self.schedule.threshold_value(&stats, n)?;
        let estimate = sparsify(self.state.theta(), alpha);
        Ok(StepRecord { n, theta: self.state.theta().clone(), estimate, stats, update })
    }

    /// Feeds a whole stream, returning one record per sample.
    pub fn run(&mut self, samples: &[RegressionSample]) -> Result<Vec<StepRecord>> {
        samples.iter().map(|s| self.push(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_follow_the_stream() {
        let state = RlsState::zeros(2, 10.0).unwrap();
        let mut id = SparseIdentifier::new(state, ThresholdSchedule::log_over_n(0.3).unwrap()).unwrap();
        let samples: Vec<_> = (0..20)
            .map(|k| {
                let a = ((k * 7) % 5) as f64 - 2.0;
                let b = ((k * 3) % 4) as f64 - 1.5;
                RegressionSample::from_slice(&[a, b], 2.0 * a)
            })
            .collect();
        let recs = id.run(&samples).unwrap();
        assert_eq!(recs.len(), 20);
        assert_eq!(recs[0].estimate.alpha_used, 1.0);
        let last = recs.last().unwrap();
        assert_eq!(last.n, 20);
        assert_eq!(last.estimate.beta[1], 0.0);
        assert!((last.estimate.beta[0] - 2.0).abs() < 0.05);
    }
}
