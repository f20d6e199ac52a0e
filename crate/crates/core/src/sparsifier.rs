//! Threshold schedules, hard thresholding and support tracking.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rls::ExcitationStats;

/// How the threshold `α_n` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `M · (R_n / λ_min^n)^ε`
    RatioPower,
    /// `(log n / n)^ε`
    LogOverN,
    /// `fixed_values[n]`, 1-based.
    FixedSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSchedule {
    pub kind: ScheduleKind,
    #[serde(default = "default_m_const")]
    pub m_const: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_values: Option<Vec<f64>>,
}

fn default_m_const() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.25
}

impl ThresholdSchedule {
    pub fn ratio_power(m_const: f64, epsilon: f64) -> Result<Self> {
        Self { kind: ScheduleKind::RatioPower, m_const, epsilon, fixed_values: None }.validated()
    }

    pub fn log_over_n(epsilon: f64) -> Result<Self> {
        Self { kind: ScheduleKind::LogOverN, m_const: 1.0, epsilon, fixed_values: None }.validated()
    }

    pub fn fixed(values: Vec<f64>) -> Result<Self> {
        Self { kind: ScheduleKind::FixedSequence, m_const: 1.0, epsilon: 0.25, fixed_values: Some(values) }
            .validated()
    }

    /// The schedule of the state-space example: `0.1 (R_n/λ_min^n)^{1/4}`.
    pub fn example1_default() -> Self {
        Self { kind: ScheduleKind::RatioPower, m_const: 0.1, epsilon: 0.25, fixed_values: None }
    }

    /// Checks the invariants; call after deserializing.
    pub fn validated(self) -> Result<Self> {
        if !(self.m_const > 0.0 && self.m_const.is_finite()) {
            return invalid(format!("m_const must be positive, got {}", self.m_const));
        }
        match self.kind {
            ScheduleKind::RatioPower | ScheduleKind::LogOverN => {
                if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
                    return invalid(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon));
                }
            }
            ScheduleKind::FixedSequence => match &self.fixed_values {
                None => return invalid("fixed_sequence schedule requires fixed_values"),
                Some(v) if v.iter().any(|a| !(*a > 0.0 && a.is_finite())) => {
                    return invalid("fixed_values must be positive and finite")
                }
                _ => {}
            },
        }
        Ok(self)
    }

    /// `α_n` for step `n ≥ 1`.
    pub fn threshold_value(&self, stats: &ExcitationStats, n: usize) -> Result<f64> {
        if n == 0 {
            return invalid("step index must be at least 1");
        }
        match self.kind {
            ScheduleKind::RatioPower => Ok(self.m_const * stats.condition_ratio().powf(self.epsilon)),
            ScheduleKind::LogOverN => {
                if n == 1 {
                    // log(1)/1 = 0 would give a zero threshold
                    return Ok(1.0);
                }
                let nf = n as f64;
                Ok((nf.ln() / nf).powf(self.epsilon))
            }
            ScheduleKind::FixedSequence => {
                let values = self.fixed_values.as_deref().unwrap_or(&[]);
                values.get(n - 1).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "fixed threshold sequence has {} values, step {n} requested",
                        values.len()
                    ))
                })
            }
        }
    }
}

/// Thresholded estimate and its zero-index set (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub beta: DVector<f64>,
    pub support_zero: BTreeSet<usize>,
    pub alpha_used: f64,
}

/// Zeroes every entry with `|θ̂(l)| < α`; entries at exactly `α` are kept.
pub fn sparsify(theta_hat: &DVector<f64>, alpha: f64) -> SparseEstimate {
    let mut beta = theta_hat.clone();
    let mut support_zero = BTreeSet::new();
    for (l, b) in beta.iter_mut().enumerate() {
        if b.abs() < alpha {
            *b = 0.0;
        }
        if *b == 0.0 {
            support_zero.insert(l + 1);
        }
    }
    SparseEstimate { beta, support_zero, alpha_used: alpha }
}

/// Empirical set-convergence summary of a support history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetConvergenceReport {
    /// 1-based position of the first entry after which the support never changes.
    pub settled_index: Option<usize>,
    pub final_support: BTreeSet<usize>,
    pub matches_truth: Option<bool>,
}

pub fn track_support(history: &[SparseEstimate], truth: Option<&BTreeSet<usize>>) -> Result<SetConvergenceReport> {
    let supports: Vec<&BTreeSet<usize>> = history.iter().map(|h| &h.support_zero).collect();
    track_support_sets(&supports, truth)
}

/// Same as [`track_support`] over bare support sets.
pub fn track_support_sets(
    supports: &[&BTreeSet<usize>],
    truth: Option<&BTreeSet<usize>>,
) -> Result<SetConvergenceReport> {
    let Some(last) = supports.last() else {
        return invalid("support history is empty");
    };
    let n = supports.len();
    let settled_index = if n >= 2 && supports[n - 2] != *last {
        None
    } else {
        let mut first = n;
        while first > 1 && supports[first - 2] == *last {
            first -= 1;
        }
        Some(first)
    };
    Ok(SetConvergenceReport {
        settled_index,
        final_support: (*last).clone(),
        matches_truth: truth.map(|t| t == *last),
    })
}

/// `sqrt(log R_n / λ_min^n) / α_n` along a history of statistics (n = 1, 2, ...).
pub fn schedule_validity_trace(schedule: &ThresholdSchedule, stats_history: &[ExcitationStats]) -> Result<Vec<f64>> {
    if stats_history.is_empty() {
        return invalid("statistics history is empty");
    }
    stats_history
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let alpha = schedule.threshold_value(st, i + 1)?;
            Ok(st.ratio_weakest.max(0.0).sqrt() / alpha)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats_with_ratio(ratio: f64) -> ExcitationStats {
        ExcitationStats::from_parts(ratio * 2.0, 2.0)
    }

    #[test]
    fn ratio_power_value() {
        let s = ThresholdSchedule::ratio_power(0.1, 0.25).unwrap();
        let a = s.threshold_value(&stats_with_ratio(16.0), 5).unwrap();
        assert!((a - 0.2).abs() < 1e-15);
    }

    #[test]
    fn epsilon_bounds_are_open() {
        assert!(ThresholdSchedule::log_over_n(0.5).is_err());
        assert!(ThresholdSchedule::log_over_n(0.0).is_err());
        assert!(ThresholdSchedule::ratio_power(1.0, 0.5).is_err());
        assert!(ThresholdSchedule::ratio_power(0.0, 0.25).is_err());
        assert!(ThresholdSchedule::log_over_n(0.49).is_ok());
    }

    #[test]
    fn log_over_n_values() {
        let s = ThresholdSchedule::log_over_n(0.25).unwrap();
        let st = stats_with_ratio(1.0);
        let a = s.threshold_value(&st, 8).unwrap();
        assert!(((8f64.ln() / 8.0) - 0.2599).abs() < 1e-4);
        assert!((a - 0.7140).abs() < 1e-4);
        assert_eq!(s.threshold_value(&st, 1).unwrap(), 1.0);
        assert!(s.threshold_value(&st, 0).is_err());
    }

    #[test]
    fn fixed_sequence_exhaustion() {
        let s = ThresholdSchedule::fixed(vec![0.5, 0.25]).unwrap();
        let st = stats_with_ratio(1.0);
        assert_eq!(s.threshold_value(&st, 2).unwrap(), 0.25);
        assert!(s.threshold_value(&st, 3).is_err());
        assert!(ThresholdSchedule::fixed(vec![0.5, 0.0]).is_err());
    }

    #[test]
    fn sparsify_examples() {
        let e = sparsify(&DVector::from_vec(vec![0.8, 0.003]), 0.01);
        assert_eq!(e.beta.as_slice(), &[0.8, 0.0]);
        assert_eq!(e.support_zero, BTreeSet::from([2]));

        let e = sparsify(&DVector::from_vec(vec![0.05]), 0.05);
        assert_eq!(e.beta.as_slice(), &[0.05]);
        assert!(e.support_zero.is_empty());
    }

    fn est(zero: &[usize]) -> SparseEstimate {
        SparseEstimate { beta: DVector::zeros(3), support_zero: zero.iter().copied().collect(), alpha_used: 1.0 }
    }

    #[test]
    fn track_support_examples() {
        let h = vec![est(&[1]), est(&[1]), est(&[1])];
        assert_eq!(track_support(&h, None).unwrap().settled_index, Some(1));

        let h = vec![est(&[]), est(&[2]), est(&[2]), est(&[2])];
        let truth = BTreeSet::from([2]);
        let rep = track_support(&h, Some(&truth)).unwrap();
        assert_eq!(rep.settled_index, Some(2));
        assert_eq!(rep.matches_truth, Some(true));

        let h = vec![est(&[2]), est(&[2]), est(&[3])];
        let rep = track_support(&h, Some(&truth)).unwrap();
        assert_eq!(rep.settled_index, None);
        assert_eq!(rep.matches_truth, Some(false));

        assert_eq!(track_support(&[est(&[3])], None).unwrap().settled_index, Some(1));
        assert!(track_support(&[], None).is_err());
    }

    #[test]
    fn validity_trace_basics() {
        let s = ThresholdSchedule::fixed(vec![0.5; 4]).unwrap();
        let fresh = ExcitationStats::from_parts(1.0, 1.0);
        assert_eq!(schedule_validity_trace(&s, &[fresh]).unwrap(), vec![0.0]);
        let st = ExcitationStats::from_parts(10.0, 4.0);
        let trace = schedule_validity_trace(&s, &[st; 4]).unwrap();
        assert!(trace.iter().all(|&t| t == trace[0]));
        assert!(schedule_validity_trace(&s, &[]).is_err());
    }

    #[test]
    fn schedule_json_rejects_unknown_keys() {
        let ok: ThresholdSchedule = serde_json::from_str(r#"{"kind":"log_over_n","epsilon":0.45}"#).unwrap();
        assert_eq!(ok.kind, ScheduleKind::LogOverN);
        assert!(serde_json::from_str::<ThresholdSchedule>(r#"{"kind":"log_over_n","eps":0.45}"#).is_err());
    }

    proptest! {
        #[test]
        fn thresholding_properties(x in prop::collection::vec(-2.0f64..2.0, 1..12), a1 in 1e-6f64..1.5, a2 in 1e-6f64..1.5) {
            let x = DVector::from_vec(x);
            let e = sparsify(&x, a1);
            prop_assert_eq!(&sparsify(&e.beta, a1), &e);
            for l in 0..x.len() {
                prop_assert!((e.beta[l] - x[l]).abs() < a1);
                prop_assert_eq!(e.beta[l] == 0.0, e.support_zero.contains(&(l + 1)));
                if e.beta[l] != 0.0 {
                    prop_assert_eq!(e.beta[l], x[l]);
                }
            }
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(sparsify(&x, lo).support_zero.is_subset(&sparsify(&x, hi).support_zero));
        }
    }
}
