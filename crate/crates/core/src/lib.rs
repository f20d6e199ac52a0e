//! Streaming sparse system identification.
//!
//! A recursive least-squares estimate is hard-thresholded after every sample
//! with a data-driven threshold `α_n`, producing exactly sparse estimates and a
//! running estimate of the zero set. The crate also ships a coordinate-descent
//! LASSO baseline, Hammerstein-system tooling with a finite-sample recovery
//! bound, and seeded Monte-Carlo campaigns.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod hammerstein;
pub mod identify;
pub mod io;
pub mod lasso;
pub mod numeric;
pub mod random;
pub mod rls;
pub mod sparsifier;

pub use error::{Error, Result};
pub use identify::{SparseIdentifier, StepRecord};
pub use rls::{batch_ls, ExcitationStats, RegressionSample, RlsState, UpdateReport};
pub use sparsifier::{sparsify, track_support, ScheduleKind, SetConvergenceReport, SparseEstimate, ThresholdSchedule};
