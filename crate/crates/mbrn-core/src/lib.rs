//! Utility scoring and minimum-Bayes-risk selection over pools of candidate
//! translations, plus the bookkeeping needed to turn selections into weighted
//! distillation datasets.
//!
//! The crate is `no_std` (with `alloc`) so the scoring kernels can be reused
//! from constrained build targets; everything touching files, sockets, or
//! threads lives in the companion `mbrn` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod kd;
pub mod mbr;
pub mod metrics;
pub mod prompt;
pub mod text;
pub mod types;
pub mod validate;

pub use metrics::{MetricId, NativeMetric};
pub use types::{
    Candidate, CandidateOrigin, CandidatePool, KdExample, LanguagePair, MbrResult, SamplingParams,
    Selection, SelectionStrategy, SourceSegment, StageEntry, StagePlan, UtilityMatrix,
};
