//! The scoring interface the matrix driver works against, plus the
//! in-process implementation.

use std::collections::HashMap;

use rayon::prelude::*;

use mbrn_core::metrics::{MetricId, NativeMetric, TextProfile};

/// Failure surfaced by a [`PairScorer`]. `first_pair` is the index into the
/// submitted slice at which the failure was first observed, when known.
#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("transport failure: {message}")]
    Transport {
        message: String,
        first_pair: Option<usize>,
    },
    #[error("protocol violation: {message}")]
    Protocol {
        message: String,
        first_pair: Option<usize>,
    },
}

impl ScoreError {
    pub fn first_pair(&self) -> Option<usize> {
        match self {
            ScoreError::Transport { first_pair, .. } => *first_pair,
            ScoreError::Protocol { first_pair, .. } => *first_pair,
        }
    }

    pub fn is_transport(&self) -> bool {
        matches!(self, ScoreError::Transport { .. })
    }
}

/// Batch evaluator of ordered `(hypothesis, reference)` text pairs.
///
/// One call scores many pairs so implementations can amortize per-text work
/// or network round trips. Scores come back in submission order.
pub trait PairScorer: Send + Sync {
    fn metric_id(&self) -> MetricId;

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f32>, ScoreError>;

    /// Hint for the pool driver: scorers that already fan out internally
    /// (e.g. over a connection budget) want pools fed one at a time.
    fn prefers_sequential_pools(&self) -> bool {
        false
    }
}

fn intern<'p>(
    ids: &mut HashMap<&'p str, usize>,
    texts: &mut Vec<&'p str>,
    text: &'p str,
) -> usize {
    *ids.entry(text).or_insert_with(|| {
        texts.push(text);
        texts.len() - 1
    })
}

/// Scores with an in-process metric, profiling each distinct text once and
/// fanning the pair loop out over the current rayon pool.
#[derive(Debug, Clone)]
pub struct NativeScorer {
    metric: NativeMetric,
}

impl NativeScorer {
    pub fn new(metric: NativeMetric) -> Self {
        Self { metric }
    }
}

impl PairScorer for NativeScorer {
    fn metric_id(&self) -> MetricId {
        self.metric.id()
    }

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f32>, ScoreError> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut texts: Vec<&str> = Vec::new();
        let mut pair_ids: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        for &(hyp, reference) in pairs {
            pair_ids.push((
                intern(&mut ids, &mut texts, hyp),
                intern(&mut ids, &mut texts, reference),
            ));
        }
        let profiles: Vec<TextProfile> = texts
            .par_iter()
            .map(|t| self.metric.profile(t))
            .collect();
        Ok(pair_ids
            .par_iter()
            .map(|&(h, r)| self.metric.score_profiles(&profiles[h], &profiles[r]) as f32)
            .collect())
    }
}
