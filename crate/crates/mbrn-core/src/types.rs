//! Domain records shared by the scoring, selection, and dataset layers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LanguagePair {
    pub source_lang: String,
    pub target_lang: String,
}

impl LanguagePair {
    pub fn new(source_lang: &str, target_lang: &str) -> Result<Self, SegmentError> {
        let source_lang = text::normalize(source_lang);
        let target_lang = text::normalize(target_lang);
        if source_lang.is_empty() || target_lang.is_empty() {
            return Err(SegmentError::EmptyLanguage);
        }
        Ok(Self {
            source_lang,
            target_lang,
        })
    }
}

/// One input segment to translate. `text` is stored in canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSegment {
    pub id: String,
    pub text: String,
    pub pair: LanguagePair,
}

impl SourceSegment {
    pub fn new(id: &str, raw_text: &str, pair: LanguagePair) -> Result<Self, SegmentError> {
        let id = text::normalize(id);
        if id.is_empty() {
            return Err(SegmentError::EmptyId);
        }
        let canonical = text::normalize(raw_text);
        if canonical.is_empty() {
            return Err(SegmentError::EmptyText { id });
        }
        Ok(Self {
            id,
            text: canonical,
            pair,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateOrigin {
    Sampled,
    Beam,
    Reference,
}

impl CandidateOrigin {
    pub fn as_str(&self) -> &'static str {
        match self {
            CandidateOrigin::Sampled => "sampled",
            CandidateOrigin::Beam => "beam",
            CandidateOrigin::Reference => "reference",
        }
    }
}

/// One candidate translation inside a pool. `text` is canonical and may be
/// empty (degenerate completions are kept so pool statistics stay honest).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub text: String,
    pub origin: CandidateOrigin,
    pub logprob: Option<f64>,
}

/// Sampling settings a pool was drawn with; recorded for provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    pub epsilon: f64,
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

/// A source segment plus the teacher candidates drawn for it.
///
/// Invariants enforced on construction: at least one candidate, candidate
/// indices are `0..k` in order, and every candidate has `Sampled` origin.
/// Duplicate texts are deliberately kept: they carry sampling mass.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    source: SourceSegment,
    candidates: Vec<Candidate>,
    teacher_id: String,
    sampling: SamplingParams,
}

impl CandidatePool {
    /// Build a pool from raw sampled texts, normalizing each one.
    pub fn from_sampled_texts<I>(
        source: SourceSegment,
        texts: I,
        teacher_id: &str,
        sampling: SamplingParams,
    ) -> Result<Self, PoolError>
    where
        I: IntoIterator<Item = (String, Option<f64>)>,
    {
        let candidates: Vec<Candidate> = texts
            .into_iter()
            .enumerate()
            .map(|(index, (raw, logprob))| Candidate {
                index,
                text: text::normalize(&raw),
                origin: CandidateOrigin::Sampled,
                logprob,
            })
            .collect();
        Self::from_candidates(source, candidates, teacher_id, sampling)
    }

    /// Build a pool from already-indexed candidates, checking invariants.
    pub fn from_candidates(
        source: SourceSegment,
        candidates: Vec<Candidate>,
        teacher_id: &str,
        sampling: SamplingParams,
    ) -> Result<Self, PoolError> {
        if candidates.is_empty() {
            return Err(PoolError::Empty);
        }
        for (expected, candidate) in candidates.iter().enumerate() {
            if candidate.index != expected {
                return Err(PoolError::NonContiguousIndex {
                    expected,
                    found: candidate.index,
                });
            }
            if candidate.origin != CandidateOrigin::Sampled {
                return Err(PoolError::NonSampledOrigin { index: expected });
            }
        }
        let teacher_id = text::normalize(teacher_id);
        if teacher_id.is_empty() {
            return Err(PoolError::EmptyTeacherId);
        }
        Ok(Self {
            source,
            candidates,
            teacher_id,
            sampling,
        })
    }

    pub fn source(&self) -> &SourceSegment {
        &self.source
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn teacher_id(&self) -> &str {
        &self.teacher_id
    }

    pub fn sampling(&self) -> &SamplingParams {
        &self.sampling
    }

    /// Pool size `k`.
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.text.as_str())
    }
}

/// Dense pairwise utility table: `get(h, r)` is the utility of candidate `h`
/// judged against candidate `r`. Stored as `f32`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    k: usize,
    values: Vec<f32>,
    metric_id: String,
}

impl UtilityMatrix {
    pub fn from_values(k: usize, values: Vec<f32>, metric_id: &str) -> Result<Self, MatrixError> {
        if values.len() != k * k {
            return Err(MatrixError::DimensionMismatch {
                k,
                len: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: bad / k.max(1),
                col: bad % k.max(1),
            });
        }
        Ok(Self {
            k,
            values,
            metric_id: metric_id.to_string(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn get(&self, h: usize, r: usize) -> f32 {
        self.values[h * self.k + r]
    }

    pub fn row(&self, h: usize) -> &[f32] {
        &self.values[h * self.k..(h + 1) * self.k]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Expected utilities per candidate plus the induced ranking (utility
/// descending, ties broken by ascending candidate index).
#[derive(Debug, Clone, PartialEq)]
pub struct MbrResult {
    pub expected_utility: Vec<f64>,
    pub ranking: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionStrategy {
    MbrTopN,
    MbrTemperature,
    Random,
    Beam,
    Reference,
}

impl SelectionStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionStrategy::MbrTopN => "mbr_top_n",
            SelectionStrategy::MbrTemperature => "mbr_temperature",
            SelectionStrategy::Random => "random",
            SelectionStrategy::Beam => "beam",
            SelectionStrategy::Reference => "reference",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "mbr_top_n" => Some(SelectionStrategy::MbrTopN),
            "mbr_temperature" => Some(SelectionStrategy::MbrTemperature),
            "random" => Some(SelectionStrategy::Random),
            "beam" => Some(SelectionStrategy::Beam),
            "reference" => Some(SelectionStrategy::Reference),
            _ => None,
        }
    }

    /// Whether selections made with this strategy split supervision weight
    /// across the selected set.
    pub fn splits_weight(&self) -> bool {
        matches!(
            self,
            SelectionStrategy::MbrTopN | SelectionStrategy::MbrTemperature
        )
    }
}

impl core::fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of applying a selection strategy to one pool.
///
/// `indices` refer to pool candidate positions, in selection order; for
/// ranked strategies that is best-first. `scores` carries the expected
/// utilities of the selected candidates where the strategy is utility-driven.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub strategy: SelectionStrategy,
    pub n: usize,
    pub indices: Vec<usize>,
    pub scores: Option<Vec<f64>>,
    pub rng_seed: Option<u64>,
    pub temperature: Option<f64>,
}

/// One supervision example for student training.
#[derive(Debug, Clone, PartialEq)]
pub struct KdExample {
    pub source_id: String,
    pub source_text: String,
    pub target_text: String,
    pub weight: f64,
    pub rank: usize,
    pub teacher_id: String,
    pub strategy: SelectionStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageEntry {
    pub stage_index: u32,
    pub dataset_path: String,
    pub teacher_id: String,
    pub note: String,
}

/// Ordered curriculum of training stages (weaker supervision first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePlan {
    pub stages: Vec<StageEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("segment id is empty")]
    EmptyId,
    #[error("segment `{id}` has empty text after trimming")]
    EmptyText { id: String },
    #[error("language names must be nonempty")]
    EmptyLanguage,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("candidate pool is empty")]
    Empty,
    #[error("candidate index {found} out of order (expected {expected})")]
    NonContiguousIndex { expected: usize, found: usize },
    #[error("candidate {index} does not have sampled origin")]
    NonSampledOrigin { index: usize },
    #[error("teacher id is empty")]
    EmptyTeacherId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatrixError {
    #[error("matrix backing store has {len} values, expected {k}x{k}")]
    DimensionMismatch { k: usize, len: usize },
    #[error("non-finite utility at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}
