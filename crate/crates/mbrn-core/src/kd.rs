//! Turning selections into weighted training examples, plus corpus
//! subsampling and stage plans for teacher curricula.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{
    CandidatePool, KdExample, Selection, SourceSegment, StageEntry, StagePlan,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    /// The selection holds no candidates (possible after text dedup on a
    /// degenerate pool).
    EmptySelection,
    /// A selected candidate has empty text; the whole source is dropped so
    /// the remaining weights still sum to one.
    EmptyTargetText { rank: usize },
}

impl core::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SkipReason::EmptySelection => f.write_str("empty selection"),
            SkipReason::EmptyTargetText { rank } => {
                write!(f, "empty target text at rank {rank}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSource {
    pub source_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdBuild {
    pub examples: Vec<KdExample>,
    pub skipped: Vec<SkippedSource>,
}

/// Expand each (pool, selection) into per-candidate examples.
///
/// Strategies that split supervision mass (the ranked MBR ones) give each of
/// the `s` selected candidates weight `1/s`; single-output strategies keep
/// weight 1. Output is ordered by source id, then rank.
pub fn build_kd_examples(items: &[(&CandidatePool, &Selection)]) -> KdBuild {
    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (pool, selection) in items {
        let source = pool.source();
        if selection.indices.is_empty() {
            skipped.push(SkippedSource {
                source_id: source.id.clone(),
                reason: SkipReason::EmptySelection,
            });
            continue;
        }
        let weight = if selection.strategy.splits_weight() {
            1.0 / selection.indices.len() as f64
        } else {
            1.0
        };
        let mut batch = Vec::with_capacity(selection.indices.len());
        let mut skip = None;
        for (rank, &index) in selection.indices.iter().enumerate() {
            assert!(
                index < pool.len(),
                "selection index {index} out of range for pool of {}",
                pool.len()
            );
            let target = &pool.candidates()[index].text;
            if target.is_empty() {
                skip = Some(SkipReason::EmptyTargetText { rank });
                break;
            }
            batch.push(KdExample {
                source_id: source.id.clone(),
                source_text: source.text.clone(),
                target_text: target.clone(),
                weight,
                rank,
                teacher_id: String::from(pool.teacher_id()),
                strategy: selection.strategy,
            });
        }
        match skip {
            Some(reason) => skipped.push(SkippedSource {
                source_id: source.id.clone(),
                reason,
            }),
            None => examples.extend(batch),
        }
    }
    examples.sort_by(|a, b| a.source_id.cmp(&b.source_id).then(a.rank.cmp(&b.rank)));
    KdBuild { examples, skipped }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KdError {
    #[error("no subsample sizes given")]
    EmptySizes,
    #[error("subsample sizes must be positive")]
    ZeroSize,
    #[error("subsample sizes must be strictly ascending ({prev} then {next})")]
    SizesNotAscending { prev: usize, next: usize },
    #[error("subsample size {size} exceeds corpus size {corpus}")]
    SizeExceedsCorpus { size: usize, corpus: usize },
    #[error("a stage plan needs at least one stage")]
    EmptyPlan,
    #[error("dataset `{path}` appears in more than one stage")]
    DuplicateStagePath { path: String },
    #[error("stage fields must be nonempty")]
    BlankStageField,
}

/// Draw nested subsets: one seeded permutation of the corpus, with each
/// requested size taking a prefix. Smaller subsets are therefore always
/// contained in larger ones drawn with the same seed.
pub fn subsample_sources(
    segments: &[SourceSegment],
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Vec<SourceSegment>>, KdError> {
    if sizes.is_empty() {
        return Err(KdError::EmptySizes);
    }
    if sizes[0] == 0 {
        return Err(KdError::ZeroSize);
    }
    for pair in sizes.windows(2) {
        if pair[1] <= pair[0] {
            return Err(KdError::SizesNotAscending {
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    let largest = *sizes.last().expect("nonempty");
    if largest > segments.len() {
        return Err(KdError::SizeExceedsCorpus {
            size: largest,
            corpus: segments.len(),
        });
    }
    let mut order: Vec<usize> = (0..segments.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    Ok(sizes
        .iter()
        .map(|&size| order[..size].iter().map(|&i| segments[i].clone()).collect())
        .collect())
}

/// Input to [`stage_plan`]: one training stage, weakest teacher first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    pub dataset_path: String,
    pub teacher_id: String,
    pub note: String,
}

/// Number the stages 1.. in the given order and reject reused dataset paths.
pub fn stage_plan(specs: &[StageSpec]) -> Result<StagePlan, KdError> {
    if specs.is_empty() {
        return Err(KdError::EmptyPlan);
    }
    let mut seen: Vec<&str> = Vec::new();
    let mut stages = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        if spec.dataset_path.trim().is_empty() || spec.teacher_id.trim().is_empty() {
            return Err(KdError::BlankStageField);
        }
        if seen.contains(&spec.dataset_path.as_str()) {
            return Err(KdError::DuplicateStagePath {
                path: spec.dataset_path.clone(),
            });
        }
        seen.push(&spec.dataset_path);
        stages.push(StageEntry {
            stage_index: (i + 1) as u32,
            dataset_path: spec.dataset_path.clone(),
            teacher_id: spec.teacher_id.clone(),
            note: spec.note.clone(),
        });
    }
    Ok(StagePlan { stages })
}
