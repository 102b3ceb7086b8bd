//! Parallel driver that turns candidate pools into utility matrices.
//!
//! Work is deduplicated before any scoring happens: only distinct candidate
//! texts are compared, every missing distinct pair goes to the scorer in a
//! single batch, and results are broadcast back to all k*k positions. An
//! optional [`PairCache`] carries distinct-pair scores across pools.

use std::path::Path;

use rayon::prelude::*;

use mbrn_core::types::{CandidatePool, MatrixError, UtilityMatrix};

use crate::cache::PairCache;
use crate::scorer::{PairScorer, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum MatrixComputeError {
    #[error("cache holds metric `{cache}` but the scorer produces `{requested}`")]
    MetricMismatch { cache: String, requested: String },
    #[error(
        "scoring candidate pair ({hyp}, {reference}) of source `{source_id}` failed: {source}"
    )]
    Score {
        source_id: String,
        hyp: usize,
        reference: usize,
        source: ScoreError,
    },
    #[error("scorer returned {got} scores for {expected} pairs (source `{source_id}`)")]
    ScoreCount {
        source_id: String,
        expected: usize,
        got: usize,
    },
    #[error("source `{source_id}`: {source}")]
    Invalid {
        source_id: String,
        source: MatrixError,
    },
}

impl MatrixComputeError {
    pub fn score_error(&self) -> Option<&ScoreError> {
        match self {
            MatrixComputeError::Score { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Build a rayon pool with exactly `workers` threads.
pub fn worker_pool(workers: usize) -> rayon::ThreadPool {
    assert!(workers >= 1, "need at least one worker");
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("mbrn-score-{i}"))
        .build()
        .expect("rayon pool construction")
}

struct DistinctTexts<'p> {
    representatives: Vec<&'p str>,
    rep_candidate: Vec<usize>,
    text_ids: Vec<usize>,
}

fn distinct_texts(pool: &CandidatePool) -> DistinctTexts<'_> {
    let mut ids: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    let mut representatives = Vec::new();
    let mut rep_candidate = Vec::new();
    let mut text_ids = Vec::with_capacity(pool.len());
    for candidate in pool.candidates() {
        let next = representatives.len();
        let id = *ids.entry(candidate.text.as_str()).or_insert(next);
        if id == next {
            representatives.push(candidate.text.as_str());
            rep_candidate.push(candidate.index);
        }
        text_ids.push(id);
    }
    DistinctTexts {
        representatives,
        rep_candidate,
        text_ids,
    }
}

/// Score one pool. At most `d*d` scorer evaluations for `d` distinct texts,
/// fewer when the cache already holds some pairs.
pub fn utility_matrix(
    pool: &CandidatePool,
    scorer: &dyn PairScorer,
    cache: Option<&PairCache>,
) -> Result<UtilityMatrix, MatrixComputeError> {
    let metric_id = scorer.metric_id().canonical();
    if let Some(cache) = cache {
        if cache.metric_id() != metric_id {
            return Err(MatrixComputeError::MetricMismatch {
                cache: cache.metric_id().to_string(),
                requested: metric_id,
            });
        }
    }
    let source_id = pool.source().id.as_str();
    let distinct = distinct_texts(pool);
    let d = distinct.representatives.len();
    let mut table: Vec<Option<f32>> = vec![None; d * d];
    if let Some(cache) = cache {
        for i in 0..d {
            for j in 0..d {
                table[i * d + j] =
                    cache.get(distinct.representatives[i], distinct.representatives[j]);
            }
        }
    }
    let missing: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|&(i, j)| table[i * d + j].is_none())
        .collect();
    if !missing.is_empty() {
        let pairs: Vec<(&str, &str)> = missing
            .iter()
            .map(|&(i, j)| (distinct.representatives[i], distinct.representatives[j]))
            .collect();
        let scores = scorer.score_pairs(&pairs).map_err(|e| {
            let (i, j) = missing[e.first_pair().unwrap_or(0).min(missing.len() - 1)];
            MatrixComputeError::Score {
                source_id: source_id.to_string(),
                hyp: distinct.rep_candidate[i],
                reference: distinct.rep_candidate[j],
                source: e,
            }
        })?;
        if scores.len() != pairs.len() {
            return Err(MatrixComputeError::ScoreCount {
                source_id: source_id.to_string(),
                expected: pairs.len(),
                got: scores.len(),
            });
        }
        for (&(i, j), &score) in missing.iter().zip(&scores) {
            table[i * d + j] = Some(score);
            if let Some(cache) = cache {
                cache.insert(
                    distinct.representatives[i],
                    distinct.representatives[j],
                    score,
                );
            }
        }
    }
    let k = pool.len();
    let mut values = Vec::with_capacity(k * k);
    for h in 0..k {
        let hi = distinct.text_ids[h] * d;
        for r in 0..k {
            values.push(table[hi + distinct.text_ids[r]].expect("table fully populated"));
        }
    }
    UtilityMatrix::from_values(k, values, &metric_id).map_err(|e| MatrixComputeError::Invalid {
        source_id: source_id.to_string(),
        source: e,
    })
}

/// Score many pools on `workers` threads. Output order matches input order
/// and content is independent of scheduling; remote-backed scorers get pools
/// sequentially (they spread each pool over their own connection budget),
/// in-process scorers get pool-level parallelism.
pub fn utility_matrices(
    pools: &[CandidatePool],
    scorer: &dyn PairScorer,
    cache: Option<&PairCache>,
    workers: usize,
) -> Result<Vec<UtilityMatrix>, MatrixComputeError> {
    if scorer.prefers_sequential_pools() {
        return pools
            .iter()
            .map(|pool| utility_matrix(pool, scorer, cache))
            .collect();
    }
    let rayon_pool = worker_pool(workers);
    let results: Vec<Result<UtilityMatrix, MatrixComputeError>> = rayon_pool.install(|| {
        pools
            .par_iter()
            .map(|pool| utility_matrix(pool, scorer, cache))
            .collect()
    });
    results.into_iter().collect()
}

const MATRIX_MAGIC: &[u8; 4] = b"MBRM";
const MATRIX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum MatrixFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a utility matrix dump (bad magic)")]
    BadMagic,
    #[error("unsupported dump version {found}")]
    BadVersion { found: u32 },
    #[error("dump is truncated")]
    Truncated,
    #[error("metric id is not valid UTF-8")]
    BadMetricId,
    #[error(transparent)]
    Invalid(#[from] MatrixError),
}

/// Dump layout: `"MBRM"`, version, k, metric-id length, metric-id bytes,
/// then k*k little-endian f32 values in row-major order.
pub fn write_matrix(path: &Path, matrix: &UtilityMatrix) -> std::io::Result<()> {
    let metric = matrix.metric_id().as_bytes();
    let mut bytes =
        Vec::with_capacity(16 + metric.len() + matrix.values().len() * 4);
    bytes.extend_from_slice(MATRIX_MAGIC);
    bytes.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(matrix.k() as u32).to_le_bytes());
    bytes.extend_from_slice(&(metric.len() as u32).to_le_bytes());
    bytes.extend_from_slice(metric);
    for value in matrix.values() {
        bytes.extend_from_slice(&value.to_le_bytes());
    }
    crate::fsio::atomic_write(path, &bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MatrixFileError> {
        let slice = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or(MatrixFileError::Truncated)?;
        self.at += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, MatrixFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_matrix(path: &Path) -> Result<UtilityMatrix, MatrixFileError> {
    let bytes = std::fs::read(path)?;
    let mut cursor = Cursor {
        bytes: &bytes,
        at: 0,
    };
    if cursor.take(4)? != MATRIX_MAGIC {
        return Err(MatrixFileError::BadMagic);
    }
    let version = cursor.u32()?;
    if version != MATRIX_VERSION {
        return Err(MatrixFileError::BadVersion { found: version });
    }
    let k = cursor.u32()? as usize;
    let metric_len = cursor.u32()? as usize;
    let metric = std::str::from_utf8(cursor.take(metric_len)?)
        .map_err(|_| MatrixFileError::BadMetricId)?
        .to_string();
    let mut values = Vec::with_capacity(k * k);
    for _ in 0..k * k {
        values.push(f32::from_le_bytes(cursor.take(4)?.try_into().unwrap()));
    }
    if cursor.at != bytes.len() {
        return Err(MatrixFileError::Truncated);
    }
    Ok(UtilityMatrix::from_values(k, values, &metric)?)
}
