//! On-disk records and the JSONL plumbing shared by every subcommand.
//!
//! All record shapes are part of the tool's public contract: pools, score
//! results, selections, KD examples, stage plans. Readers attach line
//! numbers to every failure; writers go through [`crate::fsio::atomic_write`].

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mbrn_core::types::{
    Candidate, CandidateOrigin, CandidatePool, KdExample, LanguagePair, SamplingParams, Selection,
    SelectionStrategy, SourceSegment, StageEntry, StagePlan,
};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn line(path: &Path, line: usize, message: impl Into<String>) -> Self {
        FormatError::Line {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Invalid {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

/// Parse a JSONL file, converting each record with `convert`; conversion
/// failures are reported with their 1-based line number. Blank lines are
/// permitted and skipped.
pub fn read_jsonl_with<T, U, F>(path: &Path, mut convert: F) -> Result<Vec<U>, FormatError>
where
    T: DeserializeOwned,
    F: FnMut(T) -> Result<U, String>,
{
    let content = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line)
            .map_err(|e| FormatError::line(path, i + 1, e.to_string()))?;
        out.push(convert(record).map_err(|m| FormatError::line(path, i + 1, m))?);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    read_jsonl_with(path, |record: T| Ok(record))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), FormatError> {
    let mut buffer = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| FormatError::invalid(path, e.to_string()))?;
        buffer.push_str(&line);
        buffer.push('\n');
    }
    crate::fsio::atomic_write(path, buffer.as_bytes()).map_err(|e| FormatError::io(path, e))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| FormatError::invalid(path, e.to_string()))?;
    body.push('\n');
    crate::fsio::atomic_write(path, body.as_bytes()).map_err(|e| FormatError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let content = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&content).map_err(|e| FormatError::invalid(path, e.to_string()))
}

// ---------------------------------------------------------------------------
// Source corpora

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub text: String,
    pub source_lang: String,
    pub target_lang: String,
}

impl From<&SourceSegment> for SourceRecord {
    fn from(segment: &SourceSegment) -> Self {
        SourceRecord {
            id: segment.id.clone(),
            text: segment.text.clone(),
            source_lang: segment.pair.source_lang.clone(),
            target_lang: segment.pair.target_lang.clone(),
        }
    }
}

impl SourceRecord {
    pub fn into_segment(self) -> Result<SourceSegment, String> {
        let pair = LanguagePair::new(&self.source_lang, &self.target_lang)
            .map_err(|e| e.to_string())?;
        SourceSegment::new(&self.id, &self.text, pair).map_err(|e| e.to_string())
    }
}

pub fn read_sources(path: &Path) -> Result<Vec<SourceSegment>, FormatError> {
    read_jsonl_with(path, SourceRecord::into_segment)
}

pub fn write_sources(path: &Path, segments: &[SourceSegment]) -> Result<(), FormatError> {
    let records: Vec<SourceRecord> = segments.iter().map(SourceRecord::from).collect();
    write_jsonl(path, &records)
}

// ---------------------------------------------------------------------------
// Candidate pools

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRecord {
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logprob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub source_id: String,
    pub source_text: String,
    pub source_lang: String,
    pub target_lang: String,
    pub teacher_id: String,
    pub sampling: SamplingRecord,
    pub candidates: Vec<CandidateRecord>,
}

impl From<&CandidatePool> for PoolRecord {
    fn from(pool: &CandidatePool) -> Self {
        PoolRecord {
            source_id: pool.source().id.clone(),
            source_text: pool.source().text.clone(),
            source_lang: pool.source().pair.source_lang.clone(),
            target_lang: pool.source().pair.target_lang.clone(),
            teacher_id: pool.teacher_id().to_string(),
            sampling: SamplingRecord {
                epsilon: pool.sampling().epsilon,
                seed: pool.sampling().seed,
                max_tokens: pool.sampling().max_tokens,
            },
            candidates: pool
                .candidates()
                .iter()
                .map(|c| CandidateRecord {
                    index: c.index,
                    text: c.text.clone(),
                    logprob: c.logprob,
                })
                .collect(),
        }
    }
}

impl PoolRecord {
    pub fn into_pool(self) -> Result<CandidatePool, String> {
        let pair = LanguagePair::new(&self.source_lang, &self.target_lang)
            .map_err(|e| e.to_string())?;
        let source =
            SourceSegment::new(&self.source_id, &self.source_text, pair).map_err(|e| e.to_string())?;
        let candidates: Vec<Candidate> = self
            .candidates
            .into_iter()
            .map(|c| Candidate {
                index: c.index,
                text: mbrn_core::text::normalize(&c.text),
                origin: CandidateOrigin::Sampled,
                logprob: c.logprob,
            })
            .collect();
        CandidatePool::from_candidates(
            source,
            candidates,
            &self.teacher_id,
            SamplingParams {
                epsilon: self.sampling.epsilon,
                seed: self.sampling.seed,
                max_tokens: self.sampling.max_tokens,
            },
        )
        .map_err(|e| e.to_string())
    }
}

pub fn write_pools(path: &Path, pools: &[CandidatePool]) -> Result<(), FormatError> {
    let records: Vec<PoolRecord> = pools.iter().map(PoolRecord::from).collect();
    write_jsonl(path, &records)
}

// ---------------------------------------------------------------------------
// Score results

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbrRecord {
    pub source_id: String,
    pub metric_id: String,
    pub expected_utility: Vec<f64>,
    pub ranking: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Selections

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub source_id: String,
    pub strategy: String,
    pub n: usize,
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub dedup: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_id: Option<String>,
}

impl SelectionRecord {
    pub fn new(
        source_id: &str,
        selection: &Selection,
        dedup: bool,
        metric_id: Option<&str>,
    ) -> Self {
        SelectionRecord {
            source_id: source_id.to_string(),
            strategy: selection.strategy.as_str().to_string(),
            n: selection.n,
            indices: selection.indices.clone(),
            scores: selection.scores.clone(),
            rng_seed: selection.rng_seed,
            temperature: selection.temperature,
            dedup,
            metric_id: metric_id.map(String::from),
        }
    }

    pub fn strategy(&self) -> Result<SelectionStrategy, String> {
        SelectionStrategy::parse(&self.strategy)
            .ok_or_else(|| format!("unknown strategy `{}`", self.strategy))
    }

    pub fn into_selection(self) -> Result<(String, Selection), String> {
        let strategy = self.strategy()?;
        Ok((
            self.source_id,
            Selection {
                strategy,
                n: self.n,
                indices: self.indices,
                scores: self.scores,
                rng_seed: self.rng_seed,
                temperature: self.temperature,
            },
        ))
    }
}

// ---------------------------------------------------------------------------
// KD datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdRecord {
    pub source_id: String,
    pub source_text: String,
    pub target_text: String,
    pub weight: f64,
    pub rank: usize,
    pub strategy: String,
    pub teacher_id: String,
    pub metric_id: Option<String>,
    pub n: usize,
}

impl KdRecord {
    pub fn from_example(example: &KdExample, metric_id: Option<&str>, n: usize) -> Self {
        KdRecord {
            source_id: example.source_id.clone(),
            source_text: example.source_text.clone(),
            target_text: example.target_text.clone(),
            weight: example.weight,
            rank: example.rank,
            strategy: example.strategy.as_str().to_string(),
            teacher_id: example.teacher_id.clone(),
            metric_id: metric_id.map(String::from),
            n,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        SelectionStrategy::parse(&self.strategy)
            .ok_or_else(|| format!("unknown strategy `{}`", self.strategy))?;
        if self.source_id.trim().is_empty() {
            return Err("empty source_id".into());
        }
        if self.target_text.trim().is_empty() {
            return Err("empty target_text".into());
        }
        if self.teacher_id.trim().is_empty() {
            return Err("empty teacher_id".into());
        }
        if !(self.weight.is_finite() && self.weight > 0.0 && self.weight <= 1.0) {
            return Err(format!("weight {} out of (0, 1]", self.weight));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Beam / greedy baseline outputs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamRecord {
    pub source_id: String,
    pub source_text: String,
    pub source_lang: String,
    pub target_lang: String,
    pub teacher_id: String,
    pub target_text: String,
    /// Decode mode the service reported for its deterministic output
    /// (greedy unless the service says otherwise).
    pub mode: String,
}

// ---------------------------------------------------------------------------
// Stage plans

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage_index: u32,
    pub dataset_path: String,
    pub teacher_id: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlanFile {
    pub stages: Vec<StageRecord>,
}

impl From<&StagePlan> for StagePlanFile {
    fn from(plan: &StagePlan) -> Self {
        StagePlanFile {
            stages: plan
                .stages
                .iter()
                .map(|s| StageRecord {
                    stage_index: s.stage_index,
                    dataset_path: s.dataset_path.clone(),
                    teacher_id: s.teacher_id.clone(),
                    note: s.note.clone(),
                })
                .collect(),
        }
    }
}

impl StagePlanFile {
    pub fn into_plan(self) -> StagePlan {
        StagePlan {
            stages: self
                .stages
                .into_iter()
                .map(|s| StageEntry {
                    stage_index: s.stage_index,
                    dataset_path: s.dataset_path,
                    teacher_id: s.teacher_id,
                    note: s.note,
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Plain-text tables for report printing

pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &[String]| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:<width$}", width = widths[i]);
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    emit(&headers.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    emit(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for row in rows {
        emit(row);
    }
    out
}
