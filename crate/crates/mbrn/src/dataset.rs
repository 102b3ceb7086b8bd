//! Assemble KD training files from selections, parallel corpora, or
//! deterministic baseline outputs.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use mbrn_core::kd::{build_kd_examples, SkippedSource};
use mbrn_core::types::{CandidatePool, Selection};

use crate::formats::{BeamRecord, FormatError, KdRecord, SelectionRecord};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no pool for source `{source_id}`")]
    MissingPool { source_id: String },
    #[error("more than one selection for source `{source_id}`")]
    DuplicateSelection { source_id: String },
    #[error("source `{source_id}`: selected index {index} outside pool of {pool}")]
    IndexOutOfRange {
        source_id: String,
        index: usize,
        pool: usize,
    },
    #[error("source `{source_id}`: {message}")]
    BadSelection { source_id: String, message: String },
    #[error("aligned files disagree: {source_lines} source lines vs {target_lines} target lines")]
    Misaligned {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("{path}:{line}: empty {side} line")]
    EmptyLine {
        path: String,
        line: usize,
        side: &'static str,
    },
    #[error("{path}:{line}: expected two tab-separated columns")]
    BadColumns { path: String, line: usize },
    #[error("beam output for `{source_id}` has empty target text")]
    EmptyBeamTarget { source_id: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug)]
pub struct KdDatasetBuild {
    pub records: Vec<KdRecord>,
    pub skipped: Vec<SkippedSource>,
}

/// Join selection records with their pools and emit KD records. With
/// `flatten` the per-example weight is dropped to 1 and the averaging factor
/// is left to uniform mixing over the emitted lines.
pub fn build_from_selections(
    pools: &[CandidatePool],
    selections: &[SelectionRecord],
    flatten: bool,
) -> Result<KdDatasetBuild, DatasetError> {
    let by_source: HashMap<&str, &CandidatePool> = pools
        .iter()
        .map(|p| (p.source().id.as_str(), p))
        .collect();

    let mut seen: HashSet<&str> = HashSet::new();
    let mut pairs: Vec<(&CandidatePool, Selection)> = Vec::with_capacity(selections.len());
    let mut provenance: HashMap<&str, (&SelectionRecord, usize)> = HashMap::new();
    for record in selections {
        if !seen.insert(record.source_id.as_str()) {
            return Err(DatasetError::DuplicateSelection {
                source_id: record.source_id.clone(),
            });
        }
        let pool = by_source.get(record.source_id.as_str()).ok_or_else(|| {
            DatasetError::MissingPool {
                source_id: record.source_id.clone(),
            }
        })?;
        for &index in &record.indices {
            if index >= pool.len() {
                return Err(DatasetError::IndexOutOfRange {
                    source_id: record.source_id.clone(),
                    index,
                    pool: pool.len(),
                });
            }
        }
        let (_, selection) = record
            .clone()
            .into_selection()
            .map_err(|message| DatasetError::BadSelection {
                source_id: record.source_id.clone(),
                message,
            })?;
        provenance.insert(record.source_id.as_str(), (record, selection.n));
        pairs.push((pool, selection));
    }

    let borrowed: Vec<(&CandidatePool, &Selection)> =
        pairs.iter().map(|(p, s)| (*p, s)).collect();
    let build = build_kd_examples(&borrowed);
    for skip in &build.skipped {
        log::warn!("source `{}` skipped: {}", skip.source_id, skip.reason);
    }

    let records = build
        .examples
        .iter()
        .map(|example| {
            let (record, n) = provenance[example.source_id.as_str()];
            let mut kd = KdRecord::from_example(example, record.metric_id.as_deref(), n);
            if flatten {
                kd.weight = 1.0;
            }
            kd
        })
        .collect();
    Ok(KdDatasetBuild {
        records,
        skipped: build.skipped,
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let content = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(content.lines().map(String::from).collect())
}

fn reference_record(
    line: usize,
    source_text: &str,
    target_text: &str,
    teacher_id: &str,
) -> KdRecord {
    KdRecord {
        source_id: format!("line-{line}"),
        source_text: mbrn_core::text::normalize(source_text),
        target_text: mbrn_core::text::normalize(target_text),
        weight: 1.0,
        rank: 0,
        strategy: "reference".to_string(),
        teacher_id: teacher_id.to_string(),
        metric_id: None,
        n: 1,
    }
}

/// Ground-truth baseline from two aligned text files. `teacher_id` labels
/// the provenance column; reference rows default it to "reference".
pub fn build_reference(
    source_path: &Path,
    target_path: &Path,
    teacher_id: &str,
) -> Result<Vec<KdRecord>, DatasetError> {
    let sources = read_lines(source_path)?;
    let targets = read_lines(target_path)?;
    if sources.len() != targets.len() {
        return Err(DatasetError::Misaligned {
            source_lines: sources.len(),
            target_lines: targets.len(),
        });
    }
    let mut out = Vec::with_capacity(sources.len());
    for (i, (source, target)) in sources.iter().zip(&targets).enumerate() {
        if source.trim().is_empty() {
            return Err(DatasetError::EmptyLine {
                path: source_path.display().to_string(),
                line: i + 1,
                side: "source",
            });
        }
        if target.trim().is_empty() {
            return Err(DatasetError::EmptyLine {
                path: target_path.display().to_string(),
                line: i + 1,
                side: "target",
            });
        }
        out.push(reference_record(i + 1, source, target, teacher_id));
    }
    Ok(out)
}

/// Same as [`build_reference`] but from one two-column TSV.
pub fn build_reference_tsv(path: &Path, teacher_id: &str) -> Result<Vec<KdRecord>, DatasetError> {
    let lines = read_lines(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let Some((source, target)) = line.split_once('\t') else {
            return Err(DatasetError::BadColumns {
                path: path.display().to_string(),
                line: i + 1,
            });
        };
        if source.trim().is_empty() {
            return Err(DatasetError::EmptyLine {
                path: path.display().to_string(),
                line: i + 1,
                side: "source",
            });
        }
        if target.trim().is_empty() {
            return Err(DatasetError::EmptyLine {
                path: path.display().to_string(),
                line: i + 1,
                side: "target",
            });
        }
        out.push(reference_record(i + 1, source, target, teacher_id));
    }
    Ok(out)
}

/// Single-target baseline rows from deterministic teacher outputs.
pub fn build_beam(outputs: &[BeamRecord]) -> Result<Vec<KdRecord>, DatasetError> {
    let mut out = Vec::with_capacity(outputs.len());
    for record in outputs {
        if record.target_text.trim().is_empty() {
            return Err(DatasetError::EmptyBeamTarget {
                source_id: record.source_id.clone(),
            });
        }
        out.push(KdRecord {
            source_id: record.source_id.clone(),
            source_text: record.source_text.clone(),
            target_text: mbrn_core::text::normalize(&record.target_text),
            weight: 1.0,
            rank: 0,
            strategy: "beam".to_string(),
            teacher_id: record.teacher_id.clone(),
            metric_id: None,
            n: 1,
        });
    }
    out.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    Ok(out)
}
