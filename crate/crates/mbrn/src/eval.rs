//! Evaluation harness: corpus scoring, output-diversity reports, and
//! expected-utility comparisons between selection strategies.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use mbrn_core::metrics::{self_bleu, BleuParams, MetricsError};
use mbrn_core::types::Selection;

use crate::formats::{render_table, FormatError};
use crate::scorer::{PairScorer, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("aligned inputs disagree: {hypotheses} hypotheses vs {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("nothing to evaluate")]
    Empty,
    #[error("source `{source_id}` has {found} output(s); diversity needs at least 2")]
    TooFewOutputs { source_id: String, found: usize },
    #[error("no expected-utility scores for source `{source_id}`")]
    MissingScores { source_id: String },
    #[error("source `{source_id}`: selected index {index} outside score vector of {len}")]
    IndexOutOfRange {
        source_id: String,
        index: usize,
        len: usize,
    },
    #[error("selection groups share no sources; paired comparison impossible")]
    NoSharedSources,
    #[error(transparent)]
    Score(#[from] ScoreError),
}

// ---------------------------------------------------------------------------
// Corpus scoring

#[derive(Debug, Clone, Serialize)]
pub struct CorpusScoreReport {
    pub metric_id: String,
    pub count: usize,
    pub mean: f64,
    pub scores: Vec<f64>,
}

/// Mean of per-sentence scores. Deliberately not a corpus-pooled n-gram
/// statistic: the numbers compare strategies against each other, not against
/// published corpus scores.
pub fn corpus_score(
    hypotheses: &[&str],
    references: &[&str],
    scorer: &dyn PairScorer,
) -> Result<CorpusScoreReport, EvalError> {
    if hypotheses.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(EvalError::Empty);
    }
    let pairs: Vec<(&str, &str)> = hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| (*h, *r))
        .collect();
    let raw = scorer.score_pairs(&pairs)?;
    let scores: Vec<f64> = raw.iter().map(|s| f64::from(*s)).collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(CorpusScoreReport {
        metric_id: scorer.metric_id().to_string(),
        count: scores.len(),
        mean,
        scores,
    })
}

impl CorpusScoreReport {
    pub fn table(&self) -> String {
        render_table(
            &["metric", "sentences", "mean"],
            &[vec![
                self.metric_id.clone(),
                self.count.to_string(),
                format!("{:.4}", self.mean),
            ]],
        )
    }
}

// ---------------------------------------------------------------------------
// Diversity

#[derive(Debug, Clone, Serialize)]
pub struct SourceDiversity {
    pub source_id: String,
    pub outputs: usize,
    pub self_bleu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiversityReport {
    pub per_source: Vec<SourceDiversity>,
    /// Mean self-similarity across sources; higher means less diverse.
    pub mean: f64,
}

pub fn diversity_report(samples: &[(String, Vec<String>)]) -> Result<DiversityReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let params = BleuParams::default();
    let mut per_source = Vec::with_capacity(samples.len());
    for (source_id, outputs) in samples {
        let texts: Vec<&str> = outputs.iter().map(String::as_str).collect();
        let value = self_bleu(&texts, &params).map_err(|e| match e {
            MetricsError::TooFewOutputs { found } => EvalError::TooFewOutputs {
                source_id: source_id.clone(),
                found,
            },
            other => EvalError::TooFewOutputs {
                source_id: format!("{source_id} ({other})"),
                found: outputs.len(),
            },
        })?;
        per_source.push(SourceDiversity {
            source_id: source_id.clone(),
            outputs: outputs.len(),
            self_bleu: value,
        });
    }
    let mean = per_source.iter().map(|s| s.self_bleu).sum::<f64>() / per_source.len() as f64;
    Ok(DiversityReport { per_source, mean })
}

impl DiversityReport {
    pub fn table(&self) -> String {
        let mut rows: Vec<Vec<String>> = self
            .per_source
            .iter()
            .map(|s| {
                vec![
                    s.source_id.clone(),
                    s.outputs.to_string(),
                    format!("{:.4}", s.self_bleu),
                ]
            })
            .collect();
        rows.push(vec![
            "(mean)".to_string(),
            String::new(),
            format!("{:.4}", self.mean),
        ]);
        render_table(&["source", "outputs", "self_bleu"], &rows)
    }
}

// ---------------------------------------------------------------------------
// Selection quality

#[derive(Debug, Clone, Serialize)]
pub struct StrategyQuality {
    pub label: String,
    pub sources: usize,
    pub mean_expected_utility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QualityDifference {
    pub first: String,
    pub second: String,
    pub shared_sources: usize,
    /// Mean over shared sources of (first − second).
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionQualityReport {
    pub strategies: Vec<StrategyQuality>,
    pub differences: Vec<QualityDifference>,
}

/// Compare groups of selections by the expected utility of what they picked.
/// `expected` maps source_id to that pool's expected-utility vector; each
/// group is a labelled set of per-source selections over those same pools.
pub fn selection_quality(
    expected: &BTreeMap<String, Vec<f64>>,
    groups: &[(String, Vec<(String, Selection)>)],
) -> Result<SelectionQualityReport, EvalError> {
    if groups.is_empty() {
        return Err(EvalError::Empty);
    }
    // label -> source_id -> mean selected expected utility
    let mut values: Vec<(String, BTreeMap<&str, f64>)> = Vec::with_capacity(groups.len());
    for (label, selections) in groups {
        let mut by_source = BTreeMap::new();
        for (source_id, selection) in selections {
            let eu = expected
                .get(source_id)
                .ok_or_else(|| EvalError::MissingScores {
                    source_id: source_id.clone(),
                })?;
            if selection.indices.is_empty() {
                log::warn!("source `{source_id}`: empty selection ignored in quality report");
                continue;
            }
            let mut sum = 0.0f64;
            for &index in &selection.indices {
                let value = eu.get(index).ok_or(EvalError::IndexOutOfRange {
                    source_id: source_id.clone(),
                    index,
                    len: eu.len(),
                })?;
                sum += *value;
            }
            by_source.insert(source_id.as_str(), sum / selection.indices.len() as f64);
        }
        values.push((label.clone(), by_source));
    }

    let strategies = values
        .iter()
        .map(|(label, by_source)| StrategyQuality {
            label: label.clone(),
            sources: by_source.len(),
            mean_expected_utility: if by_source.is_empty() {
                f64::NAN
            } else {
                by_source.values().sum::<f64>() / by_source.len() as f64
            },
        })
        .collect();

    let mut differences = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let (label_a, a) = &values[i];
            let (label_b, b) = &values[j];
            let shared: Vec<&str> = a.keys().filter(|k| b.contains_key(*k)).copied().collect();
            if shared.is_empty() {
                return Err(EvalError::NoSharedSources);
            }
            let difference = shared
                .iter()
                .map(|k| a[k] - b[k])
                .sum::<f64>()
                / shared.len() as f64;
            differences.push(QualityDifference {
                first: label_a.clone(),
                second: label_b.clone(),
                shared_sources: shared.len(),
                difference,
            });
        }
    }
    Ok(SelectionQualityReport {
        strategies,
        differences,
    })
}

impl SelectionQualityReport {
    pub fn table(&self) -> String {
        let strategy_rows: Vec<Vec<String>> = self
            .strategies
            .iter()
            .map(|s| {
                vec![
                    s.label.clone(),
                    s.sources.to_string(),
                    format!("{:.6}", s.mean_expected_utility),
                ]
            })
            .collect();
        let mut out = render_table(
            &["selection", "sources", "mean expected utility"],
            &strategy_rows,
        );
        if !self.differences.is_empty() {
            let rows: Vec<Vec<String>> = self
                .differences
                .iter()
                .map(|d| {
                    vec![
                        format!("{} - {}", d.first, d.second),
                        d.shared_sources.to_string(),
                        format!("{:+.6}", d.difference),
                    ]
                })
                .collect();
            out.push('\n');
            out.push_str(&render_table(&["difference", "shared", "value"], &rows));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Efficiency-curve CSV

/// Insert or replace the (label, size) row of a score-vs-size CSV, keeping
/// rows sorted. The file is rewritten atomically.
pub fn upsert_efficiency_row(
    path: &Path,
    label: &str,
    size: u64,
    score: f64,
) -> Result<(), FormatError> {
    if label.contains(',') {
        return Err(FormatError::invalid(path, "label must not contain a comma"));
    }
    let mut rows: Vec<(String, u64, f64)> = Vec::new();
    if path.exists() {
        let content = std::fs::read_to_string(path).map_err(|e| FormatError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for (i, line) in content.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, ',').collect();
            if fields.len() != 3 {
                return Err(FormatError::line(path, i + 1, "expected label,size,score"));
            }
            let row_size: u64 = fields[1]
                .trim()
                .parse()
                .map_err(|_| FormatError::line(path, i + 1, "bad size"))?;
            let row_score: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| FormatError::line(path, i + 1, "bad score"))?;
            rows.push((fields[0].to_string(), row_size, row_score));
        }
    }
    rows.retain(|(l, s, _)| !(l == label && *s == size));
    rows.push((label.to_string(), size, score));
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::from("label,size,score\n");
    for (l, s, v) in rows {
        out.push_str(&format!("{l},{s},{v}\n"));
    }
    crate::fsio::atomic_write(path, out.as_bytes()).map_err(|e| FormatError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
