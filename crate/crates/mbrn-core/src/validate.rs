//! Sanity checks for source corpora before they are sent to a teacher.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::text;
use crate::types::{LanguagePair, SourceSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub segment_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn error_count(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
            .count()
    }

    pub fn warning_count(&self) -> usize {
        self.findings.len() - self.error_count()
    }

    pub fn has_errors(&self) -> bool {
        self.error_count() > 0
    }
}

/// Check a corpus for duplicate ids and empty texts (errors) and mixed
/// language pairs (warning). Findings keep corpus order where they can.
pub fn validate_corpus(segments: &[SourceSegment]) -> ValidationReport {
    let mut findings = Vec::new();
    let mut first_seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, segment) in segments.iter().enumerate() {
        if let Some(&first) = first_seen.get(segment.id.as_str()) {
            findings.push(Finding {
                severity: Severity::Error,
                segment_id: Some(segment.id.clone()),
                message: format!(
                    "duplicate segment id (positions {first} and {i})"
                ),
            });
        } else {
            first_seen.insert(segment.id.as_str(), i);
        }
        if text::normalize(&segment.text).is_empty() {
            findings.push(Finding {
                severity: Severity::Error,
                segment_id: Some(segment.id.clone()),
                message: String::from("empty text after trimming"),
            });
        }
    }
    let mut pairs: Vec<&LanguagePair> = Vec::new();
    for segment in segments {
        if !pairs.contains(&&segment.pair) {
            pairs.push(&segment.pair);
        }
    }
    if pairs.len() > 1 {
        let listed: Vec<String> = pairs
            .iter()
            .map(|p| format!("{}->{}", p.source_lang, p.target_lang))
            .collect();
        findings.push(Finding {
            severity: Severity::Warning,
            segment_id: None,
            message: format!("corpus mixes language pairs: {}", listed.join(", ")),
        });
    }
    ValidationReport { findings }
}
