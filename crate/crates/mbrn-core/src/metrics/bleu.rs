//! Sentence-level BLEU over whitespace tokens: modified n-gram precision,
//! geometric mean across effective orders, brevity penalty, 0..=100 scale.

use alloc::string::String;
use alloc::vec::Vec;

use super::{MetricOutcome, MetricsError};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BleuSmoothing {
    /// `(m + k) / (t + k)` for every order >= 2, matched or not.
    AddK { k: f64 },
    /// `eps / t` whenever an order has zero matches.
    Floor { eps: f64 },
}

impl core::fmt::Display for BleuSmoothing {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BleuSmoothing::AddK { k } => write!(f, "add-k:{k}"),
            BleuSmoothing::Floor { eps } => write!(f, "floor:{eps}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuParams {
    max_order: u32,
    smoothing: BleuSmoothing,
}

impl BleuParams {
    pub fn new(max_order: u32, smoothing: BleuSmoothing) -> Result<Self, MetricsError> {
        if max_order == 0 {
            return Err(MetricsError::InvalidMaxOrder);
        }
        let value = match smoothing {
            BleuSmoothing::AddK { k } => k,
            BleuSmoothing::Floor { eps } => eps,
        };
        if !value.is_finite() || value <= 0.0 {
            return Err(MetricsError::InvalidSmoothingValue);
        }
        Ok(Self {
            max_order,
            smoothing,
        })
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn smoothing(&self) -> BleuSmoothing {
        self.smoothing
    }
}

impl Default for BleuParams {
    fn default() -> Self {
        Self {
            max_order: 4,
            smoothing: BleuSmoothing::AddK { k: 1.0 },
        }
    }
}

/// Whitespace tokenization of a canonicalized text. Holds no empty tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn from_text(raw_text: &str) -> Self {
        Self {
            tokens: text::tokenize(raw_text),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn ngram_runs(tokens: &[String], n: usize) -> Vec<(&[String], u32)> {
    if tokens.len() < n {
        return Vec::new();
    }
    let mut windows: Vec<&[String]> = tokens.windows(n).collect();
    windows.sort_unstable();
    let mut runs: Vec<(&[String], u32)> = Vec::new();
    for w in windows {
        match runs.last_mut() {
            Some((last, count)) if *last == w => *count += 1,
            _ => runs.push((w, 1)),
        }
    }
    runs
}

fn clipped_matches(hyp: &[(&[String], u32)], reference: &[(&[String], u32)]) -> u64 {
    let mut total = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < hyp.len() && j < reference.len() {
        match hyp[i].0.cmp(reference[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                total += hyp[i].1.min(reference[j].1) as u64;
                i += 1;
                j += 1;
            }
        }
    }
    total
}

pub fn sentence_bleu_outcome(
    hyp: &TokenSequence,
    reference: &TokenSequence,
    params: &BleuParams,
) -> MetricOutcome {
    if hyp.is_empty() || reference.is_empty() {
        return MetricOutcome {
            value: 0.0,
            empty_input: true,
        };
    }
    let hyp_len = hyp.len() as f64;
    let ref_len = reference.len() as f64;
    let mut log_sum = 0.0f64;
    let mut effective = 0u32;
    let mut zero_precision = false;
    for n in 1..=params.max_order as usize {
        let t = hyp.len().saturating_sub(n - 1);
        if hyp.len() < n {
            break;
        }
        effective += 1;
        let m = clipped_matches(
            &ngram_runs(hyp.tokens(), n),
            &ngram_runs(reference.tokens(), n),
        ) as f64;
        let t = t as f64;
        let p = match params.smoothing {
            BleuSmoothing::AddK { k } if n >= 2 => (m + k) / (t + k),
            BleuSmoothing::Floor { eps } if m == 0.0 => eps / t,
            _ => m / t,
        };
        if p <= 0.0 {
            zero_precision = true;
            break;
        }
        log_sum += libm::log(p);
    }
    debug_assert!(effective > 0);
    let geo_mean = if zero_precision {
        0.0
    } else {
        libm::exp(log_sum / effective as f64)
    };
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        libm::exp(1.0 - ref_len / hyp_len)
    };
    MetricOutcome {
        value: 100.0 * brevity * geo_mean,
        empty_input: false,
    }
}

pub fn sentence_bleu(hyp: &TokenSequence, reference: &TokenSequence, params: &BleuParams) -> f64 {
    sentence_bleu_outcome(hyp, reference, params).value
}

pub fn sentence_bleu_text(hyp: &str, reference: &str, params: &BleuParams) -> f64 {
    sentence_bleu(
        &TokenSequence::from_text(hyp),
        &TokenSequence::from_text(reference),
        params,
    )
}

/// Mean sentence BLEU over all ordered pairs of distinct outputs; low values
/// mean a diverse sample set. Needs at least two outputs.
pub fn self_bleu<S: AsRef<str>>(outputs: &[S], params: &BleuParams) -> Result<f64, MetricsError> {
    if outputs.len() < 2 {
        return Err(MetricsError::TooFewOutputs {
            found: outputs.len(),
        });
    }
    let sequences: Vec<TokenSequence> = outputs
        .iter()
        .map(|o| TokenSequence::from_text(o.as_ref()))
        .collect();
    let mut sum = 0.0f64;
    for (h, hyp) in sequences.iter().enumerate() {
        for (r, reference) in sequences.iter().enumerate() {
            if h == r {
                continue;
            }
            sum += sentence_bleu(hyp, reference, params);
        }
    }
    let pairs = outputs.len() * (outputs.len() - 1);
    Ok(sum / pairs as f64)
}
