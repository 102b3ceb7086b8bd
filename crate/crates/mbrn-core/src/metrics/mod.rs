//! Sentence-level utility metrics plus the identifier scheme that ties every
//! score table to the exact metric configuration that produced it.

mod bleu;
mod chrf;

pub use bleu::{
    self_bleu, sentence_bleu, sentence_bleu_outcome, sentence_bleu_text, BleuParams, BleuSmoothing,
    TokenSequence,
};
pub use chrf::{
    chrf, chrf_from_profiles, chrf_outcome, chrf_profile, ChrfParams, ChrfProfile, MAX_CHAR_ORDER,
};

use alloc::format;
use alloc::string::String;

use crate::text;

/// A metric value plus a flag for degenerate input (both sides empty for
/// chrF, either side empty for BLEU). Degenerate scores are always 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOutcome {
    pub value: f64,
    pub empty_input: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("char n-gram order {order} unsupported (use 1..={MAX_CHAR_ORDER})")]
    UnsupportedCharOrder { order: u32 },
    #[error("beta must be a positive finite number")]
    InvalidBeta,
    #[error("max n-gram order must be at least 1")]
    InvalidMaxOrder,
    #[error("smoothing value must be a positive finite number")]
    InvalidSmoothingValue,
    #[error("need at least 2 outputs for pairwise diversity, got {found}")]
    TooFewOutputs { found: usize },
}

/// `1` iff the two texts are byte-identical after canonicalization.
pub fn exact_match(hyp: &str, reference: &str) -> f64 {
    if text::same_text(hyp, reference) {
        1.0
    } else {
        0.0
    }
}

/// Identifies a metric together with every parameter that affects its value.
/// Two equal ids always produce identical scores; the canonical string form
/// round-trips through [`core::str::FromStr`] and is what score tables carry.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricId {
    Chrf(ChrfParams),
    SentenceBleu(BleuParams),
    ExactMatch,
    Remote(String),
}

impl core::fmt::Display for MetricId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricId::Chrf(p) => write!(f, "chrf(o={},beta={})", p.char_order(), p.beta()),
            MetricId::SentenceBleu(p) => {
                write!(f, "sbleu(o={},smooth={})", p.max_order(), p.smoothing())
            }
            MetricId::ExactMatch => f.write_str("exact_match"),
            MetricId::Remote(name) => write!(f, "remote({name})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized metric id `{input}`")]
pub struct ParseMetricIdError {
    pub input: String,
}

impl core::str::FromStr for MetricId {
    type Err = ParseMetricIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = || ParseMetricIdError {
            input: String::from(s),
        };
        if s == "exact_match" {
            return Ok(MetricId::ExactMatch);
        }
        if let Some(name) = s.strip_prefix("remote(").and_then(|r| r.strip_suffix(')')) {
            if name.is_empty() {
                return Err(fail());
            }
            return Ok(MetricId::Remote(String::from(name)));
        }
        if let Some(body) = s.strip_prefix("chrf(o=").and_then(|r| r.strip_suffix(')')) {
            let (order, beta) = body.split_once(",beta=").ok_or_else(fail)?;
            let order: u32 = order.parse().map_err(|_| fail())?;
            let beta: f64 = beta.parse().map_err(|_| fail())?;
            let params = ChrfParams::new(order, beta).map_err(|_| fail())?;
            return Ok(MetricId::Chrf(params));
        }
        if let Some(body) = s.strip_prefix("sbleu(o=").and_then(|r| r.strip_suffix(')')) {
            let (order, smooth) = body.split_once(",smooth=").ok_or_else(fail)?;
            let order: u32 = order.parse().map_err(|_| fail())?;
            let smoothing = if let Some(k) = smooth.strip_prefix("add-k:") {
                BleuSmoothing::AddK {
                    k: k.parse().map_err(|_| fail())?,
                }
            } else if let Some(eps) = smooth.strip_prefix("floor:") {
                BleuSmoothing::Floor {
                    eps: eps.parse().map_err(|_| fail())?,
                }
            } else {
                return Err(fail());
            };
            let params = BleuParams::new(order, smoothing).map_err(|_| fail())?;
            return Ok(MetricId::SentenceBleu(params));
        }
        Err(fail())
    }
}

impl MetricId {
    pub fn canonical(&self) -> String {
        format!("{self}")
    }
}

/// A metric that can be evaluated in-process.
#[derive(Debug, Clone, PartialEq)]
pub enum NativeMetric {
    Chrf(ChrfParams),
    SentenceBleu(BleuParams),
    ExactMatch,
}

/// Precomputed per-text state for one metric; lets pairwise scoring reuse the
/// per-text work across all pairings.
#[derive(Debug, Clone, PartialEq)]
pub enum TextProfile {
    Chrf(ChrfProfile),
    Tokens(TokenSequence),
    Canonical(String),
}

impl NativeMetric {
    /// In-process evaluator for `id`; `None` for remote ids.
    pub fn from_id(id: &MetricId) -> Option<Self> {
        match id {
            MetricId::Chrf(p) => Some(NativeMetric::Chrf(*p)),
            MetricId::SentenceBleu(p) => Some(NativeMetric::SentenceBleu(*p)),
            MetricId::ExactMatch => Some(NativeMetric::ExactMatch),
            MetricId::Remote(_) => None,
        }
    }

    pub fn id(&self) -> MetricId {
        match self {
            NativeMetric::Chrf(p) => MetricId::Chrf(*p),
            NativeMetric::SentenceBleu(p) => MetricId::SentenceBleu(*p),
            NativeMetric::ExactMatch => MetricId::ExactMatch,
        }
    }

    pub fn score(&self, hyp: &str, reference: &str) -> f64 {
        match self {
            NativeMetric::Chrf(p) => chrf(hyp, reference, p),
            NativeMetric::SentenceBleu(p) => sentence_bleu_text(hyp, reference, p),
            NativeMetric::ExactMatch => exact_match(hyp, reference),
        }
    }

    pub fn profile(&self, raw_text: &str) -> TextProfile {
        match self {
            NativeMetric::Chrf(p) => TextProfile::Chrf(chrf_profile(raw_text, p)),
            NativeMetric::SentenceBleu(_) => {
                TextProfile::Tokens(TokenSequence::from_text(raw_text))
            }
            NativeMetric::ExactMatch => TextProfile::Canonical(text::normalize(raw_text)),
        }
    }

    /// Score from profiles built by [`NativeMetric::profile`] on the same
    /// metric value. Panics if handed a profile of the wrong kind.
    pub fn score_profiles(&self, hyp: &TextProfile, reference: &TextProfile) -> f64 {
        match (self, hyp, reference) {
            (NativeMetric::Chrf(p), TextProfile::Chrf(h), TextProfile::Chrf(r)) => {
                chrf_from_profiles(h, r, p).value
            }
            (NativeMetric::SentenceBleu(p), TextProfile::Tokens(h), TextProfile::Tokens(r)) => {
                sentence_bleu(h, r, p)
            }
            (NativeMetric::ExactMatch, TextProfile::Canonical(h), TextProfile::Canonical(r)) => {
                if h == r {
                    1.0
                } else {
                    0.0
                }
            }
            _ => panic!("text profile does not match metric"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn exact_match_is_binary_and_normalization_aware() {
        assert_eq!(exact_match("der Hund", "der Hund"), 1.0);
        assert_eq!(exact_match(" der Hund ", "der Hund"), 1.0);
        assert_eq!(exact_match("cafe\u{301}", "caf\u{e9}"), 1.0);
        assert_eq!(exact_match("der Hund", "die Hunde"), 0.0);
        assert_eq!(exact_match("", "  "), 1.0);
    }

    #[test]
    fn metric_ids_round_trip_through_canonical_strings() {
        let ids = [
            MetricId::Chrf(ChrfParams::default()),
            MetricId::Chrf(ChrfParams::new(3, 1.5).unwrap()),
            MetricId::SentenceBleu(BleuParams::default()),
            MetricId::SentenceBleu(
                BleuParams::new(2, BleuSmoothing::Floor { eps: 0.1 }).unwrap(),
            ),
            MetricId::ExactMatch,
            MetricId::Remote("bleurt-20".to_string()),
        ];
        for id in ids {
            let s = id.canonical();
            let back: MetricId = s.parse().unwrap();
            assert_eq!(back, id, "via {s}");
        }
    }

    #[test]
    fn canonical_strings_are_stable() {
        assert_eq!(
            MetricId::Chrf(ChrfParams::default()).canonical(),
            "chrf(o=6,beta=2)"
        );
        assert_eq!(
            MetricId::SentenceBleu(BleuParams::default()).canonical(),
            "sbleu(o=4,smooth=add-k:1)"
        );
        assert_eq!(
            MetricId::SentenceBleu(
                BleuParams::new(4, BleuSmoothing::Floor { eps: 0.1 }).unwrap()
            )
            .canonical(),
            "sbleu(o=4,smooth=floor:0.1)"
        );
        assert_eq!(MetricId::ExactMatch.canonical(), "exact_match");
        assert_eq!(
            MetricId::Remote("comet".to_string()).canonical(),
            "remote(comet)"
        );
    }

    #[test]
    fn bad_ids_fail_to_parse() {
        for bad in [
            "",
            "chrf",
            "chrf(o=0,beta=2)",
            "chrf(o=6,beta=-1)",
            "sbleu(o=4,smooth=magic:1)",
            "remote()",
            "exactmatch",
        ] {
            assert!(bad.parse::<MetricId>().is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn native_metric_resolution() {
        let id = MetricId::Chrf(ChrfParams::default());
        let m = NativeMetric::from_id(&id).unwrap();
        assert_eq!(m.id(), id);
        assert!(NativeMetric::from_id(&MetricId::Remote("x".to_string())).is_none());
    }

    #[test]
    fn profiles_agree_with_direct_scores() {
        let metrics = [
            NativeMetric::Chrf(ChrfParams::default()),
            NativeMetric::SentenceBleu(BleuParams::default()),
            NativeMetric::ExactMatch,
        ];
        let texts = ["der Hund schläft", "der Hund", "die Katze schläft", ""];
        for metric in &metrics {
            let profiles: alloc::vec::Vec<TextProfile> =
                texts.iter().map(|t| metric.profile(t)).collect();
            for (i, a) in texts.iter().enumerate() {
                for (j, b) in texts.iter().enumerate() {
                    let direct = metric.score(a, b);
                    let via = metric.score_profiles(&profiles[i], &profiles[j]);
                    assert_eq!(direct, via, "{:?} on ({a:?}, {b:?})", metric.id());
                }
            }
        }
    }

    #[test]
    #[should_panic(expected = "profile does not match metric")]
    fn mismatched_profiles_panic() {
        let chrf = NativeMetric::Chrf(ChrfParams::default());
        let exact = NativeMetric::ExactMatch;
        let p = exact.profile("x");
        chrf.score_profiles(&p, &p);
    }
}
