//! Character n-gram F-score. Whitespace is removed entirely before n-gram
//! extraction, so n-grams span word boundaries; each order 1..=N gets an
//! F_beta score and the final value is the mean over orders that have any
//! n-gram on either side, scaled to 0..=100.

use alloc::vec::Vec;

use super::{MetricOutcome, MetricsError};
use crate::text;

pub const MAX_CHAR_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfParams {
    char_order: u32,
    beta: f64,
}

impl ChrfParams {
    pub fn new(char_order: u32, beta: f64) -> Result<Self, MetricsError> {
        if char_order == 0 || char_order > MAX_CHAR_ORDER {
            return Err(MetricsError::UnsupportedCharOrder { order: char_order });
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(MetricsError::InvalidBeta);
        }
        Ok(Self { char_order, beta })
    }

    pub fn char_order(&self) -> u32 {
        self.char_order
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for ChrfParams {
    fn default() -> Self {
        Self {
            char_order: 6,
            beta: 2.0,
        }
    }
}

/// Per-text n-gram statistics, reusable across every pairing of the text.
///
/// Each n-gram of up to [`MAX_CHAR_ORDER`] chars is packed into a `u128`
/// (21 bits per scalar value); per order the distinct grams are kept sorted
/// with their counts so two profiles intersect with a linear merge.
#[derive(Debug, Clone, PartialEq)]
pub struct ChrfProfile {
    grams: Vec<Vec<(u128, u32)>>,
    totals: Vec<u32>,
    char_count: usize,
}

impl ChrfProfile {
    pub fn char_count(&self) -> usize {
        self.char_count
    }
}

pub fn chrf_profile(raw_text: &str, params: &ChrfParams) -> ChrfProfile {
    let chars: Vec<u32> = text::normalize(raw_text)
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| c as u32)
        .collect();
    let order = params.char_order as usize;
    let mut grams = Vec::with_capacity(order);
    let mut totals = Vec::with_capacity(order);
    for n in 1..=order {
        if chars.len() < n {
            grams.push(Vec::new());
            totals.push(0);
            continue;
        }
        let mut keys: Vec<u128> = chars
            .windows(n)
            .map(|w| w.iter().fold(0u128, |acc, &c| (acc << 21) | c as u128))
            .collect();
        keys.sort_unstable();
        let mut runs: Vec<(u128, u32)> = Vec::new();
        for key in keys.iter().copied() {
            match runs.last_mut() {
                Some((last, count)) if *last == key => *count += 1,
                _ => runs.push((key, 1)),
            }
        }
        totals.push(keys.len() as u32);
        grams.push(runs);
    }
    ChrfProfile {
        grams,
        totals,
        char_count: chars.len(),
    }
}

fn matched(a: &[(u128, u32)], b: &[(u128, u32)]) -> u64 {
    let mut total = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                total += a[i].1.min(b[j].1) as u64;
                i += 1;
                j += 1;
            }
        }
    }
    total
}

pub fn chrf_from_profiles(
    hyp: &ChrfProfile,
    reference: &ChrfProfile,
    params: &ChrfParams,
) -> MetricOutcome {
    debug_assert_eq!(hyp.grams.len(), params.char_order as usize);
    debug_assert_eq!(reference.grams.len(), params.char_order as usize);
    let beta2 = params.beta * params.beta;
    let mut sum = 0.0f64;
    let mut effective = 0u32;
    for n in 0..params.char_order as usize {
        let t_hyp = hyp.totals[n];
        let t_ref = reference.totals[n];
        if t_hyp == 0 && t_ref == 0 {
            continue;
        }
        effective += 1;
        let m = matched(&hyp.grams[n], &reference.grams[n]) as f64;
        let precision = if t_hyp > 0 { m / t_hyp as f64 } else { 0.0 };
        let recall = if t_ref > 0 { m / t_ref as f64 } else { 0.0 };
        let denom = beta2 * precision + recall;
        if denom > 0.0 {
            sum += (1.0 + beta2) * precision * recall / denom;
        }
    }
    if effective == 0 {
        MetricOutcome {
            value: 0.0,
            empty_input: true,
        }
    } else {
        MetricOutcome {
            value: 100.0 * sum / effective as f64,
            empty_input: false,
        }
    }
}

pub fn chrf_outcome(hyp: &str, reference: &str, params: &ChrfParams) -> MetricOutcome {
    chrf_from_profiles(
        &chrf_profile(hyp, params),
        &chrf_profile(reference, params),
        params,
    )
}

pub fn chrf(hyp: &str, reference: &str, params: &ChrfParams) -> f64 {
    chrf_outcome(hyp, reference, params).value
}
