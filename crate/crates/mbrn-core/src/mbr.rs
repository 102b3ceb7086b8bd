//! Expected-utility scoring of candidate pools and the selection strategies
//! that turn a ranking into a supervision set.
//!
//! A candidate's expected utility is its mean pairwise utility against every
//! pool member, the candidate itself included: each sampled candidate stands
//! in for the unknown true translation with equal mass, so duplicated texts
//! count as many times as they were drawn.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::{NativeMetric, TextProfile};
use crate::types::{CandidatePool, MbrResult, Selection, SelectionStrategy, UtilityMatrix};

/// Single-threaded reference computation of the pairwise utility table.
/// Distinct texts are profiled and scored once, then broadcast to every
/// candidate position holding that text.
pub fn compute_utility_matrix(pool: &CandidatePool, metric: &NativeMetric) -> UtilityMatrix {
    let k = pool.len();
    let mut distinct: BTreeMap<&str, usize> = BTreeMap::new();
    let mut text_ids: Vec<usize> = Vec::with_capacity(k);
    let mut representatives: Vec<&str> = Vec::new();
    for candidate in pool.candidates() {
        let next = distinct.len();
        let id = *distinct.entry(candidate.text.as_str()).or_insert(next);
        if id == representatives.len() {
            representatives.push(candidate.text.as_str());
        }
        text_ids.push(id);
    }
    let profiles: Vec<TextProfile> = representatives
        .iter()
        .map(|text| metric.profile(text))
        .collect();
    let d = representatives.len();
    let mut distinct_scores = Vec::with_capacity(d * d);
    for h in 0..d {
        for r in 0..d {
            distinct_scores.push(metric.score_profiles(&profiles[h], &profiles[r]) as f32);
        }
    }
    let mut values = Vec::with_capacity(k * k);
    for h in 0..k {
        for r in 0..k {
            values.push(distinct_scores[text_ids[h] * d + text_ids[r]]);
        }
    }
    UtilityMatrix::from_values(k, values, &metric.id().canonical())
        .expect("scores from native metrics are finite")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExpectedUtilityOptions {
    /// Drop the diagonal term (each candidate judged against itself).
    /// Ablation only; the default keeps it.
    pub exclude_self: bool,
}

pub fn expected_utilities(matrix: &UtilityMatrix) -> MbrResult {
    expected_utilities_with(matrix, ExpectedUtilityOptions::default())
}

pub fn expected_utilities_with(
    matrix: &UtilityMatrix,
    options: ExpectedUtilityOptions,
) -> MbrResult {
    let k = matrix.k();
    let mut expected_utility = Vec::with_capacity(k);
    for h in 0..k {
        let value = if options.exclude_self {
            if k == 1 {
                0.0
            } else {
                let sum: f64 = matrix
                    .row(h)
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != h)
                    .map(|(_, &v)| v as f64)
                    .sum();
                sum / (k - 1) as f64
            }
        } else {
            let sum: f64 = matrix.row(h).iter().map(|&v| v as f64).sum();
            sum / k as f64
        };
        expected_utility.push(value);
    }
    let mut ranking: Vec<usize> = (0..k).collect();
    ranking.sort_by(|&a, &b| {
        expected_utility[b]
            .partial_cmp(&expected_utility[a])
            .expect("expected utilities are finite")
            .then(a.cmp(&b))
    });
    MbrResult {
        expected_utility,
        ranking,
    }
}

fn assert_selection_args(result: &MbrResult, pool: &CandidatePool, n: usize) {
    assert!(n >= 1, "selection size must be at least 1");
    assert_eq!(
        result.expected_utility.len(),
        pool.len(),
        "result does not belong to this pool"
    );
}

/// Walk the ranking best-first and keep the first `n` candidates; with
/// `dedup_text` (the default pipeline setting) candidates whose canonical
/// text was already taken are skipped. Yields fewer than `n` entries when
/// the pool runs out.
pub fn select_top_n(
    result: &MbrResult,
    pool: &CandidatePool,
    n: usize,
    dedup_text: bool,
) -> Selection {
    assert_selection_args(result, pool, n);
    let mut indices = Vec::new();
    let mut scores = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for &h in &result.ranking {
        if dedup_text && !seen.insert(pool.candidates()[h].text.as_str()) {
            continue;
        }
        indices.push(h);
        scores.push(result.expected_utility[h]);
        if indices.len() == n {
            break;
        }
    }
    Selection {
        strategy: SelectionStrategy::MbrTopN,
        n,
        indices,
        scores: Some(scores),
        rng_seed: None,
        temperature: None,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("temperature must be positive and finite, got {temperature}")]
    InvalidTemperature { temperature: f64 },
}

/// Sample `n` distinct-text candidates without replacement, each draw
/// weighted by `exp(expected_utility / temperature)`. Low temperatures
/// approach [`select_top_n`]; high temperatures approach uniform choice.
pub fn select_temperature(
    result: &MbrResult,
    pool: &CandidatePool,
    n: usize,
    temperature: f64,
    seed: u64,
) -> Result<Selection, SelectError> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(SelectError::InvalidTemperature { temperature });
    }
    assert_selection_args(result, pool, n);
    // Dedup in ranking order so entry 0 carries the maximum utility; shifting
    // by it keeps the exponentials in range for any temperature.
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut remaining: Vec<usize> = Vec::new();
    for &h in &result.ranking {
        if seen.insert(pool.candidates()[h].text.as_str()) {
            remaining.push(h);
        }
    }
    let u_max = result.expected_utility[remaining[0]];
    let mut weights: Vec<f64> = remaining
        .iter()
        .map(|&h| libm::exp((result.expected_utility[h] - u_max) / temperature))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..n.min(remaining.len()) {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let x = rng.random::<f64>() * total;
            let mut cumulative = 0.0;
            let mut chosen = weights.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                cumulative += w;
                if x < cumulative {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All mass underflowed (tiny temperature): fall back to the best
            // remaining candidate, matching the maximization limit.
            0
        };
        let h = remaining.remove(pick);
        weights.remove(pick);
        indices.push(h);
        scores.push(result.expected_utility[h]);
    }
    Ok(Selection {
        strategy: SelectionStrategy::MbrTemperature,
        n,
        indices,
        scores: Some(scores),
        rng_seed: Some(seed),
        temperature: Some(temperature),
    })
}

/// Uniform sample of `n` distinct-text candidates, ignoring utilities.
/// Ties between copies of a text resolve to the lowest candidate index.
pub fn select_random(pool: &CandidatePool, n: usize, seed: u64) -> Selection {
    assert!(n >= 1, "selection size must be at least 1");
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut populace: Vec<usize> = Vec::new();
    for candidate in pool.candidates() {
        if seen.insert(candidate.text.as_str()) {
            populace.push(candidate.index);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = n.min(populace.len());
    for i in 0..take {
        let j = i + rng.random_range(0..populace.len() - i);
        populace.swap(i, j);
    }
    populace.truncate(take);
    Selection {
        strategy: SelectionStrategy::Random,
        n,
        indices: populace,
        scores: None,
        rng_seed: Some(seed),
        temperature: None,
    }
}
