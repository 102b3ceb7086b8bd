//! Pins metric and selection outputs to concrete numbers.
//!
//! Every expected value here was produced by the naive oracles at the bottom
//! of this file (string-keyed n-gram maps, double loops) and frozen; each
//! test also re-runs the oracle so the constant, the oracle, and the
//! optimized implementation must all agree.

// Frozen constants keep every digit the oracle printed.
#![allow(clippy::excessive_precision)]

use mbrn_core::mbr::{compute_utility_matrix, expected_utilities};
use mbrn_core::metrics::{
    self_bleu, sentence_bleu_text, BleuParams, BleuSmoothing, ChrfParams, NativeMetric,
};
use mbrn_core::types::{CandidatePool, LanguagePair, SamplingParams, SourceSegment};

const TOL: f64 = 1e-9;

fn assert_close(got: f64, want: f64, what: &str) {
    assert!(
        (got - want).abs() < TOL,
        "{what}: got {got:.17e}, want {want:.17e}"
    );
}

#[test]
fn chrf_near_miss_single_edit() {
    let got = mbrn_core::metrics::chrf(
        "der Hund schläft",
        "der Hund schlief",
        &ChrfParams::default(),
    );
    assert_close(got, 74.5052170052170055, "frozen");
    assert_close(
        got,
        chrf_oracle("der Hund schläft", "der Hund schlief", 6, 2.0),
        "oracle",
    );
}

#[test]
fn chrf_word_substitution() {
    let got = mbrn_core::metrics::chrf(
        "Der schnelle braune Fuchs",
        "Der flinke braune Fuchs",
        &ChrfParams::default(),
    );
    assert_close(got, 59.3475704162989928, "frozen");
    assert_close(
        got,
        chrf_oracle("Der schnelle braune Fuchs", "Der flinke braune Fuchs", 6, 2.0),
        "oracle",
    );
}

#[test]
fn chrf_nondefault_order_and_beta() {
    let params = ChrfParams::new(3, 1.0).unwrap();
    let got = mbrn_core::metrics::chrf("aabbcc", "abc", &params);
    assert_close(got, 41.2698412698412724, "frozen");
    assert_close(got, chrf_oracle("aabbcc", "abc", 3, 1.0), "oracle");
}

const POOL_TEXTS: [&str; 3] = ["das Haus ist blau", "das Haus ist rot", "ein Auto"];

const POOL_CHRF_MATRIX: [[f64; 3]; 3] = [
    [100.0, 69.2961818383772368, 5.95238095238095255],
    [65.5717274523914284, 100.0, 8.13008130081300884],
    [3.96825396825396792, 5.64971751412429413, 100.0],
];

const POOL_EXPECTED_UTILITY: [f64; 3] = [
    58.4161872863769531,
    57.9006017049153670,
    36.5393237272898332,
];

fn pool_of(texts: &[&str]) -> CandidatePool {
    let segment = SourceSegment::new(
        "s1",
        "the house",
        LanguagePair::new("English", "German").unwrap(),
    )
    .unwrap();
    CandidatePool::from_sampled_texts(
        segment,
        texts.iter().map(|t| (t.to_string(), None)),
        "teacher",
        SamplingParams {
            epsilon: 0.02,
            seed: Some(0),
            max_tokens: 32,
        },
    )
    .unwrap()
}

#[test]
fn chrf_utility_matrix_is_asymmetric_and_pinned() {
    let pool = pool_of(&POOL_TEXTS);
    let matrix = compute_utility_matrix(&pool, &NativeMetric::Chrf(ChrfParams::default()));
    for h in 0..3 {
        for r in 0..3 {
            assert_eq!(
                matrix.get(h, r),
                POOL_CHRF_MATRIX[h][r] as f32,
                "entry ({h}, {r})"
            );
            assert_close(
                POOL_CHRF_MATRIX[h][r],
                chrf_oracle(POOL_TEXTS[h], POOL_TEXTS[r], 6, 2.0),
                "oracle entry",
            );
        }
    }
    // Recall-weighted F: judging "blau" against "rot" is not the transpose.
    assert_ne!(matrix.get(0, 1), matrix.get(1, 0));
}

#[test]
fn expected_utilities_match_double_loop() {
    let pool = pool_of(&POOL_TEXTS);
    let matrix = compute_utility_matrix(&pool, &NativeMetric::Chrf(ChrfParams::default()));
    let result = expected_utilities(&matrix);
    let (oracle_eu, oracle_ranking) =
        mbr_oracle(&POOL_TEXTS, &|a, b| chrf_oracle(a, b, 6, 2.0));
    assert_eq!(result.ranking, oracle_ranking);
    assert_eq!(result.ranking, vec![0, 1, 2]);
    for h in 0..3 {
        assert!(
            (result.expected_utility[h] - POOL_EXPECTED_UTILITY[h]).abs() < 1e-12,
            "frozen eu[{h}]"
        );
        assert!(
            (result.expected_utility[h] - oracle_eu[h]).abs() < 1e-12,
            "oracle eu[{h}]"
        );
    }
}

#[test]
fn sentence_bleu_add_k_partial_overlap() {
    let got = sentence_bleu_text(
        "der Hund schläft tief",
        "der Hund schläft sehr tief",
        &BleuParams::default(),
    );
    assert_close(got, 55.0695314903183757, "frozen");
    // Direct formula: p = 1, 3/4, 2/3, 1/2; BP = exp(1 - 5/4).
    let direct = 100.0 * (-0.25f64).exp() * 0.25f64.powf(0.25);
    assert_close(got, direct, "direct formula");
    assert_close(
        got,
        bleu_oracle_addk("der Hund schläft tief", "der Hund schläft sehr tief", 4, 1.0),
        "oracle",
    );
}

#[test]
fn sentence_bleu_floor_partial_overlap() {
    let params = BleuParams::new(4, BleuSmoothing::Floor { eps: 0.1 }).unwrap();
    let got = sentence_bleu_text(
        "der Hund schläft tief",
        "der Hund schläft sehr tief",
        &params,
    );
    // Direct formula: p = 1, 2/3, 1/2 unsmoothed; order 4 floors to 0.1/1.
    let direct = 100.0
        * (-0.25f64).exp()
        * (((2.0f64 / 3.0).ln() + 0.5f64.ln() + 0.1f64.ln()) / 4.0).exp();
    assert_close(got, direct, "direct formula");
}

#[test]
fn self_bleu_mixed_pair_exact_fraction() {
    // Two identical outputs and one near miss: identical ordered pairs score
    // 100 each; "a b" vs "a c" scores 50 each way under add-1 smoothing, so
    // the mean over the six ordered pairs is exactly 400/6.
    let got = self_bleu(&["a b", "a b", "a c"], &BleuParams::default()).unwrap();
    assert_close(got, 400.0 / 6.0, "frozen");
    assert_close(got, self_bleu_oracle(&["a b", "a b", "a c"]), "oracle");
}

#[test]
fn self_bleu_three_sentence_sample() {
    let outputs = [
        "der Hund schläft",
        "die Katze schläft",
        "der Hund bellt",
    ];
    let got = self_bleu(&outputs, &BleuParams::default()).unwrap();
    assert_close(got, 32.9092759487274620, "frozen");
    assert_close(got, self_bleu_oracle(&outputs), "oracle");
}

// ---------------------------------------------------------------------------
// Oracles: naive enumeration, no shared code with the crate internals.

use std::collections::BTreeMap;
use unicode_normalization::UnicodeNormalization;

fn canon(s: &str) -> String {
    s.trim().nfc().collect()
}

fn char_grams(chars: &[char], n: usize) -> BTreeMap<String, usize> {
    let mut map = BTreeMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *map.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    map
}

fn chrf_oracle(hyp: &str, reference: &str, order: usize, beta: f64) -> f64 {
    let h: Vec<char> = canon(hyp).chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = canon(reference)
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let beta2 = beta * beta;
    let mut sum = 0.0;
    let mut eff = 0usize;
    for n in 1..=order {
        let hg = char_grams(&h, n);
        let rg = char_grams(&r, n);
        let th: usize = hg.values().sum();
        let tr: usize = rg.values().sum();
        if th == 0 && tr == 0 {
            continue;
        }
        eff += 1;
        let m: usize = hg
            .iter()
            .map(|(g, c)| (*c).min(rg.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if th > 0 { m as f64 / th as f64 } else { 0.0 };
        let rec = if tr > 0 { m as f64 / tr as f64 } else { 0.0 };
        let denom = beta2 * p + rec;
        if denom > 0.0 {
            sum += (1.0 + beta2) * p * rec / denom;
        }
    }
    if eff == 0 {
        0.0
    } else {
        100.0 * sum / eff as f64
    }
}

fn word_grams<'a>(tokens: &[&'a str], n: usize) -> BTreeMap<Vec<&'a str>, usize> {
    let mut map = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *map.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    map
}

fn bleu_oracle_addk(hyp: &str, reference: &str, max_order: usize, k: f64) -> f64 {
    let hc = canon(hyp);
    let rc = canon(reference);
    let h: Vec<&str> = hc.split_whitespace().collect();
    let r: Vec<&str> = rc.split_whitespace().collect();
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut logs = Vec::new();
    for n in 1..=max_order.min(h.len()) {
        let hg = word_grams(&h, n);
        let rg = word_grams(&r, n);
        let t: usize = hg.values().sum();
        let m: usize = hg
            .iter()
            .map(|(g, c)| (*c).min(rg.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if n >= 2 {
            (m as f64 + k) / (t as f64 + k)
        } else {
            m as f64 / t as f64
        };
        if p <= 0.0 {
            return 0.0;
        }
        logs.push(p.ln());
    }
    let gm = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    let bp = if h.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / h.len() as f64).exp()
    };
    100.0 * bp * gm
}

fn self_bleu_oracle(outputs: &[&str]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, h) in outputs.iter().enumerate() {
        for (j, r) in outputs.iter().enumerate() {
            if i != j {
                sum += bleu_oracle_addk(h, r, 4, 1.0);
                pairs += 1;
            }
        }
    }
    sum / pairs as f64
}

fn mbr_oracle(texts: &[&str], metric: &dyn Fn(&str, &str) -> f64) -> (Vec<f64>, Vec<usize>) {
    let k = texts.len();
    let mut eu = Vec::with_capacity(k);
    for h in 0..k {
        let mut sum = 0.0f64;
        for r in 0..k {
            // Mirror the f32 storage the pipeline commits to.
            sum += metric(texts[h], texts[r]) as f32 as f64;
        }
        eu.push(sum / k as f64);
    }
    let mut ranking: Vec<usize> = (0..k).collect();
    ranking.sort_by(|&a, &b| eu[b].partial_cmp(&eu[a]).unwrap().then(a.cmp(&b)));
    (eu, ranking)
}
