//! Canonical text form used everywhere: Unicode NFC with surrounding
//! whitespace trimmed. Two strings are "the same text" iff their canonical
//! forms are byte-equal.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

/// Trim surrounding whitespace and apply NFC. Idempotent.
pub fn normalize(text: &str) -> String {
    text.trim().nfc().collect()
}

/// Normalize, then split on Unicode whitespace. Never yields empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text)
        .split_whitespace()
        .map(String::from)
        .collect()
}

/// Canonical equality: byte equality after normalization.
pub fn same_text(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}
