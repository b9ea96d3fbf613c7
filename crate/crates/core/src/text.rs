//! Text normalization shared by ids, caches and relation lookup.

use std::borrow::Cow;

use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

/// NFC, trim, and collapse internal whitespace runs to a single space.
///
/// Case is preserved; use [`key_form`] for identity comparisons.
pub fn normalize(raw: &str) -> String {
    // ASCII is already in NFC; skipping the composition pass matters on hot
    // cache-key paths.
    let nfc: Cow<str> = if raw.is_ascii() { Cow::Borrowed(raw) } else { Cow::Owned(raw.nfc().collect()) };
    let mut out = String::with_capacity(nfc.len());
    for word in nfc.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Lowercased [`normalize`] form used for hashing and duplicate detection.
pub fn key_form(raw: &str) -> String {
    normalize(raw).to_lowercase()
}

/// Hex SHA-256 of the given parts joined with the unit separator.
pub fn content_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(part.as_bytes());
    }
    hex_lower(&hasher.finalize())
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

/// Splits a CamelCase identifier into lowercase words.
///
/// `HasNumericValue` becomes `["has", "numeric", "value"]`. Runs of capitals
/// stay together (`CO2Emissions` gives `["co2", "emissions"]`). Text that is
/// not camel case is returned split on whitespace.
pub fn split_camel_case(ident: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in ident.split(|c: char| c.is_whitespace() || c == '_') {
        let chars: Vec<char> = chunk.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0 && c.is_uppercase() && {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower)
            };
            if boundary && !current.is_empty() {
                words.push(std::mem::take(&mut current).to_lowercase());
            }
            current.push(c);
        }
        if !current.is_empty() {
            words.push(current.to_lowercase());
        }
    }
    words
}
