use serde::Serialize;

use crate::embed::{token_embedding_f1, EmbedError, EmbeddingCache, EmbeddingProvider};
use crate::eval::tokenize;
use crate::kg::RelationKind;
use crate::text::split_camel_case;

pub const DEFAULT_CANONICAL_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Canonicalization {
    Matched { relation: RelationKind, score: f64 },
    Rejected { best: RelationKind, score: f64 },
}

impl Canonicalization {
    pub fn relation(&self) -> Option<RelationKind> {
        match self {
            Self::Matched { relation, .. } => Some(*relation),
            Self::Rejected { .. } => None,
        }
    }

    pub fn score(&self) -> f64 {
        match self {
            Self::Matched { score, .. } | Self::Rejected { score, .. } => *score,
        }
    }
}

/// Word tokens of free-form relation text: camel case split, lowercased,
/// punctuation dropped.
pub fn relation_tokens(text: &str) -> Vec<String> {
    split_camel_case(text).iter().flat_map(|w| tokenize(w)).filter(|t| t.chars().any(char::is_alphanumeric)).collect()
}

/// Scores `relation_text` against every relation in [`RelationKind::ALL`]
/// order. Returns the per-relation scores.
pub fn scan_relations(
    relation_text: &str,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<Vec<(RelationKind, f64)>, EmbedError> {
    let tokens = relation_tokens(relation_text);
    if tokens.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    RelationKind::ALL.iter().map(|&r| Ok((r, token_embedding_f1(&r.words(), &tokens, provider, cache)?))).collect()
}

/// Maps LLM relation text onto the schema.
///
/// A case-insensitive exact name match wins outright with score 1.0.
/// Otherwise the relation with the highest token-embedding F1 is chosen,
/// the earliest in schema order on ties, and accepted only when its score
/// reaches `threshold`.
pub fn canonicalize_relation(
    relation_text: &str,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    threshold: f64,
) -> Result<Canonicalization, EmbedError> {
    if relation_text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    if let Some(r) = RelationKind::lookup(relation_text) {
        return Ok(Canonicalization::Matched { relation: r, score: 1.0 });
    }
    let scores = scan_relations(relation_text, provider, cache)?;
    let (best, score) = scores
        .into_iter()
        .fold(None::<(RelationKind, f64)>, |acc, (r, s)| match acc {
            Some((_, bs)) if bs >= s => acc,
            _ => Some((r, s)),
        })
        .expect("schema is non-empty");
    Ok(if score >= threshold {
        Canonicalization::Matched { relation: best, score }
    } else {
        Canonicalization::Rejected { best, score }
    })
}
