//! Embedding-based sentence similarity: average (EACS), vector extrema
//! (VECS), greedy matching (GMS) and whole-sentence cosine (STCS).

use crate::embed::{
    cosine, cosine_slices, embed_text, embed_texts, EmbedOptions, Embedding, EmbeddingCache, EmbeddingProvider,
};

use super::{EvalError, EvalPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingMetric {
    Eacs,
    Vecs,
    Gms,
    Stcs,
}

/// Component-wise mean of token vectors.
pub fn mean_vector(tokens: &[Embedding]) -> Vec<f64> {
    let dim = tokens[0].dim();
    let mut acc = vec![0.0; dim];
    for t in tokens {
        for (a, x) in acc.iter_mut().zip(t.values()) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / tokens.len() as f64).collect()
}

/// Per dimension, the component with the largest magnitude, sign kept.
/// Ties go to the earliest token.
pub fn extrema_vector(tokens: &[Embedding]) -> Vec<f64> {
    let dim = tokens[0].dim();
    (0..dim)
        .map(|d| {
            let mut best = tokens[0].values()[d];
            for t in &tokens[1..] {
                let x = t.values()[d];
                if x.abs() > best.abs() {
                    best = x;
                }
            }
            best
        })
        .collect()
}

/// Mean over `from` tokens of the best cosine to any `to` token.
pub fn greedy_directional(from: &[Embedding], to: &[Embedding]) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for f in from {
        let mut best = f64::NEG_INFINITY;
        for t in to {
            best = best.max(cosine(f, t)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

pub fn embedding_metric(
    kind: EmbeddingMetric,
    pair: &EvalPair,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<f64, EvalError> {
    if kind == EmbeddingMetric::Stcs {
        let r = embed_text(provider, &pair.reference, cache)?;
        let c = embed_text(provider, &pair.candidate, cache)?;
        return Ok(cosine(&r, &c)?);
    }
    let rt = pair.reference_tokens();
    let ct = pair.candidate_tokens();
    pair.require_both(&ct, &rt)?;
    let r = embed_texts(provider, &rt, cache, EmbedOptions::default())?;
    let c = embed_texts(provider, &ct, cache, EmbedOptions::default())?;
    let score = match kind {
        EmbeddingMetric::Eacs => cosine_slices(&mean_vector(&r), &mean_vector(&c))?,
        EmbeddingMetric::Vecs => cosine_slices(&extrema_vector(&r), &extrema_vector(&c))?,
        EmbeddingMetric::Gms => (greedy_directional(&c, &r)? + greedy_directional(&r, &c)?) / 2.0,
        EmbeddingMetric::Stcs => unreachable!(),
    };
    Ok(score)
}
