//! Subtopic relevance against an anchor heading.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{dot, embed_texts, EmbedError, EmbedOptions, EmbeddingCache, EmbeddingProvider};

pub const DEFAULT_MIN_SCORE: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RelevancePolicy {
    TopK { k: usize },
    Threshold { min_score: f64 },
}

impl Default for RelevancePolicy {
    fn default() -> Self {
        RelevancePolicy::Threshold { min_score: DEFAULT_MIN_SCORE }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("min_score {0} is outside [0, 1]")]
    MinScoreRange(f64),
    #[error("no candidate subtopics given")]
    NoCandidates,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

impl RelevancePolicy {
    pub fn top_k(k: usize) -> Result<Self, TopicError> {
        if k == 0 {
            return Err(TopicError::ZeroK);
        }
        Ok(Self::TopK { k })
    }

    pub fn threshold(min_score: f64) -> Result<Self, TopicError> {
        if !(0.0..=1.0).contains(&min_score) {
            return Err(TopicError::MinScoreRange(min_score));
        }
        Ok(Self::Threshold { min_score })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredTopic {
    pub title: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub selected: Vec<ScoredTopic>,
    pub rejected: Vec<ScoredTopic>,
}

/// Dot product of the unit-normalized embeddings of `candidate` and `anchor`.
pub fn score_relevance(
    candidate: &str,
    anchor: &str,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<f64, EmbedError> {
    let e = embed_texts(provider, &[candidate, anchor], cache, EmbedOptions::default())?;
    Ok(dot(e[0].values(), e[1].values()))
}

/// Splits `candidates` by relevance to `anchor`. Both halves come back
/// sorted by descending score; equal scores keep their input order.
pub fn partition_subtopics<S: AsRef<str>>(
    candidates: &[S],
    anchor: &str,
    policy: RelevancePolicy,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<Partition, TopicError> {
    if candidates.is_empty() {
        return Err(TopicError::NoCandidates);
    }
    let mut texts: Vec<&str> = vec![anchor];
    texts.extend(candidates.iter().map(AsRef::as_ref));
    let emb = embed_texts(provider, &texts, cache, EmbedOptions::default())?;
    let anchor_v = emb[0].values();
    let mut scored: Vec<(usize, ScoredTopic)> = candidates
        .iter()
        .zip(&emb[1..])
        .map(|(c, e)| ScoredTopic { title: c.as_ref().to_owned(), score: dot(e.values(), anchor_v) })
        .enumerate()
        .collect();
    scored.sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then(ia.cmp(ib)));

    let (selected, rejected): (Vec<_>, Vec<_>) = match policy {
        RelevancePolicy::TopK { k } => {
            let k = k.max(1);
            scored.into_iter().enumerate().partition(|(rank, _)| *rank < k)
        }
        RelevancePolicy::Threshold { min_score } => {
            scored.into_iter().enumerate().partition(|(_, (_, t))| t.score >= min_score)
        }
    };
    let strip = |v: Vec<(usize, (usize, ScoredTopic))>| v.into_iter().map(|(_, (_, t))| t).collect();
    Ok(Partition { selected: strip(selected), rejected: strip(rejected) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::MockEmbeddingProvider;
    use std::collections::HashMap;

    /// Provider with hand-set 2-d vectors.
    struct Fixed(HashMap<&'static str, Vec<f64>>);

    impl EmbeddingProvider for Fixed {
        fn model_id(&self) -> &str {
            "fixed-2"
        }
        fn dim(&self) -> usize {
            2
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
            Ok(texts.iter().map(|t| self.0[t.as_str()].clone()).collect())
        }
    }

    fn fixed() -> (Fixed, EmbeddingCache) {
        // Unit vectors whose dot with the anchor (1,0) is exactly the first component.
        let unit = |x: f64| vec![x, (1.0 - x * x).sqrt()];
        let p = Fixed(HashMap::from([
            ("anchor", vec![1.0, 0.0]),
            ("a", unit(0.9)),
            ("b", unit(0.8)),
            ("c", unit(0.8)),
            ("d", unit(0.1)),
        ]));
        let c = EmbeddingCache::in_memory("fixed-2", 2);
        (p, c)
    }

    #[test]
    fn top_k_stable_ties() {
        let (p, c) = fixed();
        let part =
            partition_subtopics(&["d", "c", "b", "a"], "anchor", RelevancePolicy::top_k(2).unwrap(), &p, &c).unwrap();
        let sel: Vec<&str> = part.selected.iter().map(|t| t.title.as_str()).collect();
        assert_eq!(sel, vec!["a", "c"], "c precedes b in the input");
        assert_eq!(part.rejected.len(), 2);
        let all = partition_subtopics(&["a", "b"], "anchor", RelevancePolicy::top_k(5).unwrap(), &p, &c).unwrap();
        assert!(all.rejected.is_empty());
    }

    #[test]
    fn threshold_mode() {
        let (p, c) = fixed();
        let cands = ["a", "b", "c", "d"];
        let all = partition_subtopics(&cands, "anchor", RelevancePolicy::threshold(0.0).unwrap(), &p, &c).unwrap();
        assert_eq!(all.selected.len(), 4);
        let some = partition_subtopics(&cands, "anchor", RelevancePolicy::threshold(0.85).unwrap(), &p, &c).unwrap();
        assert_eq!(some.selected.len(), 1);
        assert!(RelevancePolicy::threshold(1.5).is_err());
        assert!(RelevancePolicy::top_k(0).is_err());
    }

    #[test]
    fn self_and_brute_force_scores() {
        let p = MockEmbeddingProvider::default();
        let c = EmbeddingCache::in_memory(p.model_id().to_owned(), p.dim());
        let s = score_relevance("Renewable Energy", "Renewable Energy", &p, &c).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let (a, b) = (p.vector("Hydropower"), p.vector("Renewable Energy"));
        let brute: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let got = score_relevance("Hydropower", "Renewable Energy", &p, &c).unwrap();
        assert!((got - brute).abs() < 1e-12);
    }

    #[test]
    fn empty_candidates() {
        let (p, c) = fixed();
        let none: [&str; 0] = [];
        assert_eq!(
            partition_subtopics(&none, "anchor", RelevancePolicy::default(), &p, &c),
            Err(TopicError::NoCandidates)
        );
    }
}
