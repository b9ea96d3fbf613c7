//! Grounding a context in the knowledge graph: retrieve the closest
//! triples, turn them into sentences, and have the chat model answer with
//! those sentences as evidence.

mod compose;
mod verbalize;

use std::sync::OnceLock;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use compose::{
    compose_response, in_context_exemplars, Exemplar, GroundedResponse, LogEntry, PartialArtifacts, Strategy,
    COV_SECONDARY_PROMPT,
};
pub use verbalize::{template_sentence, verbalize_triple, EvidenceSentence, VerbalizeMode};

use crate::embed::{
    cosine, embed_text, embed_texts, EmbedError, EmbedOptions, Embedding, EmbeddingCache, EmbeddingProvider,
};
use crate::kg::{KnowledgeGraph, Triple};
use crate::llm::LlmError;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Error)]
pub enum GroundingError {
    #[error("context text must not be empty")]
    EmptyContext,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("the knowledge graph is empty")]
    EmptyGraph,
    #[error("llm verbalization requested without a chat provider")]
    MissingProvider,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{stage} stage failed: {source}")]
    StrategyFailed { stage: &'static str, partial: Box<PartialArtifacts>, source: LlmError },
}

/// The input context and how many triples to retrieve for it.
#[derive(Debug)]
pub struct ContextQuery {
    text: String,
    k: usize,
    embedding: OnceLock<Embedding>,
}

impl ContextQuery {
    pub fn new(text: impl Into<String>, k: usize) -> Result<Self, GroundingError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(GroundingError::EmptyContext);
        }
        if k == 0 {
            return Err(GroundingError::ZeroK);
        }
        Ok(Self { text, k, embedding: OnceLock::new() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The context embedding, computed on first use.
    pub fn embedding(
        &self,
        provider: &dyn EmbeddingProvider,
        cache: &EmbeddingCache,
    ) -> Result<&Embedding, EmbedError> {
        if let Some(e) = self.embedding.get() {
            return Ok(e);
        }
        let e = embed_text(provider, &self.text, cache)?;
        Ok(self.embedding.get_or_init(|| e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTriple {
    pub triple: Triple,
    pub score: f64,
}

impl Serialize for ScoredTriple {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let t = &self.triple;
        let mut st = s.serialize_struct("ScoredTriple", 7)?;
        st.serialize_field("id", t.id().as_str())?;
        st.serialize_field("head", t.head())?;
        st.serialize_field("relation", t.relation().name())?;
        st.serialize_field("tail", t.tail())?;
        st.serialize_field("is_statistical", &t.is_statistical())?;
        st.serialize_field("score", &self.score)?;
        st.serialize_field("citation_url", &t.citation_url())?;
        st.end()
    }
}

/// Indices and scores of the `k` best candidates by cosine to `query`,
/// descending, ties in candidate order.
pub fn top_k_by_cosine(query: &Embedding, candidates: &[Embedding], k: usize) -> Result<Vec<(usize, f64)>, EmbedError> {
    let mut scored: Vec<(usize, f64)> =
        candidates.iter().enumerate().map(|(i, e)| Ok((i, cosine(query, e)?))).collect::<Result<_, EmbedError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Exact scan of `graph` for the triples closest to the query context.
/// Each triple is embedded under [`Triple::embedding_key`].
pub fn match_triples(
    query: &ContextQuery,
    graph: &KnowledgeGraph,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<Vec<ScoredTriple>, GroundingError> {
    if graph.is_empty() {
        return Err(GroundingError::EmptyGraph);
    }
    let q = query.embedding(provider, cache)?;
    let keys: Vec<&str> = graph.iter().map(Triple::embedding_key).collect();
    let embs = embed_texts(provider, &keys, cache, EmbedOptions::default())?;
    Ok(top_k_by_cosine(q, &embs, query.k)?
        .into_iter()
        .map(|(i, score)| ScoredTriple { triple: graph.triples()[i].clone(), score })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::MockEmbeddingProvider;
    use crate::kg::SourceRef;

    fn graph(n: usize) -> KnowledgeGraph {
        (0..n)
            .map(|i| {
                Triple::new(&format!("Entity {i}"), "HasStatistic", &format!("{i} tonnes"), SourceRef::manual())
                    .unwrap()
            })
            .collect()
    }

    fn setup() -> (MockEmbeddingProvider, EmbeddingCache) {
        let p = MockEmbeddingProvider::new(32);
        let c = EmbeddingCache::in_memory(p.model_id().to_owned(), p.dim());
        (p, c)
    }

    #[test]
    fn self_match_ranks_first() {
        let (p, c) = setup();
        let g = graph(20);
        let key = g.triples()[7].embedding_key();
        let hits = match_triples(&ContextQuery::new(key, 3).unwrap(), &g, &p, &c).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].triple.head(), "Entity 7");
        assert!((hits[0].score - 1.0).abs() < 1e-12);
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn k_beyond_graph_returns_all() {
        let (p, c) = setup();
        let hits = match_triples(&ContextQuery::new("solar", 50).unwrap(), &graph(4), &p, &c).unwrap();
        assert_eq!(hits.len(), 4);
    }

    #[test]
    fn errors() {
        let (p, c) = setup();
        let q = ContextQuery::new("x", 1).unwrap();
        assert!(matches!(match_triples(&q, &KnowledgeGraph::new(), &p, &c), Err(GroundingError::EmptyGraph)));
        assert!(matches!(ContextQuery::new(" ", 1), Err(GroundingError::EmptyContext)));
        assert!(matches!(ContextQuery::new("x", 0), Err(GroundingError::ZeroK)));
    }

    #[test]
    fn ties_keep_insertion_order() {
        let q = Embedding::new(vec![1.0, 0.0], "m").unwrap();
        let e = |x: f64, y: f64| Embedding::new(vec![x, y], "m").unwrap();
        let got = top_k_by_cosine(&q, &[e(0.0, 1.0), e(2.0, 0.0), e(1.0, 0.0), e(1.0, 1.0)], 3).unwrap();
        let idx: Vec<usize> = got.iter().map(|x| x.0).collect();
        assert_eq!(idx, vec![1, 2, 3]);
    }
}
