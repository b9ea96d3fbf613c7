//! LLM-driven triple extraction: prompt rendering, completion parsing,
//! relation canonicalization and graph assembly.

mod assemble;
mod canon;
mod parse;
mod prompt;
pub mod tail;

use std::thread;

use serde::Serialize;
use thiserror::Error;

pub use assemble::{dedup_and_assemble, Rejection, RejectionReason, RejectionReport};
pub use canon::{
    canonicalize_relation, relation_tokens, scan_relations, Canonicalization, DEFAULT_CANONICAL_THRESHOLD,
};
pub use parse::{parse_completion, ParseDiagnostic, ParsedTriple};
pub use prompt::{
    relations_block_names, relations_block_with_examples, PromptConfig, PromptConfigError, TemplateId,
    NO_REPEAT_INSTRUCTION,
};
pub use tail::{classify_tail, NumericSpan, TailClassification, UnitTag, CUE_LEXICON};

use crate::kg::SourceRef;
use crate::llm::{ChatMessage, ChatProvider, ChatRequest, LlmError};
use crate::wiki::PageDocument;

/// A triple as the LLM wrote it, before the relation is mapped onto the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawTripleCandidate {
    head: String,
    relation_text: String,
    tail: String,
    source: SourceRef,
}

impl RawTripleCandidate {
    /// `None` when any of the three fields is blank.
    pub fn new(head: &str, relation_text: &str, tail: &str, source: SourceRef) -> Option<Self> {
        let (h, r, t) = (head.trim(), relation_text.trim(), tail.trim());
        if h.is_empty() || r.is_empty() || t.is_empty() {
            return None;
        }
        Some(Self { head: h.to_owned(), relation_text: r.to_owned(), tail: t.to_owned(), source })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn relation_text(&self) -> &str {
        &self.relation_text
    }

    pub fn tail(&self) -> &str {
        &self.tail
    }

    pub fn source(&self) -> &SourceRef {
        &self.source
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("page {0:?} has no text to extract from")]
    EmptyDocument(String),
    #[error("extraction for {title:?} failed: {source}")]
    ProviderUnavailable { title: String, source: LlmError },
    #[error("no triples could be parsed from the completions for {title:?} ({diagnostics} unparseable lines)")]
    EmptyExtraction { title: String, diagnostics: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Character budget per prompt chunk.
    pub chunk_chars: usize,
    pub max_concurrency: usize,
    pub temperature: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { chunk_chars: 6000, max_concurrency: 4, temperature: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkDiagnostic {
    pub chunk: usize,
    #[serde(flatten)]
    pub diagnostic: ParseDiagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub candidates: Vec<RawTripleCandidate>,
    pub diagnostics: Vec<ChunkDiagnostic>,
    pub chunks: usize,
}

fn split_sentences(paragraph: &str, budget: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for sentence in paragraph.split_inclusive(". ") {
        if !cur.is_empty() && cur.len() + sentence.len() > budget {
            out.push(std::mem::take(&mut cur).trim().to_owned());
        }
        cur.push_str(sentence);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_owned());
    }
    out
}

/// Packs paragraphs (blank-line separated) into chunks of at most `budget`
/// bytes. A paragraph over budget is broken at sentence ends; a single
/// sentence over budget becomes its own chunk.
pub fn chunk_paragraphs(text: &str, budget: usize) -> Vec<String> {
    let budget = budget.max(1);
    let mut pieces = Vec::new();
    let mut para = String::new();
    for line in text.lines().chain(std::iter::once("")) {
        if line.trim().is_empty() {
            if !para.is_empty() {
                pieces.push(std::mem::take(&mut para));
            }
        } else {
            if !para.is_empty() {
                para.push('\n');
            }
            para.push_str(line.trim_end());
        }
    }
    let mut chunks: Vec<String> = Vec::new();
    let mut cur = String::new();
    for p in pieces {
        let parts = if p.len() > budget { split_sentences(&p, budget) } else { vec![p] };
        for part in parts {
            if !cur.is_empty() && cur.len() + 2 + part.len() > budget {
                chunks.push(std::mem::take(&mut cur));
            }
            if !cur.is_empty() {
                cur.push_str("\n\n");
            }
            cur.push_str(&part);
        }
    }
    if !cur.is_empty() {
        chunks.push(cur);
    }
    chunks
}

/// Prompts `llm` once per chunk of `doc` and parses the completions.
/// Chunks are sent concurrently up to `options.max_concurrency`; the
/// candidates come back in chunk order.
pub fn extract_candidate_triples(
    doc: &PageDocument,
    config: &PromptConfig,
    llm: &dyn ChatProvider,
    options: ExtractOptions,
) -> Result<Extraction, ExtractError> {
    if doc.plain_text.trim().is_empty() {
        return Err(ExtractError::EmptyDocument(doc.title.clone()));
    }
    let chunks = chunk_paragraphs(&doc.plain_text, options.chunk_chars);
    let requests: Vec<ChatRequest> = chunks
        .iter()
        .map(|c| {
            let mut r = ChatRequest::new(vec![ChatMessage::user(config.render(&doc.title, c))]);
            r.temperature = options.temperature;
            r
        })
        .collect();

    let mut completions = Vec::with_capacity(requests.len());
    for wave in requests.chunks(options.max_concurrency.max(1)) {
        let results: Vec<Result<String, LlmError>> = thread::scope(|s| {
            let handles: Vec<_> = wave.iter().map(|r| s.spawn(move || llm.complete(r))).collect();
            handles.into_iter().map(|h| h.join().expect("extraction worker panicked")).collect()
        });
        for r in results {
            completions
                .push(r.map_err(|source| ExtractError::ProviderUnavailable { title: doc.title.clone(), source })?);
        }
    }

    let source = SourceRef {
        page_title: doc.title.clone(),
        page_url: doc.url.clone(),
        retrieved_at: doc.retrieved_at,
        extractor: llm.model_id().to_owned(),
    };
    let mut candidates = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, completion) in completions.iter().enumerate() {
        let (parsed, diags) = parse_completion(completion);
        candidates.extend(
            parsed.iter().filter_map(|p| RawTripleCandidate::new(&p.head, &p.relation, &p.tail, source.clone())),
        );
        diagnostics.extend(diags.into_iter().map(|diagnostic| ChunkDiagnostic { chunk: i, diagnostic }));
    }
    if candidates.is_empty() {
        return Err(ExtractError::EmptyExtraction { title: doc.title.clone(), diagnostics: diagnostics.len() });
    }
    Ok(Extraction { candidates, diagnostics, chunks: chunks.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedChatProvider;
    use chrono::TimeZone;

    fn doc(text: &str) -> PageDocument {
        PageDocument {
            title: "Renewable energy".into(),
            url: "https://en.wikipedia.org/wiki/Renewable_energy".into(),
            plain_text: text.into(),
            links: vec![],
            retrieved_at: chrono::Utc.with_ymd_and_hms(2024, 5, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn chunking_respects_budget_and_order() {
        let text = "aaaa aaaa.\n\nbbbb bbbb.\n\ncccc. dddd. eeee.";
        let chunks = chunk_paragraphs(text, 24);
        assert_eq!(chunks, vec!["aaaa aaaa.\n\nbbbb bbbb.", "cccc. dddd. eeee."]);
        let small = chunk_paragraphs(text, 8);
        assert!(small.len() >= 4);
        assert_eq!(small.join(" ").replace("\n\n", " ").split_whitespace().count(), 7);
        assert_eq!(chunk_paragraphs(text, 10_000).len(), 1);
    }

    #[test]
    fn candidates_carry_page_source() {
        let llm = ScriptedChatProvider::replies(["(Renewable energy, HasNumericValue, 20% to 28%)\nnoise"]);
        let ex =
            extract_candidate_triples(&doc("Some text."), &PromptConfig::chat_style(), &llm, ExtractOptions::default())
                .unwrap();
        assert_eq!(ex.candidates.len(), 1);
        let c = &ex.candidates[0];
        assert_eq!((c.head(), c.relation_text(), c.tail()), ("Renewable energy", "HasNumericValue", "20% to 28%"));
        assert_eq!(c.source().page_title, "Renewable energy");
        assert_eq!(ex.diagnostics.len(), 1);
        let prompt = &llm.requests()[0].messages[0].content;
        assert!(prompt.contains("Some text.") && prompt.contains(NO_REPEAT_INSTRUCTION));
    }

    #[test]
    fn prose_only_is_empty_extraction() {
        let llm = ScriptedChatProvider::replies(["I could not find any triples."]);
        let err = extract_candidate_triples(&doc("x y"), &PromptConfig::chat_style(), &llm, ExtractOptions::default());
        assert!(matches!(err, Err(ExtractError::EmptyExtraction { diagnostics: 1, .. })));
    }

    #[test]
    fn provider_failure_is_unavailable() {
        let llm = ScriptedChatProvider::replies(Vec::<String>::new());
        let err = extract_candidate_triples(&doc("x y"), &PromptConfig::chat_style(), &llm, ExtractOptions::default());
        assert!(matches!(err, Err(ExtractError::ProviderUnavailable { .. })));
        let empty = extract_candidate_triples(&doc("  "), &PromptConfig::chat_style(), &llm, ExtractOptions::default());
        assert!(matches!(empty, Err(ExtractError::EmptyDocument(_))));
    }
}
