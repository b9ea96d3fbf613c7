use serde::Serialize;

use super::GroundingError;
use crate::kg::{Triple, TripleId};
use crate::llm::{ChatMessage, ChatProvider, ChatRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerbalizeMode {
    Template,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceSentence {
    pub text: String,
    pub triple_id: TripleId,
    /// How the sentence was actually produced, after any fallback.
    pub mode: VerbalizeMode,
    pub citation_url: Option<String>,
}

fn terminate(s: &str) -> String {
    let s = s.trim();
    if s.ends_with(['.', '!', '?']) {
        s.to_owned()
    } else {
        format!("{s}.")
    }
}

/// `<head> <relation phrase> <tail>.`
pub fn template_sentence(triple: &Triple) -> String {
    terminate(&format!("{} {} {}", triple.head(), triple.relation().phrase(), triple.tail()))
}

fn llm_request(triple: &Triple) -> ChatRequest {
    ChatRequest::new(vec![ChatMessage::user(format!(
        "Rewrite this knowledge graph triple as one grammatical English sentence. \
         Keep every number exactly as written and reply with the sentence only.\n\
         Triple: ({}, {}, {})",
        triple.head(),
        triple.relation().name(),
        triple.tail()
    ))])
}

/// Turns a triple into an evidence sentence.
///
/// In llm mode an empty, multi-paragraph or failed completion falls back to
/// the template sentence; the returned `mode` says which path was used.
pub fn verbalize_triple(
    triple: &Triple,
    mode: VerbalizeMode,
    llm: Option<&dyn ChatProvider>,
) -> Result<EvidenceSentence, GroundingError> {
    let text = match mode {
        VerbalizeMode::Template => None,
        VerbalizeMode::Llm => {
            let llm = llm.ok_or(GroundingError::MissingProvider)?;
            match llm.complete(&llm_request(triple)) {
                Ok(out) => {
                    let out = out.trim();
                    let single = !out.is_empty() && !out.contains("\n\n");
                    single.then(|| terminate(&out.split_whitespace().collect::<Vec<_>>().join(" ")))
                }
                Err(e) => {
                    log::warn!("verbalization fell back to template: {e}");
                    None
                }
            }
        }
    };
    let (text, mode) = match text {
        Some(t) => (t, VerbalizeMode::Llm),
        None => (template_sentence(triple), VerbalizeMode::Template),
    };
    Ok(EvidenceSentence {
        text,
        triple_id: triple.id().clone(),
        mode,
        citation_url: triple.citation_url().map(str::to_owned),
    })
}
