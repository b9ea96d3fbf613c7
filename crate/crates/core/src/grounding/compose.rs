use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::{
    match_triples, verbalize_triple, ContextQuery, EvidenceSentence, GroundingError, ScoredTriple, VerbalizeMode,
};
use crate::embed::{EmbeddingCache, EmbeddingProvider};
use crate::kg::KnowledgeGraph;
use crate::llm::{ChatMessage, ChatProvider, ChatRequest, LlmError};

const EXEMPLARS_JSON: &str = include_str!("../../data/grounding/in_context_exemplars.json");
const COV_TEMPLATE_RAW: &str = include_str!("../../data/grounding/cov_secondary_prompt.txt");

/// The verification prompt with its `#` header lines removed.
pub static COV_SECONDARY_PROMPT: LazyLock<String> =
    LazyLock::new(|| COV_TEMPLATE_RAW.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub context: String,
    pub evidence: Vec<String>,
    pub response: String,
}

/// The bundled few-shot pairs for the in-context strategy.
pub fn in_context_exemplars() -> Vec<Exemplar> {
    serde_json::from_str(EXEMPLARS_JSON).expect("bundled exemplars parse")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Rag,
    InContext,
    Cov,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rag => "rag",
            Strategy::InContext => "in_context",
            Strategy::Cov => "cov",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rag" => Ok(Strategy::Rag),
            "ic" | "in_context" | "in-context" => Ok(Strategy::InContext),
            "cov" => Ok(Strategy::Cov),
            other => Err(format!("unknown strategy {other:?} (expected rag, ic or cov)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub stage: &'static str,
    pub request: ChatRequest,
    pub completion: String,
}

/// What had been produced when a strategy stage failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PartialArtifacts {
    pub scored_triples: Vec<ScoredTriple>,
    pub evidence: Vec<EvidenceSentence>,
    pub draft_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundedResponse {
    pub final_text: String,
    pub draft_text: String,
    pub evidence: Vec<EvidenceSentence>,
    pub strategy: Strategy,
    pub scored_triples: Vec<ScoredTriple>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification_log: Option<Vec<LogEntry>>,
}

fn evidence_lines(evidence: &[EvidenceSentence]) -> String {
    evidence
        .iter()
        .map(|e| match &e.citation_url {
            Some(u) => format!("- {} (source: {u})", e.text),
            None => format!("- {}", e.text),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn rag_prompt(context: &str, evidence: &[EvidenceSentence]) -> String {
    format!(
        "EVIDENCE:\n{}\n\nCONTEXT:\n{}\n\nReply to the context. Work the evidence into the reply, keep its numbers exact and cite the source links.",
        evidence_lines(evidence),
        context.trim()
    )
}

fn in_context_prompt(context: &str, evidence: &[EvidenceSentence]) -> String {
    let mut out = String::from(
        "Each example pairs a context and evidence with a reply grounded in that evidence. Write the reply for the last context in the same way.\n\n",
    );
    for ex in in_context_exemplars() {
        let ev: Vec<String> = ex.evidence.iter().map(|e| format!("- {e}")).collect();
        out.push_str(&format!("Context: {}\nEvidence:\n{}\nReply: {}\n\n", ex.context, ev.join("\n"), ex.response));
    }
    out.push_str(&format!("Context: {}\nEvidence:\n{}\nReply:", context.trim(), evidence_lines(evidence)));
    out
}

fn cov_prompt(context: &str, draft: &str, evidence: &[EvidenceSentence]) -> String {
    COV_SECONDARY_PROMPT
        .replace("{context}", context.trim())
        .replace("{draft}", draft.trim())
        .replace("{evidence}", &evidence_lines(evidence))
}

/// Text after the last `Revised reply:` marker, or the whole completion.
fn revision(completion: &str) -> String {
    match completion.rfind("Revised reply:") {
        Some(i) => completion[i + "Revised reply:".len()..].trim().to_owned(),
        None => completion.trim().to_owned(),
    }
}

/// Retrieves evidence for `query` and produces a grounded reply with the
/// chosen strategy.
///
/// * `Rag` and `InContext` make one call; the draft equals the final text.
/// * `Cov` drafts from the bare context, then asks for verification and
///   revision against the evidence. Both calls are logged.
pub fn compose_response(
    query: &ContextQuery,
    graph: &KnowledgeGraph,
    strategy: Strategy,
    llm: &dyn ChatProvider,
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    verbalize: VerbalizeMode,
) -> Result<GroundedResponse, GroundingError> {
    let scored_triples = match_triples(query, graph, provider, cache)?;
    let evidence = scored_triples
        .iter()
        .map(|s| verbalize_triple(&s.triple, verbalize, Some(llm)))
        .collect::<Result<Vec<_>, _>>()?;
    let fail = |stage: &'static str, draft: Option<String>, source: LlmError| GroundingError::StrategyFailed {
        stage,
        partial: Box::new(PartialArtifacts {
            scored_triples: scored_triples.clone(),
            evidence: evidence.clone(),
            draft_text: draft,
        }),
        source,
    };
    let call = |stage: &'static str, prompt: String, draft: Option<&str>| {
        let req = ChatRequest::new(vec![ChatMessage::user(prompt)]);
        llm.complete(&req)
            .map(|c| LogEntry { stage, request: req, completion: c })
            .map_err(|e| fail(stage, draft.map(str::to_owned), e))
    };

    let (final_text, draft_text, log) = match strategy {
        Strategy::Rag => {
            let e = call("rag", rag_prompt(query.text(), &evidence), None)?;
            (e.completion.clone(), e.completion, None)
        }
        Strategy::InContext => {
            let e = call("in_context", in_context_prompt(query.text(), &evidence), None)?;
            (e.completion.clone(), e.completion, None)
        }
        Strategy::Cov => {
            let draft = call("draft", query.text().trim().to_owned(), None)?;
            let verify =
                call("verify", cov_prompt(query.text(), &draft.completion, &evidence), Some(&draft.completion))?;
            (revision(&verify.completion), draft.completion.clone(), Some(vec![draft, verify]))
        }
    };
    Ok(GroundedResponse { final_text, draft_text, evidence, strategy, scored_triples, verification_log: log })
}
