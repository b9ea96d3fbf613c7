use std::fmt;

use serde::Serialize;

use kgground::embed::EmbedError;
use kgground::eval::EvalError;
use kgground::extract::ExtractError;
use kgground::grounding::GroundingError;
use kgground::kg::KgError;
use kgground::llm::LlmError;
use kgground::topics::TopicError;
use kgground::wiki::WikiError;

/// A domain failure. Printed to stderr as one JSON line; exit code 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<&'static str>,
}

pub const NETWORK_FORBIDDEN: &str = "network_forbidden";

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), stage: None }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn io(what: impl fmt::Display, e: std::io::Error) -> Self {
        Self::new("io", format!("{what}: {e}"))
    }

    pub fn network_forbidden(attempts: usize) -> Self {
        Self::new(NETWORK_FORBIDDEN, format!("offline mode: {attempts} network request(s) were attempted and refused"))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<WikiError> for CliError {
    fn from(e: WikiError) -> Self {
        let kind = if e.is_network_forbidden() { NETWORK_FORBIDDEN } else { "wiki" };
        Self::new(kind, e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        Self::new("embed", e.to_string())
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        Self::new("llm", e.to_string())
    }
}

impl From<KgError> for CliError {
    fn from(e: KgError) -> Self {
        Self::new("graph_format", e.to_string())
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        Self::new("extract", e.to_string())
    }
}

impl From<GroundingError> for CliError {
    fn from(e: GroundingError) -> Self {
        let stage = match &e {
            GroundingError::StrategyFailed { stage, .. } => Some(*stage),
            _ => None,
        };
        Self { kind: "grounding", message: e.to_string(), stage }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::new("eval", e.to_string())
    }
}

impl From<TopicError> for CliError {
    fn from(e: TopicError) -> Self {
        Self::new("topics", e.to_string())
    }
}
