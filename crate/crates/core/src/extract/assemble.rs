use std::collections::BTreeMap;

use chrono::Utc;
use serde::Serialize;

use super::canon::{canonicalize_relation, Canonicalization};
use super::RawTripleCandidate;
use crate::embed::{EmbedError, EmbeddingCache, EmbeddingProvider};
use crate::kg::{validate_triple, InsertOutcome, KnowledgeGraph, RelationKind, Triple, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    RelationUnmatched,
    Validation,
    Duplicate,
}

impl RejectionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RelationUnmatched => "relation_unmatched",
            Self::Validation => "validation",
            Self::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub reason: RejectionReason,
    pub candidate: RawTripleCandidate,
    pub detail: String,
    /// Best schema relation and its score, for unmatched relation text.
    pub best: Option<(RelationKind, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RejectionReport {
    pub entries: Vec<Rejection>,
}

impl RejectionReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, reason: RejectionReason) -> usize {
        self.entries.iter().filter(|e| e.reason == reason).count()
    }

    /// Counts keyed by reason name. Reasons with no entries are omitted.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.reason.as_str()).or_insert(0) += 1;
        }
        m
    }
}

/// Runs each candidate through relation canonicalization, validation and
/// tail classification, then inserts it. Later duplicates merge their
/// source into the first occurrence and are reported.
///
/// Candidate-level failures land in the report. Only embedding failures,
/// which make every further candidate meaningless, abort the run.
pub fn dedup_and_assemble(
    candidates: &[RawTripleCandidate],
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    threshold: f64,
) -> Result<(KnowledgeGraph, RejectionReport), EmbedError> {
    let mut graph = KnowledgeGraph::new();
    let mut report = RejectionReport::default();
    let now = Utc::now();
    for cand in candidates {
        let reject = |reason, detail: String, best| Rejection { reason, candidate: cand.clone(), detail, best };
        let relation = match canonicalize_relation(cand.relation_text(), provider, cache, threshold) {
            Ok(Canonicalization::Matched { relation, .. }) => relation,
            Ok(Canonicalization::Rejected { best, score }) => {
                report.entries.push(reject(
                    RejectionReason::RelationUnmatched,
                    format!("{:?} best matches {best} at {score:.4}", cand.relation_text()),
                    Some((best, score)),
                ));
                continue;
            }
            Err(EmbedError::EmptyText) => {
                report.entries.push(reject(
                    RejectionReason::RelationUnmatched,
                    format!("{:?} has no word tokens", cand.relation_text()),
                    None,
                ));
                continue;
            }
            Err(e) => return Err(e),
        };
        let fields = match validate_triple(cand.head(), relation.name(), cand.tail()) {
            ValidationReport::Valid(f) => f,
            ValidationReport::Invalid(v) => {
                let rules: Vec<&str> = v.iter().map(|x| x.rule()).collect();
                report.entries.push(reject(RejectionReason::Validation, rules.join(","), None));
                continue;
            }
        };
        if let Err(e) = cand.source().check(now) {
            report.entries.push(reject(RejectionReason::Validation, e.to_string(), None));
            continue;
        }
        let triple = Triple::from_fields(fields, vec![cand.source().clone()]);
        let id = triple.id().as_str().to_owned();
        if graph.insert(triple) == InsertOutcome::Duplicate {
            report.entries.push(reject(RejectionReason::Duplicate, id, None));
        }
    }
    Ok((graph, report))
}
