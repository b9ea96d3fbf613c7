use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::relation::RelationKind;
use crate::extract::tail::classify_tail;
use crate::text::{content_hash, key_form, normalize};

/// Where a triple was found.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub page_title: String,
    pub page_url: String,
    pub retrieved_at: DateTime<Utc>,
    /// Model identifier of the extracting provider, or `manual`.
    pub extractor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("page_url {0:?} is not an absolute URL")]
    RelativeUrl(String),
    #[error("retrieved_at {0} is in the future")]
    FutureTimestamp(DateTime<Utc>),
}

impl SourceRef {
    pub fn manual() -> Self {
        Self {
            page_title: String::new(),
            page_url: String::new(),
            retrieved_at: DateTime::<Utc>::UNIX_EPOCH,
            extractor: "manual".into(),
        }
    }

    /// Checks the URL and timestamp rules against `now`.
    pub fn check(&self, now: DateTime<Utc>) -> Result<(), SourceError> {
        if !self.page_title.is_empty() {
            let absolute =
                url::Url::parse(&self.page_url).map(|u| u.has_host() && !u.scheme().is_empty()).unwrap_or(false);
            if !absolute {
                return Err(SourceError::RelativeUrl(self.page_url.clone()));
            }
        }
        if self.retrieved_at > now {
            return Err(SourceError::FutureTimestamp(self.retrieved_at));
        }
        Ok(())
    }
}

/// Content hash of the lowercase-normalized (head, relation, tail).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripleId(String);

impl TripleId {
    pub fn of(head: &str, relation: RelationKind, tail: &str) -> Self {
        let digest = content_hash(&[&key_form(head), relation.name(), &key_form(tail)]);
        TripleId(digest[..16].to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TripleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A rule broken by raw triple fields.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("head is empty")]
    EmptyHead,
    #[error("tail is empty")]
    EmptyTail,
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("head equals tail")]
    HeadEqualsTail,
}

impl Violation {
    /// Stable snake_case rule name.
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::EmptyHead => "head_empty",
            Violation::EmptyTail => "tail_empty",
            Violation::UnknownRelation(_) => "relation_unknown",
            Violation::HeadEqualsTail => "head_equals_tail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedFields {
    pub head: String,
    pub relation: RelationKind,
    pub tail: String,
    pub id: TripleId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationReport {
    Valid(ValidatedFields),
    Invalid(Vec<Violation>),
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Valid(_))
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            ValidationReport::Valid(_) => &[],
            ValidationReport::Invalid(v) => v,
        }
    }
}

/// Normalizes and checks raw triple text. Never fails; problems are reported
/// as [`Violation`]s.
pub fn validate_triple(raw_head: &str, raw_relation: &str, raw_tail: &str) -> ValidationReport {
    let head = normalize(raw_head);
    let tail = normalize(raw_tail);
    let mut violations = Vec::new();
    if head.is_empty() {
        violations.push(Violation::EmptyHead);
    }
    if tail.is_empty() {
        violations.push(Violation::EmptyTail);
    }
    let relation = RelationKind::lookup(raw_relation);
    if relation.is_none() {
        violations.push(Violation::UnknownRelation(raw_relation.trim().to_owned()));
    }
    if !head.is_empty() && head.to_lowercase() == tail.to_lowercase() {
        violations.push(Violation::HeadEqualsTail);
    }
    match relation {
        Some(relation) if violations.is_empty() => {
            let id = TripleId::of(&head, relation, &tail);
            ValidationReport::Valid(ValidatedFields { head, relation, tail, id })
        }
        _ => ValidationReport::Invalid(violations),
    }
}

/// A validated fact. Construct through [`Triple::new`] or [`Triple::from_fields`];
/// the statistical flag is always derived from the tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    head: String,
    relation: RelationKind,
    tail: String,
    is_statistical: bool,
    sources: Vec<SourceRef>,
    id: TripleId,
    embedding_key: String,
}

impl Triple {
    pub fn new(head: &str, relation: &str, tail: &str, source: SourceRef) -> Result<Self, Vec<Violation>> {
        match validate_triple(head, relation, tail) {
            ValidationReport::Valid(fields) => Ok(Self::from_fields(fields, vec![source])),
            ValidationReport::Invalid(v) => Err(v),
        }
    }

    pub fn from_fields(fields: ValidatedFields, sources: Vec<SourceRef>) -> Self {
        let is_statistical = classify_tail(&fields.tail).is_statistical;
        let embedding_key = format!("{} {} {}", fields.head, fields.relation.spoken(), fields.tail);
        Self {
            embedding_key,
            head: fields.head,
            relation: fields.relation,
            tail: fields.tail,
            is_statistical,
            sources,
            id: fields.id,
        }
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn relation(&self) -> RelationKind {
        self.relation
    }

    pub fn tail(&self) -> &str {
        &self.tail
    }

    pub fn is_statistical(&self) -> bool {
        self.is_statistical
    }

    pub fn sources(&self) -> &[SourceRef] {
        &self.sources
    }

    pub fn id(&self) -> &TripleId {
        &self.id
    }

    /// First source with a URL, used for citations.
    pub fn citation_url(&self) -> Option<&str> {
        self.sources.iter().map(|s| s.page_url.as_str()).find(|u| !u.is_empty())
    }

    /// Text fed to the encoder when matching: `head relation words tail`.
    pub fn embedding_key(&self) -> &str {
        &self.embedding_key
    }

    /// Appends sources not already present. Returns how many were added.
    pub(crate) fn merge_sources(&mut self, other: &[SourceRef]) -> usize {
        let mut added = 0;
        for s in other {
            if !self.sources.contains(s) {
                self.sources.push(s.clone());
                added += 1;
            }
        }
        added
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renewable_energy_percentage_range_is_valid() {
        let report = validate_triple("Renewable energy", "HasNumericValue", "20% to 28%");
        let ValidationReport::Valid(f) = report else { panic!("{report:?}") };
        assert_eq!(f.relation, RelationKind::HasNumericValue);
        assert_eq!(f.head, "Renewable energy");
    }

    #[test]
    fn identical_head_and_tail_rejected() {
        let report = validate_triple("X", "HasNumericValue", "X");
        assert_eq!(report.violations(), [Violation::HeadEqualsTail]);
        let report = validate_triple("Solar  Power", "Reduces", "solar power");
        assert_eq!(report.violations(), [Violation::HeadEqualsTail]);
    }

    #[test]
    fn lowercase_relation_resolves() {
        let report = validate_triple("Wind Energy", "hascapacity", "63 GW");
        let ValidationReport::Valid(f) = report else { panic!() };
        assert_eq!(f.relation, RelationKind::HasCapacity);
    }

    #[test]
    fn reports_every_violation() {
        let report = validate_triple("  ", "Nope", "");
        let rules: Vec<_> = report.violations().iter().map(Violation::rule).collect();
        assert_eq!(rules, ["head_empty", "tail_empty", "relation_unknown"]);
    }

    #[test]
    fn id_ignores_case_and_spacing_but_display_keeps_it() {
        let a = Triple::new("Wind Energy", "HasCapacity", "63 GW", SourceRef::manual()).unwrap();
        let b = Triple::new(" wind  energy", "hascapacity", "63 gw", SourceRef::manual()).unwrap();
        assert_eq!(a.id(), b.id());
        assert_eq!(b.head(), "wind energy");
        assert_eq!(a.head(), "Wind Energy");
    }

    #[test]
    fn id_is_stable_across_runs() {
        // Frozen value; changes here break every persisted graph and cache.
        let id = TripleId::of("Wind Energy", RelationKind::HasCapacity, "63 GW");
        let expected = &content_hash(&["wind energy", "HasCapacity", "63 gw"])[..16];
        assert_eq!(id.as_str(), expected);
    }

    #[test]
    fn source_checks() {
        let now = Utc::now();
        let mut s = SourceRef {
            page_title: "Bioenergy".into(),
            page_url: "https://en.wikipedia.org/wiki/Bioenergy".into(),
            retrieved_at: now - chrono::Duration::days(1),
            extractor: "manual".into(),
        };
        assert!(s.check(now).is_ok());
        s.page_url = "/wiki/Bioenergy".into();
        assert!(matches!(s.check(now), Err(SourceError::RelativeUrl(_))));
        s.page_url = "https://en.wikipedia.org/wiki/Bioenergy".into();
        s.retrieved_at = now + chrono::Duration::days(1);
        assert!(matches!(s.check(now), Err(SourceError::FutureTimestamp(_))));
    }

    #[test]
    fn statistical_flag_follows_tail() {
        let t = Triple::new("Bioenergy", "HasPercentileValue", "13.1% in 2030", SourceRef::manual()).unwrap();
        assert!(t.is_statistical());
        let t = Triple::new("Renewables", "Reduces", "Dependence on fossil fuels", SourceRef::manual()).unwrap();
        assert!(!t.is_statistical());
        assert_eq!(t.embedding_key(), "Renewables reduces Dependence on fossil fuels");
    }
}
