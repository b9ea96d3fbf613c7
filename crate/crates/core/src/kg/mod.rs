//! Knowledge graph domain types, the relation schema and the triple file format.

mod format;
mod graph;
mod relation;
mod triple;

pub use format::{
    export_review, import_review, parse_graph, serialize_graph, KgError, ParsedGraph, Verdict, FILE_EXTENSION,
};
pub use graph::{InsertOutcome, KnowledgeGraph};
pub use relation::{RelationKind, UnknownRelation, LISTED_RELATIONS, RELATION_EXAMPLES};
pub use triple::{
    validate_triple, SourceError, SourceRef, Triple, TripleId, ValidatedFields, ValidationReport, Violation,
};
