//! The `.triples.jsonl` file format: one JSON object per line with keys
//! `head`, `relation`, `tail`, `is_statistical`, `sources`, in that order.

use std::io::{self, BufRead, Write};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{InsertOutcome, KnowledgeGraph};
use super::relation::RelationKind;
use super::triple::{SourceError, SourceRef, Triple, ValidationReport, Violation};
use super::validate_triple;

pub const FILE_EXTENSION: &str = ".triples.jsonl";

#[derive(Debug, Error)]
pub enum KgError {
    #[error("write failed after {position} bytes: {source}")]
    Io { position: u64, source: io::Error },
    #[error("read failed at line {line}: {source}")]
    Read { line: usize, source: io::Error },
    #[error("line {line}: malformed record ({message}): {text}")]
    Malformed { line: usize, text: String, message: String },
    #[error("line {line}: unknown relation {relation:?}")]
    UnknownRelation { line: usize, relation: String },
    #[error("line {line}: invalid triple: {}", fmt_violations(.violations))]
    InvalidTriple { line: usize, violations: Vec<Violation> },
    #[error("line {line}: invalid source: {source}")]
    InvalidSource { line: usize, source: SourceError },
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(Violation::rule).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
struct RecordOut<'a> {
    head: &'a str,
    relation: RelationKind,
    tail: &'a str,
    is_statistical: bool,
    sources: &'a [SourceRef],
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    head: String,
    relation: String,
    tail: String,
    is_statistical: bool,
    sources: Vec<SourceRef>,
    #[serde(default)]
    verdict: Option<Verdict>,
}

/// Curation decision attached to a triple in a review file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Pending,
    Accept,
    Reject,
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn write_records<W: Write>(graph: &KnowledgeGraph, sink: W, verdict: Option<Verdict>) -> Result<u64, KgError> {
    let mut out = CountingWriter { inner: sink, written: 0 };
    for t in graph {
        let rec = RecordOut {
            head: t.head(),
            relation: t.relation(),
            tail: t.tail(),
            is_statistical: t.is_statistical(),
            sources: t.sources(),
            verdict,
        };
        let mut line = serde_json::to_vec(&rec).expect("record serializes");
        line.push(b'\n');
        out.write_all(&line).map_err(|source| KgError::Io { position: out.written, source })?;
    }
    out.flush().map_err(|source| KgError::Io { position: out.written, source })?;
    Ok(out.written)
}

/// Writes one line per triple in insertion order. Returns the byte count.
pub fn serialize_graph<W: Write>(graph: &KnowledgeGraph, sink: W) -> Result<u64, KgError> {
    write_records(graph, sink, None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedGraph {
    pub graph: KnowledgeGraph,
    /// Records dropped because an equal triple came earlier.
    pub duplicates: usize,
    /// Records whose stored `is_statistical` disagreed with the tail classifier.
    pub flag_corrections: usize,
}

fn parse_records<R: BufRead>(source: R, mut keep: impl FnMut(Option<Verdict>) -> bool) -> Result<ParsedGraph, KgError> {
    let now = Utc::now();
    let mut graph = KnowledgeGraph::new();
    let mut duplicates = 0;
    let mut flag_corrections = 0;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| KgError::Read { line: line_no, source })?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: RecordIn = serde_json::from_str(&text).map_err(|e| KgError::Malformed {
            line: line_no,
            text: text.clone(),
            message: e.to_string(),
        })?;
        if RelationKind::lookup(&rec.relation).is_none() {
            return Err(KgError::UnknownRelation { line: line_no, relation: rec.relation });
        }
        for s in &rec.sources {
            s.check(now).map_err(|source| KgError::InvalidSource { line: line_no, source })?;
        }
        let fields = match validate_triple(&rec.head, &rec.relation, &rec.tail) {
            ValidationReport::Valid(f) => f,
            ValidationReport::Invalid(violations) => return Err(KgError::InvalidTriple { line: line_no, violations }),
        };
        if !keep(rec.verdict) {
            continue;
        }
        let triple = Triple::from_fields(fields, rec.sources);
        if triple.is_statistical() != rec.is_statistical {
            flag_corrections += 1;
        }
        if graph.insert(triple) == InsertOutcome::Duplicate {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("dropped {duplicates} duplicate triple record(s)");
    }
    if flag_corrections > 0 {
        log::warn!("recomputed is_statistical on {flag_corrections} record(s)");
    }
    Ok(ParsedGraph { graph, duplicates, flag_corrections })
}

/// Reads a `.triples.jsonl` stream. Duplicates are dropped and counted.
pub fn parse_graph<R: BufRead>(source: R) -> Result<ParsedGraph, KgError> {
    parse_records(source, |_| true)
}

/// Writes a review file: the triple format plus a `verdict` key, set to `pending`.
pub fn export_review<W: Write>(graph: &KnowledgeGraph, sink: W) -> Result<u64, KgError> {
    write_records(graph, sink, Some(Verdict::Pending))
}

/// Reads a review file back, keeping every triple not marked `reject`.
pub fn import_review<R: BufRead>(source: R) -> Result<ParsedGraph, KgError> {
    parse_records(source, |v| v != Some(Verdict::Reject))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::RELATION_EXAMPLES;

    fn schema_example_graph() -> KnowledgeGraph {
        RELATION_EXAMPLES.iter().map(|(h, r, t)| Triple::new(h, r, t, SourceRef::manual()).unwrap()).collect()
    }

    #[test]
    fn one_triple_is_one_line() {
        let g: KnowledgeGraph =
            [Triple::new("Wind Energy", "HasCapacity", "63 GW", SourceRef::manual()).unwrap()].into_iter().collect();
        let mut buf = Vec::new();
        let n = serialize_graph(&g, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 1);
        assert!(s.ends_with('\n'));
        assert!(s.starts_with(
            r#"{"head":"Wind Energy","relation":"HasCapacity","tail":"63 GW","is_statistical":true,"sources":[{"page_title":"","#
        ));
    }

    #[test]
    fn empty_graph_writes_nothing() {
        let mut buf = Vec::new();
        assert_eq!(serialize_graph(&KnowledgeGraph::new(), &mut buf).unwrap(), 0);
        assert!(buf.is_empty());
    }

    #[test]
    fn schema_example_fixture_roundtrips() {
        let g = schema_example_graph();
        assert_eq!(g.len(), 46);
        let mut buf = Vec::new();
        serialize_graph(&g, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 46);
        let parsed = parse_graph(buf.as_slice()).unwrap();
        assert_eq!(parsed.graph, g);
        assert_eq!(parsed.duplicates, 0);
        assert_eq!(parsed.flag_corrections, 0);
    }

    #[test]
    fn unknown_relation_names_relation_and_line() {
        let line = r#"{"head":"a","relation":"HasMagic","tail":"b","is_statistical":false,"sources":[]}"#;
        let err = parse_graph(line.as_bytes()).unwrap_err();
        assert!(matches!(&err, KgError::UnknownRelation { line: 1, relation } if relation == "HasMagic"));
        assert!(err.to_string().contains("HasMagic"));
    }

    #[test]
    fn malformed_line_carries_text() {
        let input = "{\"head\":\"a\",\"relation\":\"Saves\",\"tail\":\"b\",\"is_statistical\":false,\"sources\":[]}\nnot json\n";
        let err = parse_graph(input.as_bytes()).unwrap_err();
        assert!(matches!(err, KgError::Malformed { line: 2, ref text, .. } if text == "not json"));
    }

    #[test]
    fn identical_records_deduplicate() {
        let line = r#"{"head":"a","relation":"Saves","tail":"b","is_statistical":false,"sources":[]}"#;
        let input = format!("{line}\n{line}\n");
        let parsed = parse_graph(input.as_bytes()).unwrap();
        assert_eq!(parsed.graph.len(), 1);
        assert_eq!(parsed.duplicates, 1);
    }

    #[test]
    fn write_error_reports_position() {
        struct Limited(usize);
        impl Write for Limited {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                if self.0 == 0 {
                    return Err(io::Error::new(io::ErrorKind::StorageFull, "full"));
                }
                let n = buf.len().min(self.0);
                self.0 -= n;
                Ok(n)
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let err = serialize_graph(&schema_example_graph(), Limited(100)).unwrap_err();
        assert!(matches!(err, KgError::Io { position: 100, .. }));
    }

    #[test]
    fn review_roundtrip_drops_rejected() {
        let g = schema_example_graph();
        let mut buf = Vec::new();
        export_review(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().all(|l| l.ends_with(r#""verdict":"pending"}"#)));
        let edited: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 0 { l.replace("pending", "reject") } else { l.to_owned() } + "\n")
            .collect();
        let back = import_review(edited.as_bytes()).unwrap();
        assert_eq!(back.graph.len(), 45);
        assert_eq!(back.graph.triples(), &g.triples()[1..]);
    }
}
