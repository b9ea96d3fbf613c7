use std::collections::HashMap;

use super::triple::{Triple, TripleId};

/// An insertion-ordered, duplicate-free set of triples.
///
/// Position in the graph is the tie-break order for retrieval.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    index: HashMap<TripleId, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// Same fact already present; any new sources were merged onto it.
    Duplicate,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, triple: Triple) -> InsertOutcome {
        if let Some(&pos) = self.index.get(triple.id()) {
            self.triples[pos].merge_sources(triple.sources());
            return InsertOutcome::Duplicate;
        }
        self.index.insert(triple.id().clone(), self.triples.len());
        self.triples.push(triple);
        InsertOutcome::Inserted
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn get(&self, id: &TripleId) -> Option<&Triple> {
        self.index.get(id).map(|&i| &self.triples[i])
    }

    pub fn position(&self, id: &TripleId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triple> {
        self.triples.iter()
    }
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for KnowledgeGraph {}

impl FromIterator<Triple> for KnowledgeGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = Self::new();
        for t in iter {
            g.insert(t);
        }
        g
    }
}

impl<'a> IntoIterator for &'a KnowledgeGraph {
    type Item = &'a Triple;
    type IntoIter = std::slice::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::SourceRef;

    fn src(title: &str) -> SourceRef {
        SourceRef {
            page_title: title.into(),
            page_url: format!("https://en.wikipedia.org/wiki/{title}"),
            retrieved_at: chrono::DateTime::UNIX_EPOCH,
            extractor: "manual".into(),
        }
    }

    #[test]
    fn duplicates_merge_sources_and_keep_first_position() {
        let mut g = KnowledgeGraph::new();
        let a = Triple::new("Wind Energy", "HasCapacity", "63 GW", src("Wind power")).unwrap();
        let b = Triple::new("Solar", "Reduces", "emissions", src("Solar power")).unwrap();
        let a2 = Triple::new("wind energy", "HASCAPACITY", "63 gw", src("Renewable energy")).unwrap();
        assert_eq!(g.insert(a.clone()), InsertOutcome::Inserted);
        assert_eq!(g.insert(b), InsertOutcome::Inserted);
        assert_eq!(g.insert(a2), InsertOutcome::Duplicate);
        assert_eq!(g.len(), 2);
        assert_eq!(g.position(a.id()), Some(0));
        let kept = g.get(a.id()).unwrap();
        assert_eq!(kept.head(), "Wind Energy");
        assert_eq!(kept.sources().len(), 2);
    }
}
