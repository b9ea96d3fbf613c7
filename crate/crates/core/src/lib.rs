//! Knowledge-graph grounding for chat responses.
//!
//! The pipeline crawls Wikipedia pages on a set of topics, asks a chat
//! model for (head, relation, tail) triples over a closed relation schema,
//! and stores the validated triples as a `.triples.jsonl` graph. At answer
//! time a context is embedded, matched against the graph, and the closest
//! triples are turned into evidence sentences that the chat model must
//! use. Automatic text-similarity metrics score generated replies.
//!
//! Every external service sits behind a trait ([`transport::Transport`],
//! [`embed::EmbeddingProvider`], [`llm::ChatProvider`], [`clock::Clock`])
//! with deterministic offline implementations.

pub mod clock;
pub mod embed;
pub mod eval;
pub mod extract;
pub mod grounding;
pub mod kg;
pub mod llm;
pub mod text;
pub mod topics;
pub mod transport;
pub mod wiki;

/// The guide under `book/` is compiled here so its snippets run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/triples.md")]
    mod triples {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/topics.md")]
    mod topics {}
    #[doc = include_str!("../../../book/src/extraction.md")]
    mod extraction {}
    #[doc = include_str!("../../../book/src/grounding.md")]
    mod grounding {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
