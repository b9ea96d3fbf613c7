//! Automatic response-quality metrics and the report emitter.
//!
//! N-gram metrics: [`bleu1`], [`rouge_l`], [`meteor_lite`] and [`cider`].
//! Embedding metrics: [`embedding_metric`] with EACS, VECS, GMS or STCS.
//! All of them share [`tokenize`].

mod embedding;
mod ngram;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, EmbeddingCache, EmbeddingProvider};

pub use embedding::{embedding_metric, extrema_vector, greedy_directional, mean_vector, EmbeddingMetric};
pub use ngram::{
    bleu1, cider, meteor_align, meteor_lite, rouge_l, stem, MeteorAlignment, CIDER_MAX_N, CIDER_SCALE, ROUGE_L_BETA,
};
pub use tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("pair {id:?}: {side} text is empty")]
    EmptyText { id: String, side: &'static str },
    #[error("pair {id:?}: {side} has no tokens")]
    EmptyTokens { id: String, side: &'static str },
    #[error("corpus metric needs at least {needed} pairs, got {got}")]
    CorpusTooSmall { needed: usize, got: usize },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("pairs file line {line}: {message}")]
    PairsFile { line: usize, message: String },
    #[error("metric {metric} produced non-finite score for pair {id:?}")]
    NonFinite { metric: Metric, id: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// A generated response and the ground-truth text it is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub reference: String,
    pub candidate: String,
}

impl EvalPair {
    pub fn new(
        id: impl Into<String>,
        reference: impl Into<String>,
        candidate: impl Into<String>,
    ) -> Result<Self, EvalError> {
        let pair = Self { id: id.into(), reference: reference.into(), candidate: candidate.into() };
        pair.check()?;
        Ok(pair)
    }

    fn check(&self) -> Result<(), EvalError> {
        if self.reference.trim().is_empty() {
            return Err(EvalError::EmptyText { id: self.id.clone(), side: "reference" });
        }
        if self.candidate.trim().is_empty() {
            return Err(EvalError::EmptyText { id: self.id.clone(), side: "candidate" });
        }
        Ok(())
    }

    pub fn reference_tokens(&self) -> Vec<String> {
        tokenize(&self.reference)
    }

    pub fn candidate_tokens(&self) -> Vec<String> {
        tokenize(&self.candidate)
    }

    pub(crate) fn require_both(&self, cand: &[String], refr: &[String]) -> Result<(), EvalError> {
        if cand.is_empty() {
            return Err(EvalError::EmptyTokens { id: self.id.clone(), side: "candidate" });
        }
        if refr.is_empty() {
            return Err(EvalError::EmptyTokens { id: self.id.clone(), side: "reference" });
        }
        Ok(())
    }
}

/// Reads a line-delimited `{id, reference, candidate}` file.
pub fn read_pairs<R: BufRead>(source: R) -> Result<Vec<EvalPair>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| EvalError::PairsFile { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: EvalPair =
            serde_json::from_str(&line).map_err(|e| EvalError::PairsFile { line: i + 1, message: e.to_string() })?;
        pair.check()?;
        out.push(pair);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Bleu1,
    Meteor,
    RougeL,
    Cider,
    Stcs,
    Eacs,
    Vecs,
    Gms,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Bleu1,
        Metric::Meteor,
        Metric::RougeL,
        Metric::Cider,
        Metric::Stcs,
        Metric::Eacs,
        Metric::Vecs,
        Metric::Gms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu1 => "bleu1",
            Metric::Meteor => "meteor",
            Metric::RougeL => "rougeL",
            Metric::Cider => "cider",
            Metric::Stcs => "stcs",
            Metric::Eacs => "eacs",
            Metric::Vecs => "vecs",
            Metric::Gms => "gms",
        }
    }

    fn embedding_kind(self) -> Option<EmbeddingMetric> {
        match self {
            Metric::Eacs => Some(EmbeddingMetric::Eacs),
            Metric::Vecs => Some(EmbeddingMetric::Vecs),
            Metric::Gms => Some(EmbeddingMetric::Gms),
            Metric::Stcs => Some(EmbeddingMetric::Stcs),
            _ => None,
        }
    }

    /// Parses a comma-separated list such as `bleu1,rougeL,cider`.
    pub fn parse_list(list: &str) -> Result<Vec<Metric>, EvalError> {
        let mut out = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m: Metric = name.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EvalError::UnknownMetric(s.to_owned()))
    }
}

/// Tokenizer and metric parameters recorded with every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub tokenizer: &'static str,
    pub embedding_model: Option<String>,
    pub rouge_l_beta: f64,
    pub meteor: &'static str,
    pub cider: &'static str,
    pub spice: &'static str,
}

impl ReportConfig {
    fn new(embedding_model: Option<String>) -> Self {
        Self {
            tokenizer: "lowercase unicode words; '-' joins alphanumerics, '.'/',' join digits, \
                        apostrophe joins letters, trailing % kept on numbers; other punctuation split",
            embedding_model,
            rouge_l_beta: ROUGE_L_BETA,
            meteor: "lite: exact then suffix-stem alignment, no synonym stage; alpha=0.9 (10PR/(R+9P)), \
                     penalty 0.5*(chunks/matches)^3",
            cider: "n=1..4, tf-idf with idf=ln(N/max(1,df)) over references, cosine per n, mean x10, single reference",
            spice: "not implemented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_pair: BTreeMap<String, BTreeMap<String, f64>>,
    pub corpus: BTreeMap<String, f64>,
    pub config: ReportConfig,
}

impl MetricReport {
    /// Fixed-width console table: one row per metric, corpus mean and pair count.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>10} {:>7}", "metric", "mean", "pairs");
        let _ = writeln!(out, "{:-<10} {:->10} {:->7}", "", "", "");
        for m in Metric::ALL {
            if let Some(v) = self.corpus.get(m.name()) {
                let _ = writeln!(out, "{:<10} {:>10.4} {:>7}", m.name(), v, self.per_pair.len());
            }
        }
        let _ = writeln!(out, "{:<10} {:>10} {:>7}", "spice", "n/a", "-");
        let _ = writeln!(out, "spice: {}", self.config.spice);
        out
    }
}

/// Scores every pair on every requested metric. Embedding metrics need a
/// provider and its cache.
pub fn evaluate(
    pairs: &[EvalPair],
    metrics: &[Metric],
    embedder: Option<(&dyn EmbeddingProvider, &EmbeddingCache)>,
) -> Result<MetricReport, EvalError> {
    let mut per_pair: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for p in pairs {
        p.check()?;
        per_pair.entry(p.id.clone()).or_default();
    }
    let mut record = |m: Metric, id: &str, v: f64| -> Result<(), EvalError> {
        if !v.is_finite() {
            return Err(EvalError::NonFinite { metric: m, id: id.to_owned() });
        }
        per_pair.get_mut(id).expect("pair registered").insert(m.name().to_owned(), v);
        Ok(())
    };
    for &m in metrics {
        match m {
            Metric::Cider => {
                for (p, s) in pairs.iter().zip(cider(pairs)?) {
                    record(m, &p.id, s)?;
                }
            }
            Metric::Bleu1 | Metric::RougeL | Metric::Meteor => {
                let f = match m {
                    Metric::Bleu1 => bleu1,
                    Metric::RougeL => rouge_l,
                    _ => meteor_lite,
                };
                for p in pairs {
                    record(m, &p.id, f(p)?)?;
                }
            }
            _ => {
                let kind = m.embedding_kind().expect("embedding metric");
                let (provider, cache) = embedder.ok_or_else(|| {
                    EvalError::Embed(EmbedError::ProviderUnavailable {
                        model: "none".into(),
                        reason: format!("metric {m} needs an embedding provider"),
                    })
                })?;
                for p in pairs {
                    record(m, &p.id, embedding_metric(kind, p, provider, cache)?)?;
                }
            }
        }
    }
    let mut corpus = BTreeMap::new();
    for &m in metrics {
        let vals: Vec<f64> = per_pair.values().filter_map(|s| s.get(m.name()).copied()).collect();
        if !vals.is_empty() {
            corpus.insert(m.name().to_owned(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    Ok(MetricReport { per_pair, corpus, config: ReportConfig::new(embedder.map(|(p, _)| p.model_id().to_owned())) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::MockEmbeddingProvider;

    #[test]
    fn metric_names_parse() {
        let all = Metric::parse_list("bleu1,rougeL,meteor,cider,eacs,vecs,gms,stcs").unwrap();
        assert_eq!(all.len(), 8);
        assert!(matches!(Metric::parse_list("bleu4"), Err(EvalError::UnknownMetric(_))));
    }

    #[test]
    fn report_means_and_table() {
        let pairs = vec![
            EvalPair::new("a", "the cat sat", "the cat sat").unwrap(),
            EvalPair::new("b", "the cat slept", "the cat sat").unwrap(),
        ];
        let p = MockEmbeddingProvider::new(32);
        let cache = EmbeddingCache::in_memory(p.model_id(), 32);
        let report = evaluate(&pairs, &Metric::ALL, Some((&p, &cache))).unwrap();
        let bleu = report.corpus["bleu1"];
        assert!((bleu - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        for m in Metric::ALL {
            let mean = report.per_pair.values().map(|s| s[m.name()]).sum::<f64>() / 2.0;
            assert!((report.corpus[m.name()] - mean).abs() < 1e-9);
        }
        let table = report.to_table();
        assert!(table.contains("bleu1"));
        assert!(table.contains("spice: not implemented"));
    }

    #[test]
    fn embedding_metrics_need_provider() {
        let pairs = vec![EvalPair::new("a", "x", "y").unwrap()];
        assert!(evaluate(&pairs, &[Metric::Gms], None).is_err());
        assert!(evaluate(&pairs, &[Metric::Bleu1], None).is_ok());
    }

    #[test]
    fn pairs_file() {
        let input = "{\"id\":\"1\",\"reference\":\"a b\",\"candidate\":\"a\"}\n\n{\"id\":\"2\",\"reference\":\"c\",\"candidate\":\" \"}\n";
        assert!(matches!(read_pairs(input.as_bytes()), Err(EvalError::EmptyText { .. })));
        let ok = read_pairs(&input.as_bytes()[..input.find("\n\n").unwrap()]).unwrap();
        assert_eq!(ok[0].id, "1");
    }

    #[test]
    fn empty_pair_rejected() {
        assert!(EvalPair::new("x", "", "a").is_err());
        assert!(EvalPair::new("x", "a", "  ").is_err());
    }
}
