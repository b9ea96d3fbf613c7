//! The `kgground` command line: argument parsing, provider wiring and the
//! subcommands of the pipeline.

pub mod config;
pub mod error;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use kgground::clock::{Clock, SystemClock};
use kgground::embed::{
    EmbeddingCache, EmbeddingProvider, HttpEmbeddingProvider, LexicalEmbeddingProvider, MockEmbeddingProvider,
};
use kgground::eval::{evaluate, read_pairs, Metric};
use kgground::extract::{
    dedup_and_assemble, extract_candidate_triples, ExtractError, ExtractOptions, PromptConfig, RawTripleCandidate,
};
use kgground::grounding::{compose_response, match_triples, ContextQuery, Strategy, VerbalizeMode};
use kgground::kg::{parse_graph, serialize_graph, KnowledgeGraph};
use kgground::llm::{ChatProvider, EchoChatProvider, HttpChatProvider, ReplayChatProvider};
use kgground::topics::{partition_subtopics, RelevancePolicy};
use kgground::transport::{OfflineTransport, Transport, UreqTransport};
use kgground::wiki::{build_corpus, read_topics, write_atomic, Corpus, CrawlPlan, WikiClient};

use config::{AppConfig, EmbedKind, FilterMode, FlagOverrides, LlmKind, VerbalizeKind};
pub use error::CliError;

/// Process-level inputs, injectable for tests.
#[derive(Clone)]
pub struct Context {
    pub cwd: PathBuf,
    pub env: HashMap<String, String>,
    /// Replaces the real network transport. `--offline` still wins.
    pub transport: Option<Arc<dyn Transport>>,
    pub clock: Option<Arc<dyn Clock>>,
}

impl Context {
    pub fn from_process() -> Self {
        Self {
            cwd: std::env::current_dir().unwrap_or_else(|_| PathBuf::from(".")),
            env: std::env::vars().collect(),
            transport: None,
            clock: None,
        }
    }

    /// A context rooted at `cwd` with an empty environment.
    pub fn isolated(cwd: impl Into<PathBuf>) -> Self {
        Self { cwd: cwd.into(), env: HashMap::new(), transport: None, clock: None }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kgground",
    version,
    about = "Build fact-oriented knowledge graphs from Wikipedia and ground chat replies in them"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Configuration file (default: ./kgground.toml when present).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Refuse every network request; a refused request fails the command.
    #[arg(long, global = true)]
    offline: bool,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "URL")]
    wiki_api_base: Option<String>,
    #[arg(long, global = true, value_enum)]
    embed_provider: Option<EmbedKind>,
    #[arg(long, global = true, value_name = "URL")]
    embed_api_base: Option<String>,
    #[arg(long, global = true)]
    embed_model: Option<String>,
    #[arg(long, global = true, value_enum)]
    llm_provider: Option<LlmKind>,
    #[arg(long, global = true, value_name = "URL")]
    llm_api_base: Option<String>,
    #[arg(long, global = true)]
    llm_model: Option<String>,
    #[arg(long, global = true)]
    llm_temperature: Option<f64>,
    /// Directory of recorded completions for the replay chat provider.
    #[arg(long, global = true, value_name = "DIR")]
    replay_dir: Option<PathBuf>,
}

impl GlobalArgs {
    fn overrides(&self) -> FlagOverrides {
        FlagOverrides {
            wiki_api_base: self.wiki_api_base.clone(),
            embed_provider: self.embed_provider,
            embed_api_base: self.embed_api_base.clone(),
            embed_model: self.embed_model.clone(),
            llm_provider: self.llm_provider,
            llm_api_base: self.llm_api_base.clone(),
            llm_model: self.llm_model.clone(),
            llm_temperature: self.llm_temperature,
            replay_dir: self.replay_dir.clone(),
            cache_dir: self.cache_dir.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a seed page's outbound links against an anchor topic.
    ExpandTopics {
        #[arg(long)]
        seed: String,
        /// Anchor heading; defaults to the seed title.
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<FilterMode>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        min_score: Option<f64>,
    },
    /// Fetch the pages for a topic list into the corpus.
    Ingest {
        #[arg(long, value_name = "FILE")]
        topics: PathBuf,
    },
    /// Extract candidate triples from the pages of a topic list.
    Extract {
        #[arg(long, value_name = "FILE")]
        topics: PathBuf,
        /// Write candidates as JSON lines here instead of only summarizing.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Ingest, extract and assemble a `.triples.jsonl` graph.
    BuildKg {
        #[arg(long, value_name = "FILE")]
        topics: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print the graph triples closest to a context.
    Match {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        context: String,
    },
    /// Produce a reply to a context grounded in graph evidence.
    Ground {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// rag, ic (in-context) or cov (chain of verification).
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        context: String,
        #[arg(long, value_enum)]
        verbalize: Option<VerbalizeKind>,
    },
    /// Score candidate texts against references.
    Eval {
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        /// Comma-separated metric names; default is all of them.
        #[arg(long)]
        metrics: Option<String>,
        /// Also write the full report as JSON here.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Inspect or clear the embedding cache of the configured model.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    Stats,
    Purge,
}

/// A command's result in both renderings.
struct Output {
    json: Value,
    human: String,
}

struct Runtime {
    cfg: AppConfig,
    cwd: PathBuf,
    transport: Arc<dyn Transport>,
    offline: Option<Arc<OfflineTransport>>,
    clock: Arc<dyn Clock>,
}

impl Runtime {
    fn new(cfg: AppConfig, ctx: &Context, offline: bool) -> Self {
        let clock = ctx.clock.clone().unwrap_or_else(|| Arc::new(SystemClock::new()));
        let (transport, offline): (Arc<dyn Transport>, _) = if offline {
            let t = Arc::new(OfflineTransport::new());
            (t.clone(), Some(t))
        } else {
            let t = ctx.transport.clone().unwrap_or_else(|| Arc::new(UreqTransport::default()));
            (t, None)
        };
        Self { cfg, cwd: ctx.cwd.clone(), transport, offline, clock }
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.cwd.join(p)
        } else {
            p.to_path_buf()
        }
    }

    /// Fails when offline mode refused any request.
    fn check_offline(&self) -> Result<(), CliError> {
        match &self.offline {
            Some(t) if t.attempts() > 0 => Err(CliError::network_forbidden(t.attempts())),
            _ => Ok(()),
        }
    }

    fn embedder(&self) -> Result<(Arc<dyn EmbeddingProvider>, EmbeddingCache), CliError> {
        let e = &self.cfg.embed;
        let provider: Arc<dyn EmbeddingProvider> = match e.provider {
            EmbedKind::Mock => Arc::new(MockEmbeddingProvider::new(e.dim)),
            EmbedKind::Lexical => Arc::new(LexicalEmbeddingProvider::new(e.dim)),
            EmbedKind::Http => {
                let base = e.api_base.clone().ok_or_else(|| {
                    CliError::config("embed.api_base (EMBED_API_BASE) is required for the http provider")
                })?;
                let model = e
                    .model
                    .clone()
                    .ok_or_else(|| CliError::config("embed.model (EMBED_MODEL) is required for the http provider"))?;
                Arc::new(
                    HttpEmbeddingProvider::new(base, model, e.dim, self.transport.clone(), self.clock.clone())
                        .with_api_key(e.api_key.clone()),
                )
            }
        };
        let cache =
            EmbeddingCache::open(&self.cfg.paths.cache_dir.join("embeddings"), provider.model_id(), provider.dim())?;
        Ok((provider, cache))
    }

    fn chat(&self) -> Result<Arc<dyn ChatProvider>, CliError> {
        let l = &self.cfg.llm;
        Ok(match l.provider {
            LlmKind::Echo => Arc::new(EchoChatProvider),
            LlmKind::Replay => {
                let dir = l
                    .replay_dir
                    .clone()
                    .ok_or_else(|| CliError::config("llm.replay_dir is required for the replay provider"))?;
                let model = l.model.clone().unwrap_or_else(|| "replay".into());
                Arc::new(ReplayChatProvider::from_dir(model, &dir)?)
            }
            LlmKind::Http => {
                let base = l
                    .api_base
                    .clone()
                    .ok_or_else(|| CliError::config("llm.api_base (LLM_API_BASE) is required for the http provider"))?;
                let model = l
                    .model
                    .clone()
                    .ok_or_else(|| CliError::config("llm.model (LLM_MODEL) is required for the http provider"))?;
                Arc::new(
                    HttpChatProvider::new(base, model, self.transport.clone(), self.clock.clone())
                        .with_api_key(l.api_key.clone())
                        .with_temperature(l.temperature),
                )
            }
        })
    }

    fn wiki(&self, seeds: Vec<String>) -> Result<WikiClient, CliError> {
        let w = &self.cfg.wiki;
        let plan = CrawlPlan::new(seeds, self.cfg.paths.cache_dir.clone())?
            .with_max_links(w.max_links_per_page)?
            .with_request_interval(Duration::from_millis(w.request_interval_ms))?
            .with_api_base(w.api_base.clone())?
            .with_max_workers(w.max_workers);
        Ok(WikiClient::new(plan, self.transport.clone(), self.clock.clone()))
    }

    fn topics(&self, file: &Path) -> Result<Vec<String>, CliError> {
        let path = self.path(file);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(path.display(), e))?;
        let topics = read_topics(&text);
        if topics.is_empty() {
            return Err(CliError::new("topics", format!("{} lists no topics", path.display())));
        }
        Ok(topics)
    }

    fn corpus(&self, file: &Path) -> Result<Corpus, CliError> {
        let topics = self.topics(file)?;
        let client = self.wiki(topics.clone())?;
        let corpus = build_corpus(&client, &topics);
        self.check_offline()?;
        Ok(corpus?)
    }

    fn graph(&self, file: &Path) -> Result<KnowledgeGraph, CliError> {
        let path = self.path(file);
        let f = fs::File::open(&path).map_err(|e| CliError::io(path.display(), e))?;
        let parsed = parse_graph(BufReader::new(f))?;
        if parsed.duplicates > 0 {
            log::warn!("{}: dropped {} duplicate records", path.display(), parsed.duplicates);
        }
        Ok(parsed.graph)
    }

    fn extract_all(&self, corpus: &Corpus) -> Result<(Vec<RawTripleCandidate>, Vec<String>, usize), CliError> {
        let llm = self.chat()?;
        let l = &self.cfg.llm;
        let prompt = PromptConfig::for_template(l.template)
            .with_max_triples(l.max_triples_per_call)
            .map_err(|e| CliError::config(e.to_string()))?;
        let options = ExtractOptions {
            chunk_chars: l.chunk_chars,
            max_concurrency: l.max_concurrency,
            temperature: l.temperature,
        };
        let mut candidates = Vec::new();
        let mut empty_pages = Vec::new();
        let mut diagnostics = 0;
        for doc in corpus.documents.values() {
            match extract_candidate_triples(doc, &prompt, llm.as_ref(), options) {
                Ok(ex) => {
                    diagnostics += ex.diagnostics.len();
                    candidates.extend(ex.candidates);
                }
                Err(e @ ExtractError::EmptyExtraction { .. }) => {
                    log::warn!("{e}");
                    empty_pages.push(doc.title.clone());
                }
                Err(e) => {
                    self.check_offline()?;
                    return Err(e.into());
                }
            }
        }
        self.check_offline()?;
        Ok((candidates, empty_pages, diagnostics))
    }
}

fn policy_from(
    cfg: &AppConfig,
    mode: Option<FilterMode>,
    k: Option<usize>,
    min_score: Option<f64>,
) -> Result<RelevancePolicy, CliError> {
    let mode = mode.unwrap_or(cfg.filter.mode);
    Ok(match mode {
        FilterMode::TopK => RelevancePolicy::top_k(k.unwrap_or(cfg.filter.k))?,
        FilterMode::Threshold => RelevancePolicy::threshold(min_score.unwrap_or(cfg.filter.min_score))?,
    })
}

fn scored_table(title: &str, items: &[kgground::topics::ScoredTopic]) -> String {
    let mut s = format!("{title} ({})\n", items.len());
    for t in items {
        s.push_str(&format!("  {:>8.4}  {}\n", t.score, t.title));
    }
    s
}

fn execute(cmd: &Command, rt: &Runtime) -> Result<Output, CliError> {
    match cmd {
        Command::ExpandTopics { seed, anchor, mode, k, min_score } => {
            let policy = policy_from(&rt.cfg, *mode, *k, *min_score)?;
            let client = rt.wiki(vec![seed.clone()])?;
            let links = client.expand_links(seed);
            rt.check_offline()?;
            let links = links?;
            let anchor = anchor.clone().unwrap_or_else(|| seed.clone());
            if links.is_empty() {
                let json = json!({"seed": seed, "anchor": anchor, "policy": policy, "selected": [], "rejected": []});
                return Ok(Output { json, human: format!("{seed} has no article links\n") });
            }
            let (provider, cache) = rt.embedder()?;
            let part = partition_subtopics(&links, &anchor, policy, provider.as_ref(), &cache)?;
            rt.check_offline()?;
            let human =
                format!("{}{}", scored_table("Selected", &part.selected), scored_table("Rejected", &part.rejected));
            let json = json!({"seed": seed, "anchor": anchor, "policy": policy, "selected": part.selected, "rejected": part.rejected});
            Ok(Output { json, human })
        }
        Command::Ingest { topics } => {
            let corpus = rt.corpus(topics)?;
            let path = rt.cfg.paths.cache_dir.join(kgground::wiki::CORPUS_FILE);
            let mut human = format!("{} documents written to {}\n", corpus.len(), path.display());
            for s in &corpus.skipped {
                human.push_str(&format!("skipped {}: {}\n", s.title, s.error));
            }
            let titles: Vec<&String> = corpus.documents.keys().collect();
            let json =
                json!({"documents": corpus.len(), "titles": titles, "skipped": corpus.skipped, "corpus_path": path});
            Ok(Output { json, human })
        }
        Command::Extract { topics, out } => {
            let corpus = rt.corpus(topics)?;
            let (candidates, empty_pages, diagnostics) = rt.extract_all(&corpus)?;
            if let Some(out) = out {
                let mut body = String::new();
                for c in &candidates {
                    body.push_str(&serde_json::to_string(c).expect("candidate serializes"));
                    body.push('\n');
                }
                let path = rt.path(out);
                write_atomic(&path, body.as_bytes()).map_err(|e| CliError::io(path.display(), e))?;
            }
            let human = format!(
                "{} candidates from {} pages ({} unparseable lines, {} pages without triples)\n",
                candidates.len(),
                corpus.len(),
                diagnostics,
                empty_pages.len()
            );
            let json = json!({"candidates": candidates, "pages": corpus.len(), "diagnostics": diagnostics, "pages_without_triples": empty_pages});
            Ok(Output { json, human })
        }
        Command::BuildKg { topics, out } => {
            let corpus = rt.corpus(topics)?;
            let (candidates, empty_pages, diagnostics) = rt.extract_all(&corpus)?;
            let (provider, cache) = rt.embedder()?;
            let (graph, report) =
                dedup_and_assemble(&candidates, provider.as_ref(), &cache, rt.cfg.extract.canonical_threshold)?;
            rt.check_offline()?;
            let out =
                out.as_ref().map(|p| rt.path(p)).unwrap_or_else(|| rt.cfg.paths.output_dir.join("graph.triples.jsonl"));
            let mut bytes = Vec::new();
            serialize_graph(&graph, &mut bytes)?;
            write_atomic(&out, &bytes).map_err(|e| CliError::io(out.display(), e))?;
            let statistical = graph.iter().filter(|t| t.is_statistical()).count();
            let counts = report.counts();
            let mut human = format!(
                "{} triples ({} statistical) from {} candidates over {} pages -> {}\n",
                graph.len(),
                statistical,
                candidates.len(),
                corpus.len(),
                out.display()
            );
            for (reason, n) in &counts {
                human.push_str(&format!("rejected {reason}: {n}\n"));
            }
            for s in &corpus.skipped {
                human.push_str(&format!("skipped topic {}: {}\n", s.title, s.error));
            }
            let json = json!({
                "out": out,
                "triples": graph.len(),
                "statistical": statistical,
                "candidates": candidates.len(),
                "rejections": counts,
                "skipped_topics": corpus.skipped,
                "pages_without_triples": empty_pages,
                "diagnostics": diagnostics,
            });
            Ok(Output { json, human })
        }
        Command::Match { graph, k, context } => {
            let g = rt.graph(graph)?;
            let (provider, cache) = rt.embedder()?;
            let q = ContextQuery::new(context.clone(), k.unwrap_or(rt.cfg.grounding.k))?;
            let hits = match_triples(&q, &g, provider.as_ref(), &cache)?;
            rt.check_offline()?;
            let mut human = String::new();
            for h in &hits {
                human.push_str(&format!(
                    "{:>8.4}  ({}, {}, {})\n",
                    h.score,
                    h.triple.head(),
                    h.triple.relation(),
                    h.triple.tail()
                ));
            }
            Ok(Output { json: json!({"context": context, "k": q.k(), "matches": hits}), human })
        }
        Command::Ground { graph, strategy, k, context, verbalize } => {
            let strategy: Strategy = match strategy {
                Some(s) => s.parse().map_err(|m: String| CliError::config(m))?,
                None => rt.cfg.grounding.strategy,
            };
            let mode = match verbalize.unwrap_or(rt.cfg.grounding.verbalize) {
                VerbalizeKind::Template => VerbalizeMode::Template,
                VerbalizeKind::Llm => VerbalizeMode::Llm,
            };
            let g = rt.graph(graph)?;
            let (provider, cache) = rt.embedder()?;
            let llm = rt.chat()?;
            let q = ContextQuery::new(context.clone(), k.unwrap_or(rt.cfg.grounding.k))?;
            let resp = compose_response(&q, &g, strategy, llm.as_ref(), provider.as_ref(), &cache, mode);
            rt.check_offline()?;
            let resp = resp?;
            let mut human = format!("{}\n\nEvidence ({}):\n", resp.final_text, resp.strategy.as_str());
            for (e, s) in resp.evidence.iter().zip(&resp.scored_triples) {
                human.push_str(&format!("  [{:.4}] {}", s.score, e.text));
                if let Some(u) = &e.citation_url {
                    human.push_str(&format!(" <{u}>"));
                }
                human.push('\n');
            }
            Ok(Output { json: serde_json::to_value(&resp).expect("response serializes"), human })
        }
        Command::Eval { pairs, metrics, out } => {
            let path = rt.path(pairs);
            let f = fs::File::open(&path).map_err(|e| CliError::io(path.display(), e))?;
            let pairs = read_pairs(BufReader::new(f))?;
            let metrics = match metrics {
                Some(list) => Metric::parse_list(list)?,
                None => Metric::ALL.to_vec(),
            };
            let needs_embed =
                metrics.iter().any(|m| matches!(m, Metric::Stcs | Metric::Eacs | Metric::Vecs | Metric::Gms));
            let report = if needs_embed {
                let (provider, cache) = rt.embedder()?;
                evaluate(&pairs, &metrics, Some((provider.as_ref(), &cache)))
            } else {
                evaluate(&pairs, &metrics, None)
            };
            rt.check_offline()?;
            let report = report?;
            let json = serde_json::to_value(&report).expect("report serializes");
            if let Some(out) = out {
                let p = rt.path(out);
                let body = serde_json::to_string_pretty(&json).expect("report serializes") + "\n";
                write_atomic(&p, body.as_bytes()).map_err(|e| CliError::io(p.display(), e))?;
            }
            Ok(Output { json, human: report.to_table() })
        }
        Command::Cache { action } => {
            let (_, cache) = rt.embedder()?;
            match action {
                CacheAction::Stats => {
                    let s = cache.stats();
                    let human = format!(
                        "model {} (dim {}): {} entries, {} bytes, {} corrupt entries dropped\n",
                        s.model_id, s.dim, s.entries, s.data_bytes, s.dropped
                    );
                    Ok(Output { json: serde_json::to_value(&s).expect("stats serialize"), human })
                }
                CacheAction::Purge => {
                    let before = cache.len();
                    cache.purge()?;
                    let human = format!("purged {before} entries for {}\n", cache.model_id());
                    Ok(Output { json: json!({"model_id": cache.model_id(), "purged": before}), human })
                }
            }
        }
    }
}

/// Runs one invocation. Returns the exit code: 0 success, 1 domain error
/// (one JSON line on `err`), 2 usage error.
pub fn run<I, T>(args: I, ctx: &Context, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let result = AppConfig::resolve(cli.global.config.as_deref(), &ctx.cwd, &ctx.env, &cli.global.overrides())
        .and_then(|cfg| {
            let rt = Runtime::new(cfg, ctx, cli.global.offline);
            let output = execute(&cli.command, &rt);
            // A refused request outranks whatever error it caused downstream.
            rt.check_offline()?;
            output
        });
    match result {
        Ok(o) => {
            let _ = if cli.global.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&o.json).expect("output serializes"))
            } else {
                write!(out, "{}", o.human)
            };
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json_line());
            1
        }
    }
}
