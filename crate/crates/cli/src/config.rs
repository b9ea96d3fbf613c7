//! Layered configuration: built-in defaults, then a TOML file, then
//! environment variables, then command-line flags.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kgground::extract::{TemplateId, DEFAULT_CANONICAL_THRESHOLD};
use kgground::grounding::{Strategy, DEFAULT_K};
use kgground::topics::DEFAULT_MIN_SCORE;
use kgground::wiki::{DEFAULT_API_BASE, DEFAULT_MAX_LINKS_PER_PAGE};

use crate::error::CliError;

/// Looked for in the working directory when `--config` is not given.
pub const DEFAULT_CONFIG_FILE: &str = "kgground.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WikiSettings {
    pub api_base: String,
    pub max_links_per_page: usize,
    pub request_interval_ms: u64,
    pub max_workers: usize,
}

impl Default for WikiSettings {
    fn default() -> Self {
        Self {
            api_base: DEFAULT_API_BASE.into(),
            max_links_per_page: DEFAULT_MAX_LINKS_PER_PAGE,
            request_interval_ms: 100,
            max_workers: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EmbedKind {
    Mock,
    Lexical,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSettings {
    pub provider: EmbedKind,
    pub api_base: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub dim: usize,
    pub batch_size: usize,
    pub max_concurrency: usize,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        Self {
            provider: EmbedKind::Mock,
            api_base: None,
            api_key: None,
            model: None,
            dim: 256,
            batch_size: 64,
            max_concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    Http,
    Replay,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub provider: LlmKind,
    pub api_base: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub temperature: f64,
    pub replay_dir: Option<PathBuf>,
    pub template: TemplateId,
    pub max_triples_per_call: usize,
    pub chunk_chars: usize,
    pub max_concurrency: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            provider: LlmKind::Http,
            api_base: None,
            api_key: None,
            model: None,
            temperature: 0.0,
            replay_dir: None,
            template: TemplateId::ChatStyle,
            max_triples_per_call: 50,
            chunk_chars: 6000,
            max_concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VerbalizeKind {
    Template,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundingSettings {
    pub k: usize,
    pub strategy: Strategy,
    pub verbalize: VerbalizeKind,
}

impl Default for GroundingSettings {
    fn default() -> Self {
        Self { k: DEFAULT_K, strategy: Strategy::Rag, verbalize: VerbalizeKind::Template }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    TopK,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub mode: FilterMode,
    pub k: usize,
    pub min_score: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { mode: FilterMode::Threshold, k: 10, min_score: DEFAULT_MIN_SCORE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSettings {
    pub canonical_threshold: f64,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        Self { canonical_threshold: DEFAULT_CANONICAL_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSettings {
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self { cache_dir: PathBuf::from(".kgground/cache"), output_dir: PathBuf::from(".") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub wiki: WikiSettings,
    pub embed: EmbedSettings,
    pub llm: LlmSettings,
    pub grounding: GroundingSettings,
    pub filter: FilterSettings,
    pub extract: ExtractSettings,
    pub paths: PathSettings,
}

/// Command-line values that override every other layer. `None` leaves the
/// lower layers in charge.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub wiki_api_base: Option<String>,
    pub embed_provider: Option<EmbedKind>,
    pub embed_api_base: Option<String>,
    pub embed_model: Option<String>,
    pub llm_provider: Option<LlmKind>,
    pub llm_api_base: Option<String>,
    pub llm_model: Option<String>,
    pub llm_temperature: Option<f64>,
    pub replay_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl AppConfig {
    /// Parses a TOML document. Relative paths inside it are taken relative
    /// to `base_dir`, the directory holding the file.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: AppConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        resolve(base_dir, &mut cfg.paths.cache_dir);
        resolve(base_dir, &mut cfg.paths.output_dir);
        if let Some(d) = cfg.llm.replay_dir.as_mut() {
            resolve(base_dir, d);
        }
        Ok(cfg)
    }

    /// Reads `explicit` if given (it must exist), else the default file in
    /// `cwd` if present, else returns defaults.
    pub fn load_file(explicit: Option<&Path>, cwd: &Path) -> Result<Self, CliError> {
        let path = match explicit {
            Some(p) => {
                let p = if p.is_relative() { cwd.join(p) } else { p.to_path_buf() };
                if !p.exists() {
                    return Err(CliError::config(format!("config file {} does not exist", p.display())));
                }
                p
            }
            None => {
                let p = cwd.join(DEFAULT_CONFIG_FILE);
                if !p.exists() {
                    return Ok(Self::default());
                }
                p
            }
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(cwd))
    }

    pub fn apply_env(&mut self, env: &HashMap<String, String>) -> Result<(), CliError> {
        let get = |k: &str| env.get(k).filter(|v| !v.trim().is_empty()).cloned();
        if let Some(v) = get("WIKI_API_BASE") {
            self.wiki.api_base = v;
        }
        if let Some(v) = get("EMBED_API_BASE") {
            self.embed.api_base = Some(v);
        }
        if let Some(v) = get("EMBED_API_KEY") {
            self.embed.api_key = Some(v);
        }
        if let Some(v) = get("EMBED_MODEL") {
            self.embed.model = Some(v);
        }
        if let Some(v) = get("LLM_API_BASE") {
            self.llm.api_base = Some(v);
        }
        if let Some(v) = get("LLM_API_KEY") {
            self.llm.api_key = Some(v);
        }
        if let Some(v) = get("LLM_MODEL") {
            self.llm.model = Some(v);
        }
        if let Some(v) = get("LLM_TEMPERATURE") {
            self.llm.temperature =
                v.trim().parse().map_err(|_| CliError::config(format!("LLM_TEMPERATURE {v:?} is not a number")))?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, f: &FlagOverrides, cwd: &Path) {
        let abs = |p: &PathBuf| if p.is_relative() { cwd.join(p) } else { p.clone() };
        if let Some(v) = &f.wiki_api_base {
            self.wiki.api_base = v.clone();
        }
        if let Some(v) = f.embed_provider {
            self.embed.provider = v;
        }
        if let Some(v) = &f.embed_api_base {
            self.embed.api_base = Some(v.clone());
        }
        if let Some(v) = &f.embed_model {
            self.embed.model = Some(v.clone());
        }
        if let Some(v) = f.llm_provider {
            self.llm.provider = v;
        }
        if let Some(v) = &f.llm_api_base {
            self.llm.api_base = Some(v.clone());
        }
        if let Some(v) = &f.llm_model {
            self.llm.model = Some(v.clone());
        }
        if let Some(v) = f.llm_temperature {
            self.llm.temperature = v;
        }
        if let Some(v) = &f.replay_dir {
            self.llm.replay_dir = Some(abs(v));
        }
        if let Some(v) = &f.cache_dir {
            self.paths.cache_dir = abs(v);
        }
    }

    /// Full layering: defaults < file < env < flags, then validation.
    pub fn resolve(
        explicit_file: Option<&Path>,
        cwd: &Path,
        env: &HashMap<String, String>,
        flags: &FlagOverrides,
    ) -> Result<Self, CliError> {
        let mut cfg = Self::load_file(explicit_file, cwd)?;
        if cfg.paths.cache_dir.is_relative() {
            cfg.paths.cache_dir = cwd.join(&cfg.paths.cache_dir);
        }
        if cfg.paths.output_dir.is_relative() {
            cfg.paths.output_dir = cwd.join(&cfg.paths.output_dir);
        }
        cfg.apply_env(env)?;
        cfg.apply_flags(flags, cwd);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let absolute = |name: &str, v: &str| match url_host(v) {
            true => Ok(()),
            false => Err(CliError::config(format!("{name} {v:?} must be an absolute URL"))),
        };
        absolute("wiki.api_base", &self.wiki.api_base)?;
        if let Some(b) = &self.embed.api_base {
            absolute("embed.api_base", b)?;
        }
        if let Some(b) = &self.llm.api_base {
            absolute("llm.api_base", b)?;
        }
        if self.wiki.request_interval_ms < 100 {
            return Err(CliError::config("wiki.request_interval_ms must be at least 100"));
        }
        let positive = [
            ("wiki.max_links_per_page", self.wiki.max_links_per_page),
            ("wiki.max_workers", self.wiki.max_workers),
            ("embed.dim", self.embed.dim),
            ("embed.batch_size", self.embed.batch_size),
            ("embed.max_concurrency", self.embed.max_concurrency),
            ("llm.max_triples_per_call", self.llm.max_triples_per_call),
            ("llm.chunk_chars", self.llm.chunk_chars),
            ("llm.max_concurrency", self.llm.max_concurrency),
            ("grounding.k", self.grounding.k),
            ("filter.k", self.filter.k),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(CliError::config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.filter.min_score) {
            return Err(CliError::config("filter.min_score must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.extract.canonical_threshold) {
            return Err(CliError::config("extract.canonical_threshold must lie in [0, 1]"));
        }
        if !self.llm.temperature.is_finite() || self.llm.temperature < 0.0 {
            return Err(CliError::config("llm.temperature must be a non-negative number"));
        }
        Ok(())
    }
}

fn url_host(v: &str) -> bool {
    // Scheme and host, without pulling a URL parser into this crate.
    v.split_once("://").is_some_and(|(scheme, rest)| {
        !scheme.is_empty()
            && scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
            && rest.split(['/', '?', '#']).next().is_some_and(|h| !h.is_empty())
    })
}
