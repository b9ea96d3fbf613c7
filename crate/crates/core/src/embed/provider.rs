use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::EmbedError;
use crate::clock::Clock;
use crate::eval::tokenize;
use crate::text::{content_hash, key_form};
use crate::transport::{send_with_retry, HttpRequest, RetryPolicy, SendError, Transport};

/// A text encoder. Implementations must return the same vector for the same
/// text on every call, and batch results must agree with single calls.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

fn seed_for(text: &str) -> u64 {
    let digest = content_hash(&[&key_form(text)]);
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = super::l2_norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Deterministic offline encoder: each normalized text seeds a ChaCha8 PRNG
/// whose uniform draws in `[-1, 1)` form the vector, then L2-normalized.
///
/// Distinct texts get unrelated near-orthogonal vectors; the only structure
/// is identity. Case and whitespace differences map to the same vector.
#[derive(Debug, Clone)]
pub struct MockEmbeddingProvider {
    dim: usize,
    model_id: String,
}

impl MockEmbeddingProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, model_id: format!("mock-hash-{dim}") }
    }

    /// The vector for `text`, without any cache.
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(text));
        unit((0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }
}

impl Default for MockEmbeddingProvider {
    fn default() -> Self {
        Self::new(256)
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "in", "is", "it", "its",
    "of", "on", "or", "our", "that", "the", "their", "this", "to", "was", "were", "with",
];

/// Deterministic offline encoder with lexical structure: signed feature
/// hashing of word tokens, L2-normalized. Texts sharing content words have
/// positive cosine; texts with disjoint vocabularies are (up to bucket
/// collisions) orthogonal. Common function words are skipped so that a
/// shared "of" or "is" does not count as overlap.
#[derive(Debug, Clone)]
pub struct LexicalEmbeddingProvider {
    dim: usize,
    model_id: String,
}

impl LexicalEmbeddingProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, model_id: format!("lexical-hash-{dim}") }
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut tokens: Vec<String> = tokenize(text)
            .into_iter()
            .filter(|t| t.chars().any(char::is_alphanumeric) && !STOPWORDS.contains(&t.as_str()))
            .collect();
        if tokens.is_empty() {
            tokens.push(key_form(text));
        }
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            let h = seed_for(t);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        unit(v)
    }
}

impl Default for LexicalEmbeddingProvider {
    fn default() -> Self {
        Self::new(1024)
    }
}

impl EmbeddingProvider for LexicalEmbeddingProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Remote encoder speaking `POST {base}/embeddings` with `{model, input[]}`
/// and reading `{data: [{embedding: []}]}`.
pub struct HttpEmbeddingProvider {
    base_url: String,
    api_key: Option<String>,
    model: String,
    dim: usize,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbeddingProvider {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        dim: usize,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            dim,
            transport,
            clock,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn endpoint(&self) -> String {
        format!("{}/embeddings", self.base_url.trim_end_matches('/'))
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let mut req = HttpRequest::post_json(self.endpoint(), &body);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let unavailable = |reason: String| EmbedError::ProviderUnavailable { model: self.model.clone(), reason };
        let resp =
            send_with_retry(self.transport.as_ref(), &req, self.retry, self.clock.as_ref()).map_err(|e| match e {
                SendError::Forbidden(t) => unavailable(t.to_string()),
                SendError::Exhausted { .. } => unavailable(e.to_string()),
            })?;
        if !resp.is_success() {
            return Err(unavailable(format!("HTTP {}", resp.status)));
        }
        let parsed: EmbeddingResponse =
            serde_json::from_str(&resp.body).map_err(|e| EmbedError::MalformedResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::MalformedResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.dim {
                    Err(EmbedError::DimensionMismatch { expected: self.dim, got: d.embedding.len() })
                } else {
                    Ok(d.embedding)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::embed::cosine_slices;
    use crate::transport::{Method, OfflineTransport, RecordedTransport, Recording};

    #[test]
    fn mock_is_deterministic_and_unit_length() {
        let p = MockEmbeddingProvider::new(64);
        let a = p.vector("solar");
        assert_eq!(a, p.vector("solar"));
        assert_eq!(a, p.vector("  Solar "));
        assert!((crate::embed::l2_norm(&a) - 1.0).abs() < 1e-12);
        assert_ne!(a, p.vector("wind"));
        let batch = p.embed_batch(&["solar".into(), "wind".into()]).unwrap();
        assert_eq!(batch[0], a);
    }

    #[test]
    fn mock_vector_is_frozen() {
        // Re-derive from the documented construction: seed = first 8 bytes of
        // sha256("solar"), ChaCha8, uniform [-1,1), normalized.
        let seed = u64::from_str_radix(&content_hash(&["solar"])[..16], 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let want: Vec<f64> = raw.iter().map(|x| x / n).collect();
        let got = MockEmbeddingProvider::new(16).vector("solar");
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn lexical_shares_words() {
        let p = LexicalEmbeddingProvider::default();
        let a = p.vector("is bioenergy significant");
        let b = p.vector("Bioenergy has percentile value");
        let c = p.vector("Deforestation volume");
        assert!(cosine_slices(&a, &b).unwrap() > 0.2);
        assert!(cosine_slices(&a, &c).unwrap().abs() < 1e-12);
        assert!(crate::embed::l2_norm(&p.vector("...")) > 0.0);
    }

    fn http(transport: Arc<dyn Transport>) -> HttpEmbeddingProvider {
        HttpEmbeddingProvider::new(
            "http://embed.test/v1",
            "fixture-encoder",
            3,
            transport,
            Arc::new(ManualClock::new(chrono::Utc::now())),
        )
    }

    #[test]
    fn http_provider_parses_data_array() {
        let rec = Recording {
            method: Method::Post,
            url: "http://embed.test/v1/embeddings".into(),
            request_body: Some(serde_json::json!({"model": "fixture-encoder", "input": ["a", "b"]})),
            status: 200,
            response: serde_json::json!({"data": [{"embedding": [1.0, 0.0, 0.0]}, {"embedding": [0.0, 1.0, 0.0]}]}),
        };
        let p = http(Arc::new(RecordedTransport::new(vec![rec])));
        let out = p.embed_batch(&["a".into(), "b".into()]).unwrap();
        assert_eq!(out, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn http_provider_offline_is_unavailable() {
        let p = http(Arc::new(OfflineTransport::new()));
        let err = p.embed_batch(&["a".into()]).unwrap_err();
        assert!(matches!(err, EmbedError::ProviderUnavailable { .. }));
        assert!(err.to_string().contains("offline"));
    }

    #[test]
    fn http_provider_checks_dimension() {
        let rec = Recording {
            method: Method::Post,
            url: "http://embed.test/v1/embeddings".into(),
            request_body: Some(serde_json::json!({"model": "fixture-encoder", "input": ["a"]})),
            status: 200,
            response: serde_json::json!({"data": [{"embedding": [1.0, 0.0]}]}),
        };
        let p = http(Arc::new(RecordedTransport::new(vec![rec])));
        assert!(matches!(p.embed_batch(&["a".into()]), Err(EmbedError::DimensionMismatch { expected: 3, got: 2 })));
    }
}
