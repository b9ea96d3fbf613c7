//! Embedding providers, the persistent embedding cache, and similarity primitives.
//!
//! Every vector handed out by [`embed_text`] is L2-normalized, so a plain
//! [`dot`] product equals [`cosine`].

mod cache;
mod provider;
mod similarity;

use std::thread;

use thiserror::Error;

pub use cache::{model_slug, CacheManifest, CacheStats, EmbeddingCache};
pub use provider::{EmbeddingProvider, HttpEmbeddingProvider, LexicalEmbeddingProvider, MockEmbeddingProvider};
pub use similarity::{cosine, cosine_slices, dot, greedy_alignment_f1, l2_norm};

/// Text keys paired with their fresh vectors.
type Keyed = Vec<(String, Vec<f64>)>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider {model} unavailable: {reason}")]
    ProviderUnavailable { model: String, reason: String },
    #[error("embedding cache holds {found}, provider is {expected}")]
    CacheModelMismatch { expected: String, found: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding has non-finite components")]
    NonFinite,
    #[error("similarity is undefined for an all-zero vector")]
    ZeroVector,
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("embedding cache I/O: {0}")]
    Io(String),
}

/// A finite, fixed-length vector tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    model_id: String,
}

impl Embedding {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::DimensionMismatch { expected: 1, got: 0 });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { values, model_id: model_id.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// Same direction, every component multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self, EmbedError> {
        Self::new(self.values.iter().map(|x| x * alpha).collect(), self.model_id.clone())
    }
}

/// Batching and parallelism for provider calls on cache misses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub max_concurrency: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self { batch_size: 64, max_concurrency: 4 }
    }
}

fn check_pairing(provider: &dyn EmbeddingProvider, cache: &EmbeddingCache) -> Result<(), EmbedError> {
    if provider.model_id() != cache.model_id() || provider.dim() != cache.dim() {
        return Err(EmbedError::CacheModelMismatch {
            expected: format!("{} (dim {})", provider.model_id(), provider.dim()),
            found: format!("{} (dim {})", cache.model_id(), cache.dim()),
        });
    }
    Ok(())
}

fn normalized(model: &str, v: Vec<f64>, dim: usize) -> Result<Vec<f64>, EmbedError> {
    if v.len() != dim {
        return Err(EmbedError::DimensionMismatch { expected: dim, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    let n = l2_norm(&v);
    if n == 0.0 {
        log::warn!("provider {model} returned an all-zero vector");
        return Err(EmbedError::ZeroVector);
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// Embeds one text, serving from `cache` when possible.
pub fn embed_text(
    provider: &dyn EmbeddingProvider,
    text: &str,
    cache: &EmbeddingCache,
) -> Result<Embedding, EmbedError> {
    let mut v = embed_texts(provider, &[text], cache, EmbedOptions::default())?;
    Ok(v.pop().expect("one embedding per text"))
}

/// Embeds many texts. Cache misses are deduplicated, batched, and sent to
/// the provider with at most `options.max_concurrency` calls in flight.
pub fn embed_texts<S: AsRef<str>>(
    provider: &dyn EmbeddingProvider,
    texts: &[S],
    cache: &EmbeddingCache,
    options: EmbedOptions,
) -> Result<Vec<Embedding>, EmbedError> {
    check_pairing(provider, cache)?;
    let model = provider.model_id().to_owned();
    let mut keys = Vec::with_capacity(texts.len());
    let mut found: Vec<Option<Vec<f64>>> = Vec::with_capacity(texts.len());
    let mut misses: Vec<(String, String)> = Vec::new();
    for t in texts {
        let t = t.as_ref();
        if t.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let key = EmbeddingCache::key(&model, t);
        let hit = cache.get(&key);
        if hit.is_none() && !misses.iter().any(|(k, _)| *k == key) {
            misses.push((key.clone(), t.to_owned()));
        }
        found.push(hit);
        keys.push(key);
    }

    if !misses.is_empty() {
        let batches: Vec<&[(String, String)]> = misses.chunks(options.batch_size.max(1)).collect();
        let mut fresh = Vec::with_capacity(misses.len());
        for wave in batches.chunks(options.max_concurrency.max(1)) {
            let results: Vec<Result<Keyed, EmbedError>> = thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| {
                        s.spawn(|| {
                            let inputs: Vec<String> = batch.iter().map(|(_, t)| t.clone()).collect();
                            let out = provider.embed_batch(&inputs)?;
                            if out.len() != inputs.len() {
                                return Err(EmbedError::MalformedResponse(format!(
                                    "expected {} vectors, got {}",
                                    inputs.len(),
                                    out.len()
                                )));
                            }
                            batch
                                .iter()
                                .zip(out)
                                .map(|((k, _), v)| Ok((k.clone(), normalized(&model, v, provider.dim())?)))
                                .collect()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("embedding worker panicked")).collect()
            });
            for r in results {
                fresh.extend(r?);
            }
        }
        cache.put_many(fresh)?;
    }

    keys.iter()
        .zip(found)
        .map(|(k, hit)| {
            let v = hit.unwrap_or_else(|| cache.get(k).expect("cached after fill"));
            Embedding::new(v, model.clone())
        })
        .collect()
}

/// Greedy-max token alignment F1 between two token lists, each token
/// embedded on its own.
pub fn token_embedding_f1<S: AsRef<str>>(
    reference_tokens: &[S],
    candidate_tokens: &[S],
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
) -> Result<f64, EmbedError> {
    if reference_tokens.is_empty() || candidate_tokens.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let r = embed_texts(provider, reference_tokens, cache, EmbedOptions::default())?;
    let c = embed_texts(provider, candidate_tokens, cache, EmbedOptions::default())?;
    greedy_alignment_f1(&r, &c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: MockEmbeddingProvider,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for Counting {
        fn model_id(&self) -> &str {
            self.inner.model_id()
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    fn counting() -> (Counting, EmbeddingCache) {
        let inner = MockEmbeddingProvider::new(32);
        let cache = EmbeddingCache::in_memory(inner.model_id(), 32);
        (Counting { inner, calls: AtomicUsize::new(0) }, cache)
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let (p, cache) = counting();
        let a = embed_text(&p, "solar", &cache).unwrap();
        let b = embed_text(&p, "solar", &cache).unwrap();
        assert_eq!(a, b);
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn mock_vector_passes_through_unchanged() {
        let (p, cache) = counting();
        let e = embed_text(&p, "solar", &cache).unwrap();
        let want = p.inner.vector("solar");
        for (a, b) in e.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(e.dim(), 32);
    }

    #[test]
    fn empty_text_rejected() {
        let (p, cache) = counting();
        assert_eq!(embed_text(&p, "  ", &cache), Err(EmbedError::EmptyText));
    }

    #[test]
    fn cache_for_other_model_is_rejected() {
        let p = MockEmbeddingProvider::new(32);
        let cache = EmbeddingCache::in_memory("other", 32);
        assert!(matches!(embed_text(&p, "x", &cache), Err(EmbedError::CacheModelMismatch { .. })));
        let cache = EmbeddingCache::in_memory(p.model_id(), 8);
        assert!(matches!(embed_text(&p, "x", &cache), Err(EmbedError::CacheModelMismatch { .. })));
    }

    #[test]
    fn batches_agree_with_single_calls_and_dedupe() {
        let (p, cache) = counting();
        let texts = ["a", "b", "a", "c", "d", "e"];
        let opts = EmbedOptions { batch_size: 2, max_concurrency: 2 };
        let batch = embed_texts(&p, &texts, &cache, opts).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        let fresh = EmbeddingCache::in_memory(p.model_id(), 32);
        for (t, e) in texts.iter().zip(&batch) {
            assert_eq!(&embed_text(&p.inner, t, &fresh).unwrap(), e);
        }
    }

    #[test]
    fn warm_disk_cache_gives_same_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let p = MockEmbeddingProvider::new(16);
        let cold = {
            let c = EmbeddingCache::open(dir.path(), p.model_id(), 16).unwrap();
            embed_text(&p, "hydropower", &c).unwrap()
        };
        let counting = Counting { inner: MockEmbeddingProvider::new(16), calls: AtomicUsize::new(0) };
        let c = EmbeddingCache::open(dir.path(), p.model_id(), 16).unwrap();
        assert_eq!(embed_text(&counting, "hydropower", &c).unwrap(), cold);
        assert_eq!(counting.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn f1_identity_and_orthogonality() {
        let p = MockEmbeddingProvider::new(64);
        let cache = EmbeddingCache::in_memory(p.model_id(), 64);
        let toks = ["solar", "panels", "save"];
        assert!((token_embedding_f1(&toks, &toks, &p, &cache).unwrap() - 1.0).abs() < 1e-12);

        struct Axis;
        impl EmbeddingProvider for Axis {
            fn model_id(&self) -> &str {
                "axis"
            }
            fn dim(&self) -> usize {
                2
            }
            fn embed_batch(&self, t: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
                Ok(t.iter().map(|s| if s == "x" { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect())
            }
        }
        let cache = EmbeddingCache::in_memory("axis", 2);
        assert_eq!(token_embedding_f1(&["x"], &["y"], &Axis, &cache).unwrap(), 0.0);
    }

    #[test]
    fn f1_three_vs_two_matches_matrix_oracle() {
        let p = MockEmbeddingProvider::new(8);
        let cache = EmbeddingCache::in_memory(p.model_id(), 8);
        let reference = ["emission", "of", "carbon"];
        let candidate = ["emissions", "of"];
        // Oracle: full similarity matrix straight from the mock vectors.
        let rv: Vec<Vec<f64>> = reference.iter().map(|t| p.vector(t)).collect();
        let cv: Vec<Vec<f64>> = candidate.iter().map(|t| p.vector(t)).collect();
        let sim = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            (d / (na * nb)).clamp(0.0, 1.0)
        };
        let mut m = [[0.0; 3]; 2];
        for i in 0..2 {
            for j in 0..3 {
                m[i][j] = sim(&cv[i], &rv[j]);
            }
        }
        let p_ = (m[0].iter().cloned().fold(0.0, f64::max) + m[1].iter().cloned().fold(0.0, f64::max)) / 2.0;
        let r_ = (0..3).map(|j| m[0][j].max(m[1][j])).sum::<f64>() / 3.0;
        let want = 2.0 * p_ * r_ / (p_ + r_);
        let got = token_embedding_f1(&reference, &candidate, &p, &cache).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!(got < 1.0 && got > 0.0);
    }
}
