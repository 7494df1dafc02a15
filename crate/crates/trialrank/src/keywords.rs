//! Reduction of a verbose query Qd to a keyword query Qk: embed the query
//! and its unigram/bigram candidates, then select with maximal marginal
//! relevance until the token budget is met.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::textproc::{remove_stopwords, tokenize, Stoplist};

#[derive(Debug, thiserror::Error)]
pub enum KeywordError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine similarity undefined for an all-zero vector")]
    ZeroVector,
    #[error("no candidate keywords survive stopword filtering")]
    EmptyQuery,
    #[error("embedding cache io error: {0}")]
    CacheIo(#[from] io::Error),
}

/// Fixed-length real vector from an embedding provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// dot(a,b) / (|a|*|b|), in [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, KeywordError> {
    if a.dim() != b.dim() {
        return Err(KeywordError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Err(KeywordError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot / (a.l2_norm() * b.l2_norm()))
}

/// Text-to-vector source. Implementations must return a consistent
/// dimension across calls and a non-zero vector for non-empty text.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, KeywordError>;
}

impl EmbeddingProvider for Box<dyn EmbeddingProvider> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, KeywordError> {
        (**self).embed(text)
    }
}

/// FNV-1a 64-bit offset basis; the documented hash seed of the test
/// provider.
pub const HASHED_BOW_SEED: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(token: &str) -> u64 {
    let mut h = HASHED_BOW_SEED;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic offline provider: tokens are FNV-1a hashed into a
/// fixed-dimension bag-of-words vector, L2-normalized. Text with no tokens
/// hashes as a single unit so non-empty text never embeds to zero.
#[derive(Debug, Clone)]
pub struct HashedBowProvider {
    dim: usize,
}

impl HashedBowProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedBowProvider {
    fn default() -> Self {
        Self::new(256)
    }
}

impl EmbeddingProvider for HashedBowProvider {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, KeywordError> {
        let mut values = vec![0.0; self.dim];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            if text.is_empty() {
                return Ok(EmbeddingVector::new(values));
            }
            values[(fnv1a(text) % self.dim as u64) as usize] = 1.0;
            return Ok(EmbeddingVector::new(values));
        }
        for token in &tokens {
            values[(fnv1a(token) % self.dim as u64) as usize] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut values {
            *v /= norm;
        }
        Ok(EmbeddingVector::new(values))
    }
}

/// Remote provider speaking the embedding protocol: POST {"text": ...} to
/// the endpoint, expecting {"vector": [...]}. The first response locks the
/// dimension; later mismatches are rejected.
pub struct HttpEmbeddingProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
    locked_dim: Mutex<Option<usize>>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, KeywordError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| KeywordError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            client,
            locked_dim: Mutex::new(None),
        })
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, KeywordError> {
        let response: EmbedResponse = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { text })
            .send()
            .and_then(reqwest::blocking::Response::error_for_status)
            .map_err(|e| KeywordError::ProviderUnavailable(e.to_string()))?
            .json()
            .map_err(|e| KeywordError::ProviderUnavailable(e.to_string()))?;
        let vector = EmbeddingVector::new(response.vector);
        let mut locked = self.locked_dim.lock().expect("dim lock");
        match *locked {
            Some(expected) if expected != vector.dim() => {
                return Err(KeywordError::DimensionMismatch {
                    expected,
                    got: vector.dim(),
                })
            }
            None => *locked = Some(vector.dim()),
            _ => {}
        }
        Ok(vector)
    }
}

/// Provider that always fails; wrap it in a cache for cache-only operation.
pub struct UnavailableProvider;

impl EmbeddingProvider for UnavailableProvider {
    fn embed(&self, _: &str) -> Result<EmbeddingVector, KeywordError> {
        Err(KeywordError::ProviderUnavailable(
            "no provider configured".into(),
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    text: String,
    dim: usize,
    values: Vec<f64>,
}

/// Write-through embedding cache keyed by exact text. Hits bypass the inner
/// provider entirely; misses are appended to the cache file as
/// line-delimited (text, dim, values) records.
pub struct CachedProvider<P> {
    inner: P,
    entries: Mutex<HashMap<String, EmbeddingVector>>,
    writer: Option<Mutex<BufWriter<File>>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    /// In-memory cache without persistence.
    pub fn in_memory(inner: P) -> Self {
        Self {
            inner,
            entries: Mutex::new(HashMap::new()),
            writer: None,
        }
    }

    /// Opens (or creates) a cache file and replays its records.
    pub fn with_file(inner: P, path: &Path) -> Result<Self, KeywordError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) if rec.values.len() == rec.dim => {
                        entries.insert(rec.text, EmbeddingVector::new(rec.values));
                    }
                    _ => warn!(
                        "ignoring corrupt cache record at {}:{}",
                        path.display(),
                        lineno + 1
                    ),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            entries: Mutex::new(entries),
            writer: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, KeywordError> {
        if let Some(hit) = self.entries.lock().expect("cache lock").get(text) {
            return Ok(hit.clone());
        }
        let vector = self.inner.embed(text)?;
        if let Some(writer) = &self.writer {
            let record = CacheRecord {
                text: text.to_string(),
                dim: vector.dim(),
                values: vector.values.clone(),
            };
            let mut w = writer.lock().expect("cache writer lock");
            let line = serde_json::to_string(&record)
                .map_err(|e| KeywordError::ProviderUnavailable(e.to_string()))?;
            writeln!(w, "{line}")?;
            w.flush()?;
        }
        self.entries
            .lock()
            .expect("cache lock")
            .insert(text.to_string(), vector.clone());
        Ok(vector)
    }
}

/// A unigram or adjacent-pair bigram drawn from the stopword-filtered query.
#[derive(Debug, Clone)]
pub struct CandidatePhrase {
    pub surface: String,
    pub token_count: u32,
    pub vector: EmbeddingVector,
}

/// What one selected phrase consumes from the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetUnit {
    /// Phrases consume their token_count (the "half the size in tokens"
    /// reading).
    #[default]
    Tokens,
    /// Every phrase consumes 1 (the "half the size in phrases" reading).
    Phrases,
}

/// Target length for the reduced query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthPolicy {
    /// ceil(stopword-filtered query length / 2).
    #[default]
    DynamicHalf,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordConfig {
    /// Relevance/diversity trade-off in `[0,1]`; 1 is pure relevance.
    pub lambda: f64,
    /// Replace raw cosines with 0.5 + z-score before selection.
    pub standardize: bool,
    pub length_policy: LengthPolicy,
    pub budget_unit: BudgetUnit,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            standardize: false,
            length_policy: LengthPolicy::DynamicHalf,
            budget_unit: BudgetUnit::Tokens,
        }
    }
}

/// All distinct unigrams plus all distinct bigrams of adjacent tokens after
/// stopword removal, each embedded. Text is lowercased but unstemmed:
/// embeddings need surface forms.
pub fn generate_candidates(
    qd_text: &str,
    stoplist: &Stoplist,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<CandidatePhrase>, KeywordError> {
    let tokens = remove_stopwords(tokenize(qd_text), stoplist);
    if tokens.is_empty() {
        return Err(KeywordError::EmptyQuery);
    }
    let mut seen = HashSet::new();
    let mut surfaces: Vec<(String, u32)> = Vec::new();
    for token in &tokens {
        if seen.insert(token.clone()) {
            surfaces.push((token.clone(), 1));
        }
    }
    for pair in tokens.windows(2) {
        let bigram = format!("{} {}", pair[0], pair[1]);
        if seen.insert(bigram.clone()) {
            surfaces.push((bigram, 2));
        }
    }
    surfaces
        .into_iter()
        .map(|(surface, token_count)| {
            let vector = provider.embed(&surface)?;
            Ok(CandidatePhrase {
                surface,
                token_count,
                vector,
            })
        })
        .collect()
}

fn standardized(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| 0.5 + (v - mean) / sd).collect()
}

/// Iterative MMR selection. The first pick is the candidate most similar to
/// the query (the redundancy penalty over an empty selection is 0); each
/// later pick maximizes lambda*cos(c, query) - (1-lambda)*max_s cos(c, s).
/// Selection stops once the consumed budget reaches `budget` or candidates
/// run out. Argmax ties break on the lexicographically smallest surface.
pub fn mmr_select(
    query_vec: &EmbeddingVector,
    candidates: &[CandidatePhrase],
    budget: usize,
    config: &KeywordConfig,
) -> Result<Vec<String>, KeywordError> {
    if candidates.is_empty() {
        return Err(KeywordError::EmptyQuery);
    }
    let n = candidates.len();
    let mut query_sims = Vec::with_capacity(n);
    for c in candidates {
        query_sims.push(cosine_similarity(&c.vector, query_vec)?);
    }
    let mut pair_sims = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine_similarity(&candidates[i].vector, &candidates[j].vector)?;
            pair_sims[i * n + j] = s;
            pair_sims[j * n + i] = s;
        }
    }
    if config.standardize {
        query_sims = standardized(&query_sims);
        let mut off_diagonal = Vec::with_capacity(n * n - n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off_diagonal.push(pair_sims[i * n + j]);
                }
            }
        }
        let transformed = standardized(&off_diagonal);
        let mut it = transformed.into_iter();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pair_sims[i * n + j] = it.next().expect("same length");
                }
            }
        }
    }

    let lambda = config.lambda;
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut max_sim_to_selected = vec![0.0f64; n];
    let mut consumed = 0usize;

    while consumed < budget && !remaining.is_empty() {
        let mut best_pos = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (pos, &i) in remaining.iter().enumerate() {
            let score = if selected.is_empty() {
                query_sims[i]
            } else {
                lambda * query_sims[i] - (1.0 - lambda) * max_sim_to_selected[i]
            };
            let better = score > best_score
                || (score == best_score
                    && candidates[i].surface < candidates[remaining[best_pos]].surface);
            if better {
                best_score = score;
                best_pos = pos;
            }
        }
        let chosen = remaining.swap_remove(best_pos);
        consumed += match config.budget_unit {
            BudgetUnit::Tokens => candidates[chosen].token_count as usize,
            BudgetUnit::Phrases => 1,
        };
        for &i in &remaining {
            let s = pair_sims[i * n + chosen];
            if s > max_sim_to_selected[i] {
                max_sim_to_selected[i] = s;
            }
        }
        selected.push(chosen);
    }

    Ok(selected
        .into_iter()
        .map(|i| candidates[i].surface.clone())
        .collect())
}

/// The token budget implied by the length policy for a given query.
pub fn token_budget(qd_text: &str, stoplist: &Stoplist, policy: LengthPolicy) -> usize {
    match policy {
        LengthPolicy::DynamicHalf => {
            let filtered_len = remove_stopwords(tokenize(qd_text), stoplist).len();
            filtered_len.div_ceil(2)
        }
        LengthPolicy::Fixed(n) => n,
    }
}

/// Full Qd -> Qk reduction: candidates, MMR selection against the embedded
/// verbose query, then flattening of the selected phrases into tokens,
/// de-duplicated preserving first occurrence.
pub fn extract_keywords(
    qd_text: &str,
    stoplist: &Stoplist,
    provider: &dyn EmbeddingProvider,
    config: &KeywordConfig,
) -> Result<Vec<String>, KeywordError> {
    let budget = token_budget(qd_text, stoplist, config.length_policy);
    let candidates = generate_candidates(qd_text, stoplist, provider)?;
    let query_vec = provider.embed(qd_text)?;
    let phrases = mmr_select(&query_vec, &candidates, budget, config)?;
    let mut seen = HashSet::new();
    let mut terms = Vec::new();
    for phrase in phrases {
        for token in phrase.split(' ') {
            if seen.insert(token.to_string()) {
                terms.push(token.to_string());
            }
        }
    }
    Ok(terms)
}

/// One line of the per-query keyword dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRecord {
    pub query_id: String,
    pub terms: Vec<String>,
}

pub fn write_keyword_dump(records: &[KeywordRecord], path: &Path) -> Result<(), KeywordError> {
    let mut w = BufWriter::new(File::create(path)?);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| KeywordError::ProviderUnavailable(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_keyword_dump(path: &Path) -> Result<Vec<KeywordRecord>, KeywordError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| KeywordError::ProviderUnavailable(e.to_string()))?,
        );
    }
    Ok(records)
}

/// Builds a provider from a CLI-level specification.
pub enum ProviderSpec {
    /// Deterministic hashed bag-of-words (dim 256) for offline use.
    Hashed,
    /// Remote HTTP endpoint.
    Http { endpoint: String, timeout: Duration },
    /// Serve embeddings from a cache file only.
    CacheOnly,
}

pub fn build_provider(
    spec: ProviderSpec,
    cache_path: Option<&PathBuf>,
) -> Result<Box<dyn EmbeddingProvider>, KeywordError> {
    let inner: Box<dyn EmbeddingProvider> = match spec {
        ProviderSpec::Hashed => Box::new(HashedBowProvider::default()),
        ProviderSpec::Http { endpoint, timeout } => {
            Box::new(HttpEmbeddingProvider::new(endpoint, timeout)?)
        }
        ProviderSpec::CacheOnly => Box::new(UnavailableProvider),
    };
    Ok(match cache_path {
        Some(path) => Box::new(CachedProvider::with_file(inner, path)?),
        None => inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(values: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::new(values)
    }

    #[test]
    fn cosine_identity_orthogonal_and_hand_value() {
        let a = unit(vec![1.0, 2.0, 2.0]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let e1 = unit(vec![1.0, 0.0]);
        let e2 = unit(vec![0.0, 1.0]);
        assert_eq!(cosine_similarity(&e1, &e2).unwrap(), 0.0);
        let b = unit(vec![2.0, 1.0, 2.0]);
        assert!((cosine_similarity(&a, &b).unwrap() - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_error_cases() {
        let a = unit(vec![1.0, 0.0]);
        let zero = unit(vec![0.0, 0.0]);
        let short = unit(vec![1.0]);
        assert!(matches!(
            cosine_similarity(&a, &zero),
            Err(KeywordError::ZeroVector)
        ));
        assert!(matches!(
            cosine_similarity(&a, &short),
            Err(KeywordError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hashed_provider_is_deterministic_and_nonzero() {
        let p = HashedBowProvider::default();
        let v1 = p.embed("chest pain").unwrap();
        let v2 = p.embed("chest pain").unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1.dim(), 256);
        assert!(!v1.is_zero());
        assert!(!p.embed("!!!").unwrap().is_zero());
    }

    #[test]
    fn cache_hit_bypasses_provider() {
        struct Counting(Mutex<usize>);
        impl EmbeddingProvider for Counting {
            fn embed(&self, text: &str) -> Result<EmbeddingVector, KeywordError> {
                *self.0.lock().unwrap() += 1;
                HashedBowProvider::default().embed(text)
            }
        }
        let cached = CachedProvider::in_memory(Counting(Mutex::new(0)));
        let a = cached.embed("fever").unwrap();
        let b = cached.embed("fever").unwrap();
        assert_eq!(a, b);
        assert_eq!(*cached.inner.0.lock().unwrap(), 1);
    }

    #[test]
    fn cache_file_round_trip_and_cache_only_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cached =
                CachedProvider::with_file(HashedBowProvider::default(), &path).unwrap();
            cached.embed("fever").unwrap();
        }
        let cache_only = CachedProvider::with_file(UnavailableProvider, &path).unwrap();
        assert_eq!(cache_only.len(), 1);
        assert!(cache_only.embed("fever").is_ok());
        assert!(matches!(
            cache_only.embed("chills"),
            Err(KeywordError::ProviderUnavailable(_))
        ));
    }

    /// One-shot HTTP server answering each connection with a fixed JSON
    /// body, for exercising the remote provider protocol.
    fn serve_embeddings(bodies: Vec<String>) -> String {
        use std::io::Read;
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}/embed", listener.local_addr().unwrap());
        std::thread::spawn(move || {
            for body in bodies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        endpoint
    }

    #[test]
    fn http_provider_speaks_the_embedding_protocol() {
        let endpoint = serve_embeddings(vec![
            r#"{"vector":[1.0,2.0,3.0]}"#.to_string(),
            r#"{"vector":[4.0,5.0]}"#.to_string(),
        ]);
        let provider =
            HttpEmbeddingProvider::new(endpoint, Duration::from_secs(5)).unwrap();
        let v = provider.embed("chest pain").unwrap();
        assert_eq!(v.values, vec![1.0, 2.0, 3.0]);
        // second response has a different dimension: rejected
        assert!(matches!(
            provider.embed("other text"),
            Err(KeywordError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn http_provider_down_is_unavailable() {
        let provider = HttpEmbeddingProvider::new(
            "http://127.0.0.1:9/embed",
            Duration::from_millis(200),
        )
        .unwrap();
        assert!(matches!(
            provider.embed("x"),
            Err(KeywordError::ProviderUnavailable(_))
        ));
    }

    #[test]
    fn candidates_unigrams_and_adjacent_bigrams() {
        let stop = Stoplist::default_english();
        let p = HashedBowProvider::default();
        let cands = generate_candidates("the patient has diabetes", &stop, &p).unwrap();
        let surfaces: Vec<&str> = cands.iter().map(|c| c.surface.as_str()).collect();
        assert_eq!(surfaces, ["patient", "diabetes", "patient diabetes"]);
        assert_eq!(cands[2].token_count, 2);
    }

    #[test]
    fn candidates_single_token_and_empty() {
        let stop = Stoplist::default_english();
        let p = HashedBowProvider::default();
        let cands = generate_candidates("fever", &stop, &p).unwrap();
        assert_eq!(cands.len(), 1);
        assert!(matches!(
            generate_candidates("the of and", &stop, &p),
            Err(KeywordError::EmptyQuery)
        ));
    }

    #[test]
    fn candidates_deduplicate() {
        let stop = Stoplist::default_english();
        let p = HashedBowProvider::default();
        let cands = generate_candidates("pain pain pain", &stop, &p).unwrap();
        let surfaces: Vec<&str> = cands.iter().map(|c| c.surface.as_str()).collect();
        assert_eq!(surfaces, ["pain", "pain pain"]);
    }

    fn phrase(surface: &str, values: Vec<f64>) -> CandidatePhrase {
        CandidatePhrase {
            surface: surface.into(),
            token_count: surface.split(' ').count() as u32,
            vector: unit(values),
        }
    }

    #[test]
    fn mmr_lambda_one_is_similarity_order() {
        let q = unit(vec![1.0, 0.0, 0.0]);
        let cands = vec![
            phrase("low", vec![0.2, 1.0, 0.0]),
            phrase("high", vec![1.0, 0.1, 0.0]),
            phrase("mid", vec![0.7, 0.7, 0.0]),
        ];
        let config = KeywordConfig {
            lambda: 1.0,
            ..KeywordConfig::default()
        };
        let picked = mmr_select(&q, &cands, 3, &config).unwrap();
        assert_eq!(picked, ["high", "mid", "low"]);
    }

    #[test]
    fn mmr_first_pick_is_argmax_for_any_lambda() {
        let q = unit(vec![1.0, 0.0]);
        let cands = vec![
            phrase("b", vec![0.9, 0.1]),
            phrase("a", vec![0.1, 0.9]),
        ];
        for lambda in [0.0, 0.25, 0.5, 1.0] {
            let config = KeywordConfig {
                lambda,
                ..KeywordConfig::default()
            };
            let picked = mmr_select(&q, &cands, 1, &config).unwrap();
            assert_eq!(picked[0], "b", "lambda {lambda}");
        }
    }

    #[test]
    fn mmr_diversity_skips_redundant_candidate() {
        // Constructed so cos-to-query = (0.9, 0.85, 0.3), cos(c1,c2) = 0.95,
        // and c3 orthogonal to both; lambda 0.5 and budget 2 select {1, 3}.
        let q = unit(vec![1.0, 0.0, 0.0, 0.0]);
        let s1 = (1.0f64 - 0.81).sqrt();
        let c1 = vec![0.9, s1, 0.0, 0.0];
        let y = (0.95 - 0.9 * 0.85) / s1;
        let z = (1.0f64 - 0.85 * 0.85 - y * y).sqrt();
        let c2 = vec![0.85, y, z, 0.0];
        let e = -(0.3 * 0.9) / s1;
        let f = -(0.3 * 0.85 + e * y) / z;
        let g = (1.0f64 - 0.09 - e * e - f * f).sqrt();
        let c3 = vec![0.3, e, f, g];

        let cands = vec![
            phrase("one", c1.clone()),
            phrase("two", c2.clone()),
            phrase("three", c3.clone()),
        ];
        let q1 = cosine_similarity(&unit(c1.clone()), &q).unwrap();
        let q2 = cosine_similarity(&unit(c2.clone()), &q).unwrap();
        let q3 = cosine_similarity(&unit(c3.clone()), &q).unwrap();
        assert!((q1 - 0.9).abs() < 1e-9 && (q2 - 0.85).abs() < 1e-9 && (q3 - 0.3).abs() < 1e-9);
        let mutual = cosine_similarity(&unit(c1), &unit(c2)).unwrap();
        assert!((mutual - 0.95).abs() < 1e-9);

        let config = KeywordConfig {
            lambda: 0.5,
            ..KeywordConfig::default()
        };
        let picked = mmr_select(&q, &cands, 2, &config).unwrap();
        assert_eq!(picked, ["one", "three"]);
    }

    #[test]
    fn mmr_tie_breaks_lexicographically() {
        let q = unit(vec![1.0, 0.0]);
        // identical vectors -> identical similarity
        let cands = vec![
            phrase("zeta", vec![0.5, 0.5]),
            phrase("alpha", vec![0.5, 0.5]),
        ];
        let picked = mmr_select(&q, &cands, 1, &KeywordConfig::default()).unwrap();
        assert_eq!(picked[0], "alpha");
    }

    #[test]
    fn budget_counts_tokens_with_minimal_overshoot() {
        let q = unit(vec![1.0, 0.0]);
        let cands = vec![
            phrase("aa bb", vec![0.9, 0.1]),
            phrase("cc", vec![0.8, 0.2]),
            phrase("dd", vec![0.7, 0.3]),
        ];
        let picked = mmr_select(&q, &cands, 3, &KeywordConfig::default()).unwrap();
        // bigram (2) + unigram (1) reaches the budget of 3 exactly
        assert_eq!(picked.len(), 2);
    }

    #[test]
    fn token_budget_dynamic_half() {
        let stop = Stoplist::default_english();
        // 5 content tokens -> ceil(5/2) = 3
        let text = "severe chest pain aspirin therapy";
        assert_eq!(token_budget(text, &stop, LengthPolicy::DynamicHalf), 3);
        assert_eq!(token_budget(text, &stop, LengthPolicy::Fixed(7)), 7);
    }

    #[test]
    fn extract_keywords_flattens_and_dedupes() {
        let stop = Stoplist::default_english();
        let p = HashedBowProvider::default();
        let terms = extract_keywords(
            "patient with severe chest pain and chest tightness",
            &stop,
            &p,
            &KeywordConfig::default(),
        )
        .unwrap();
        let set: HashSet<&String> = terms.iter().collect();
        assert_eq!(set.len(), terms.len(), "terms must be de-duplicated");
        assert!(!terms.is_empty());
        for t in &terms {
            assert!(!t.contains(' '));
        }
    }

    #[test]
    fn extract_keywords_deterministic() {
        let stop = Stoplist::default_english();
        let p = HashedBowProvider::default();
        let text = "a 58 year old man with acute myocardial infarction and chest pain";
        let a = extract_keywords(text, &stop, &p, &KeywordConfig::default()).unwrap();
        let b = extract_keywords(text, &stop, &p, &KeywordConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardize_flag_keeps_lambda_one_order() {
        let stop = Stoplist::default_english();
        let p = HashedBowProvider::default();
        let text = "chronic kidney disease with reduced filtration and anemia";
        let plain = KeywordConfig {
            lambda: 1.0,
            ..KeywordConfig::default()
        };
        let std = KeywordConfig {
            lambda: 1.0,
            standardize: true,
            ..KeywordConfig::default()
        };
        // standardization is monotone, so pure-relevance selection agrees
        assert_eq!(
            extract_keywords(text, &stop, &p, &plain).unwrap(),
            extract_keywords(text, &stop, &p, &std).unwrap()
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn candidates_strategy(
            max_tokens: u32,
        ) -> impl Strategy<Value = Vec<CandidatePhrase>> {
            prop::collection::vec(
                (prop::collection::vec(0.01..1.0f64, 6), 1..=max_tokens),
                1..12,
            )
            .prop_map(|raw| {
                raw.into_iter()
                    .enumerate()
                    .map(|(i, (values, token_count))| CandidatePhrase {
                        surface: if token_count == 1 {
                            format!("c{i:02}")
                        } else {
                            format!("c{i:02}a c{i:02}b")
                        },
                        token_count,
                        vector: EmbeddingVector::new(values),
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn lambda_one_equals_similarity_sort(
                cands in candidates_strategy(1),
                qvec in prop::collection::vec(0.01..1.0f64, 6),
                budget in 1usize..12,
            ) {
                let q = EmbeddingVector::new(qvec);
                let config = KeywordConfig { lambda: 1.0, ..KeywordConfig::default() };
                let picked = mmr_select(&q, &cands, budget, &config).unwrap();

                // oracle: plain top-budget similarity sort
                let mut by_sim: Vec<(&CandidatePhrase, f64)> = cands
                    .iter()
                    .map(|c| (c, cosine_similarity(&c.vector, &q).unwrap()))
                    .collect();
                by_sim.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1)
                        .unwrap()
                        .then_with(|| a.0.surface.cmp(&b.0.surface))
                });
                let expected: Vec<String> = by_sim
                    .iter()
                    .take(budget)
                    .map(|(c, _)| c.surface.clone())
                    .collect();
                prop_assert_eq!(picked, expected);
            }

            #[test]
            fn budget_met_with_minimal_overshoot_and_no_duplicates(
                cands in candidates_strategy(2),
                qvec in prop::collection::vec(0.01..1.0f64, 6),
                budget in 1usize..16,
            ) {
                let q = EmbeddingVector::new(qvec);
                let picked = mmr_select(&q, &cands, budget, &KeywordConfig::default()).unwrap();

                let mut seen = HashSet::new();
                for surface in &picked {
                    prop_assert!(seen.insert(surface.clone()), "duplicate {surface}");
                    prop_assert!(cands.iter().any(|c| &c.surface == surface));
                }
                let cost = |s: &String| cands
                    .iter()
                    .find(|c| &c.surface == s)
                    .unwrap()
                    .token_count as usize;
                let total: usize = picked.iter().map(cost).sum();
                if picked.len() == cands.len() {
                    // candidates exhausted; any total is acceptable
                } else {
                    prop_assert!(total >= budget);
                }
                if let Some(last) = picked.last() {
                    prop_assert!(
                        total - cost(last) < budget,
                        "dropping the last pick must fall below the budget"
                    );
                }
            }
        }
    }

    #[test]
    fn keyword_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qk.jsonl");
        let records = vec![KeywordRecord {
            query_id: "1".into(),
            terms: vec!["chest".into(), "pain".into()],
        }];
        write_keyword_dump(&records, &path).unwrap();
        assert_eq!(read_keyword_dump(&path).unwrap(), records);
    }
}
