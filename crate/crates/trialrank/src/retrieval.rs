//! BM25 scoring and top-k search over a [`PostingsIndex`], plus the TREC
//! run format that every ranked result list serializes to.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::index::PostingsIndex;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("unknown document ordinal {0}")]
    UnknownDocument(u32),
    #[error("index is empty")]
    EmptyIndex,
    #[error("reranker unavailable: {0}")]
    RerankerUnavailable(String),
    #[error("malformed run file: {0}")]
    MalformedRun(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// BM25 hyperparameters. Defaults are the standard k1=1.2, b=0.75.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), String> {
        if !self.k1.is_finite() || self.k1 <= 0.0 {
            return Err(format!("k1 must be > 0, got {}", self.k1));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(format!("b must be in [0,1], got {}", self.b));
        }
        Ok(())
    }
}

/// A topic: the verbose admission-note text plus, once extracted, its
/// keyword representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub qd_text: String,
    pub qk_terms: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// Ranked results for one query. Scores are non-increasing with rank, ranks
/// are contiguous from 1, and no doc_id repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub query_id: String,
    pub run_tag: String,
    pub entries: Vec<RunEntry>,
}

impl ScoredRun {
    /// Sorts (score descending, doc_id ascending) and assigns ranks.
    pub fn from_scores(
        query_id: impl Into<String>,
        run_tag: impl Into<String>,
        scored: Vec<(String, f64)>,
    ) -> Self {
        let mut scored = scored;
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RunEntry {
                doc_id,
                rank: i as u32 + 1,
                score,
            })
            .collect();
        Self {
            query_id: query_id.into(),
            run_tag: run_tag.into(),
            entries,
        }
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }
}

/// Smoothed inverse document frequency: ln((N - df + 0.5)/(df + 0.5) + 1).
/// Strictly positive for any df <= N.
pub fn idf(num_docs: usize, df: usize) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// BM25 score of one document for a processed query-term multiset. Repeated
/// query terms contribute once per occurrence; terms absent from the
/// dictionary contribute 0.
pub fn bm25_score(
    query_terms: &[String],
    doc_ordinal: u32,
    index: &PostingsIndex,
    params: Bm25Params,
) -> Result<f64, RetrievalError> {
    let entry = index
        .doc(doc_ordinal)
        .ok_or(RetrievalError::UnknownDocument(doc_ordinal))?;
    let dl = f64::from(entry.len);
    let avgdl = index.avg_doc_len();
    let mut score = 0.0;
    for term in query_terms {
        let Some(postings) = index.postings(term) else {
            continue;
        };
        let Ok(pos) = postings.binary_search_by_key(&doc_ordinal, |p| p.doc) else {
            continue;
        };
        let tf = f64::from(postings[pos].tf);
        let norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
        score += idf(index.num_docs(), postings.len()) * tf * (params.k1 + 1.0) / (tf + norm);
    }
    Ok(score)
}

/// Top-k BM25 search. Ties break by ascending doc_id; documents scoring 0
/// (no term overlap) are excluded. The returned run carries an empty
/// query_id; callers stamp it.
pub fn search(
    query_terms: &[String],
    index: &PostingsIndex,
    k: usize,
    run_tag: &str,
    params: Bm25Params,
) -> Result<ScoredRun, RetrievalError> {
    if index.num_docs() == 0 {
        return Err(RetrievalError::EmptyIndex);
    }
    let avgdl = index.avg_doc_len();
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for term in query_terms {
        let Some(postings) = index.postings(term) else {
            continue;
        };
        let term_idf = idf(index.num_docs(), postings.len());
        for p in postings {
            let dl = f64::from(index.doc(p.doc).expect("posting ordinal in doc table").len);
            let tf = f64::from(p.tf);
            let norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
            *acc.entry(p.doc).or_insert(0.0) +=
                term_idf * tf * (params.k1 + 1.0) / (tf + norm);
        }
    }
    let scored: Vec<(String, f64)> = acc
        .into_iter()
        .filter(|&(_, score)| score > 0.0)
        .map(|(ordinal, score)| (index.doc(ordinal).unwrap().doc_id.clone(), score))
        .collect();
    let mut run = ScoredRun::from_scores("", run_tag, scored);
    run.truncate(k);
    Ok(run)
}

/// External second-stage scorer. Given the query, a document and its
/// first-stage score, returns the score used for reordering.
pub trait Reranker: Send + Sync {
    fn rescore(
        &self,
        query_id: &str,
        doc_id: &str,
        first_stage_score: f64,
    ) -> Result<f64, RetrievalError>;
}

/// Returns the first-stage score unchanged, so the run order is preserved.
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn rescore(&self, _: &str, _: &str, score: f64) -> Result<f64, RetrievalError> {
        Ok(score)
    }
}

/// Reorders a run by reranker scores. The sort is stable, so documents the
/// reranker scores equally keep their original relative order.
pub fn rerank_hook(run: &ScoredRun, reranker: &dyn Reranker) -> Result<ScoredRun, RetrievalError> {
    let mut rescored: Vec<(usize, String, f64)> = Vec::with_capacity(run.entries.len());
    for (i, entry) in run.entries.iter().enumerate() {
        let score = reranker.rescore(&run.query_id, &entry.doc_id, entry.score)?;
        if !score.is_finite() {
            return Err(RetrievalError::RerankerUnavailable(format!(
                "non-finite score for {}",
                entry.doc_id
            )));
        }
        rescored.push((i, entry.doc_id.clone(), score));
    }
    rescored.sort_by(|a, b| b.2.partial_cmp(&a.2).expect("finite scores"));
    let entries = rescored
        .into_iter()
        .enumerate()
        .map(|(rank, (_, doc_id, score))| RunEntry {
            doc_id,
            rank: rank as u32 + 1,
            score,
        })
        .collect();
    Ok(ScoredRun {
        query_id: run.query_id.clone(),
        run_tag: run.run_tag.clone(),
        entries,
    })
}

/// Writes runs in TREC format: `<query_id> Q0 <doc_id> <rank> <score> <tag>`
/// with six decimal places on the score.
pub fn write_trec_run(runs: &[ScoredRun], mut w: impl Write) -> io::Result<()> {
    for run in runs {
        for entry in &run.entries {
            writeln!(
                w,
                "{} Q0 {} {} {:.6} {}",
                run.query_id, entry.doc_id, entry.rank, entry.score, run.run_tag
            )?;
        }
    }
    Ok(())
}

pub fn write_trec_run_file(runs: &[ScoredRun], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trec_run(runs, &mut w)?;
    w.flush()
}

/// Parses a TREC run file, validating per-query rank contiguity,
/// non-increasing scores, and doc_id uniqueness.
pub fn read_trec_run(path: &Path) -> Result<Vec<ScoredRun>, RetrievalError> {
    let reader = BufReader::new(File::open(path)?);
    let mut runs: Vec<ScoredRun> = Vec::new();
    let mut by_query: HashMap<String, usize> = HashMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let parse = |f: Option<&str>, what: &str| {
            f.map(str::to_string).ok_or_else(|| {
                RetrievalError::MalformedRun(format!("line {}: missing {what}", lineno + 1))
            })
        };
        let query_id = parse(fields.next(), "query id")?;
        let _q0 = parse(fields.next(), "Q0 column")?;
        let doc_id = parse(fields.next(), "doc id")?;
        let rank: u32 = parse(fields.next(), "rank")?.parse().map_err(|e| {
            RetrievalError::MalformedRun(format!("line {}: bad rank: {e}", lineno + 1))
        })?;
        let score: f64 = parse(fields.next(), "score")?.parse().map_err(|e| {
            RetrievalError::MalformedRun(format!("line {}: bad score: {e}", lineno + 1))
        })?;
        let run_tag = parse(fields.next(), "run tag")?;

        let idx = *by_query.entry(query_id.clone()).or_insert_with(|| {
            runs.push(ScoredRun {
                query_id: query_id.clone(),
                run_tag: run_tag.clone(),
                entries: Vec::new(),
            });
            runs.len() - 1
        });
        let run = &mut runs[idx];
        if rank as usize != run.entries.len() + 1 {
            return Err(RetrievalError::MalformedRun(format!(
                "line {}: rank {} not contiguous for query {}",
                lineno + 1,
                rank,
                query_id
            )));
        }
        if let Some(last) = run.entries.last() {
            if score > last.score {
                return Err(RetrievalError::MalformedRun(format!(
                    "line {}: score increases with rank for query {}",
                    lineno + 1,
                    query_id
                )));
            }
        }
        if run.entries.iter().any(|e| e.doc_id == doc_id) {
            return Err(RetrievalError::MalformedRun(format!(
                "line {}: duplicate doc {} for query {}",
                lineno + 1,
                doc_id,
                query_id
            )));
        }
        run.entries.push(RunEntry { doc_id, rank, score });
    }
    Ok(runs)
}
