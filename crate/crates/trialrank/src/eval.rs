//! TREC-style evaluation: qrels parsing, NDCG@k, PREC@k, reciprocal rank,
//! and per-query comparison against published median scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::Serialize;

use crate::retrieval::ScoredRun;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("malformed qrels: {0}")]
    MalformedQrels(String),
    #[error("malformed median file: {0}")]
    MalformedMedian(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Relevance judgments: (query_id, doc_id) -> grade. In the clinical-trials
/// grading, 0 = not relevant, 1 = excluded, 2 = eligible.
#[derive(Debug, Clone, Default)]
pub struct QrelSet {
    grades: HashMap<String, HashMap<String, u32>>,
}

impl QrelSet {
    /// Parses the 4-column TREC format `query_id 0 doc_id grade`. Duplicate
    /// (query, doc) pairs with conflicting grades are rejected with their
    /// line number.
    pub fn parse(reader: impl BufRead) -> Result<Self, EvalError> {
        let mut grades: HashMap<String, HashMap<String, u32>> = HashMap::new();
        let mut any = false;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(EvalError::MalformedQrels(format!(
                    "line {}: expected 4 columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let grade: u32 = fields[3].parse().map_err(|e| {
                EvalError::MalformedQrels(format!("line {}: bad grade: {e}", lineno + 1))
            })?;
            let per_query = grades.entry(fields[0].to_string()).or_default();
            if let Some(&existing) = per_query.get(fields[2]) {
                if existing != grade {
                    return Err(EvalError::MalformedQrels(format!(
                        "line {}: duplicate pair ({}, {}) with conflicting grades {} and {}",
                        lineno + 1,
                        fields[0],
                        fields[2],
                        existing,
                        grade
                    )));
                }
            }
            per_query.insert(fields[2].to_string(), grade);
            any = true;
        }
        if !any {
            warn!("qrels input contained no judgments");
        }
        Ok(Self { grades })
    }

    pub fn from_file(path: &Path) -> Result<Self, EvalError> {
        Self::parse(BufReader::new(File::open(path)?))
    }

    /// 0 for unjudged pairs.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn judged(&self, query_id: &str) -> Option<&HashMap<String, u32>> {
        self.grades.get(query_id)
    }

    pub fn query_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.grades.keys().map(String::as_str).collect();
        ids.sort();
        ids
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// Gain applied to a grade inside DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainScheme {
    /// grade / log2(rank+1), the standard evaluator's ndcg_cut.
    #[default]
    Linear,
    /// (2^grade - 1) / log2(rank+1).
    Exponential,
}

fn gain(grade: u32, scheme: GainScheme) -> f64 {
    match scheme {
        GainScheme::Linear => f64::from(grade),
        GainScheme::Exponential => (2f64).powi(grade as i32) - 1.0,
    }
}

fn dcg(grades: impl Iterator<Item = u32>, k: usize, scheme: GainScheme) -> f64 {
    grades
        .take(k)
        .enumerate()
        .map(|(i, g)| gain(g, scheme) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k: DCG over the ranked run divided by the ideal DCG computed from
/// ALL judged grades for the query, sorted descending. 0 when the ideal is
/// 0 (no relevant judgments). Unjudged documents count grade 0.
pub fn ndcg_at_k(run: &ScoredRun, qrels: &QrelSet, k: usize, scheme: GainScheme) -> f64 {
    let retrieved = run
        .entries
        .iter()
        .map(|e| qrels.grade(&run.query_id, &e.doc_id));
    let dcg_val = dcg(retrieved, k, scheme);
    let mut ideal: Vec<u32> = qrels
        .judged(&run.query_id)
        .map(|m| m.values().copied().collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter(), k, scheme);
    if idcg == 0.0 {
        0.0
    } else {
        dcg_val / idcg
    }
}

/// Fraction of the top k that meet the relevance threshold; runs shorter
/// than k count the missing slots as non-relevant.
pub fn prec_at_k(run: &ScoredRun, qrels: &QrelSet, k: usize, threshold: u32) -> f64 {
    let hits = run
        .entries
        .iter()
        .take(k)
        .filter(|e| qrels.grade(&run.query_id, &e.doc_id) >= threshold)
        .count();
    hits as f64 / k as f64
}

/// 1/rank of the first retrieved document meeting the threshold; 0 if none.
pub fn reciprocal_rank(run: &ScoredRun, qrels: &QrelSet, threshold: u32) -> f64 {
    run.entries
        .iter()
        .position(|e| qrels.grade(&run.query_id, &e.doc_id) >= threshold)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Minimum grade counted as relevant by the binary metrics (PREC, RR).
    pub relevance_threshold: u32,
    pub gain: GainScheme,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            relevance_threshold: 1,
            gain: GainScheme::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub ndcg10: f64,
    pub ndcg5: f64,
    pub p10: f64,
    pub rr: f64,
}

/// Per-query and mean metric values. Means are arithmetic over every query
/// in the qrels, counting queries the run never retrieved for as zero.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub mean: QueryMetrics,
}

pub fn evaluate_runs(runs: &[ScoredRun], qrels: &QrelSet, config: EvalConfig) -> EvalReport {
    let by_query: HashMap<&str, &ScoredRun> =
        runs.iter().map(|r| (r.query_id.as_str(), r)).collect();
    for run in runs {
        if qrels.judged(&run.query_id).is_none() {
            warn!("run query {} has no judgments; ignored", run.query_id);
        }
    }
    let empty = |query_id: &str| ScoredRun {
        query_id: query_id.to_string(),
        run_tag: String::new(),
        entries: Vec::new(),
    };
    let mut per_query = BTreeMap::new();
    let mut sum = QueryMetrics::default();
    let query_ids = qrels.query_ids();
    for query_id in &query_ids {
        let owned;
        let run = match by_query.get(query_id) {
            Some(r) => *r,
            None => {
                owned = empty(query_id);
                &owned
            }
        };
        let m = QueryMetrics {
            ndcg10: ndcg_at_k(run, qrels, 10, config.gain),
            ndcg5: ndcg_at_k(run, qrels, 5, config.gain),
            p10: prec_at_k(run, qrels, 10, config.relevance_threshold),
            rr: reciprocal_rank(run, qrels, config.relevance_threshold),
        };
        sum.ndcg10 += m.ndcg10;
        sum.ndcg5 += m.ndcg5;
        sum.p10 += m.p10;
        sum.rr += m.rr;
        per_query.insert(query_id.to_string(), m);
    }
    let n = query_ids.len().max(1) as f64;
    EvalReport {
        per_query,
        mean: QueryMetrics {
            ndcg10: sum.ndcg10 / n,
            ndcg5: sum.ndcg5 / n,
            p10: sum.p10 / n,
            rr: sum.rr / n,
        },
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>8} {:>8} {:>8} {:>8}",
            "query", "NDCG@10", "NDCG@5", "P@10", "RR"
        )?;
        for (query_id, m) in &self.per_query {
            writeln!(
                f,
                "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                query_id, m.ndcg10, m.ndcg5, m.p10, m.rr
            )?;
        }
        write!(
            f,
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            "mean", self.mean.ndcg10, self.mean.ndcg5, self.mean.p10, self.mean.rr
        )
    }
}

/// Parses a 2-column `query_id value` median file.
pub fn parse_median_file(path: &Path) -> Result<BTreeMap<String, f64>, EvalError> {
    let reader = BufReader::new(File::open(path)?);
    let mut medians = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(EvalError::MalformedMedian(format!(
                "line {}: expected 2 columns",
                lineno + 1
            )));
        }
        let value: f64 = fields[1].parse().map_err(|e| {
            EvalError::MalformedMedian(format!("line {}: bad value: {e}", lineno + 1))
        })?;
        medians.insert(fields[0].to_string(), value);
    }
    Ok(medians)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianComparison {
    /// Queries whose value strictly exceeds their median.
    pub improved: usize,
    /// Number of queries in the median file.
    pub total: usize,
}

impl MedianComparison {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.improved as f64 / self.total as f64
        }
    }
}

/// Counts queries strictly above their median. Queries without a median
/// entry are excluded with a warning; the fraction's denominator is the
/// median file's query count.
pub fn compare_to_median(
    per_query: &BTreeMap<String, f64>,
    medians: &BTreeMap<String, f64>,
) -> MedianComparison {
    let mut improved = 0;
    for (query_id, value) in per_query {
        match medians.get(query_id) {
            Some(median) => {
                if value > median {
                    improved += 1;
                }
            }
            None => warn!("query {query_id} has no median entry; excluded"),
        }
    }
    MedianComparison {
        improved,
        total: medians.len(),
    }
}
