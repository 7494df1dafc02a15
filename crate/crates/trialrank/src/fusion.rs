//! TOPSIS aggregation of the three per-view BM25 runs (R_in, R_ex, R_main)
//! into one ranking. Inclusion and main-section relevance are benefit
//! criteria; exclusion relevance is a cost criterion, handled purely
//! through ideal-solution selection (scores are never inverted).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::retrieval::ScoredRun;

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("query id mismatch: {0} vs {1}")]
    QueryIdMismatch(String, String),
    #[error("decision matrix is empty")]
    EmptyMatrix,
    #[error("criterion weights must each lie in (0,1) and sum to 1, got {0:?}")]
    InvalidWeights([f64; 3]),
    #[error("negative raw score {score} for document {doc_id}")]
    NegativeScore { doc_id: String, score: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Benefit,
    Cost,
}

/// One criterion of the decision problem.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionSpec {
    pub name: &'static str,
    pub direction: Direction,
    pub weight: f64,
}

/// Per-criterion weights; default is exact thirds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub r_in: f64,
    pub r_ex: f64,
    pub r_main: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            r_in: 1.0 / 3.0,
            r_ex: 1.0 / 3.0,
            r_main: 1.0 / 3.0,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<(), FusionError> {
        let w = [self.r_in, self.r_ex, self.r_main];
        let sum: f64 = w.iter().sum();
        if w.iter().any(|&x| !(x > 0.0 && x < 1.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(FusionError::InvalidWeights(w));
        }
        Ok(())
    }

    /// The R_in/R_ex/R_main criteria with their fixed directions.
    pub fn criteria(&self) -> Result<[CriterionSpec; 3], FusionError> {
        self.validate()?;
        Ok([
            CriterionSpec {
                name: "R_in",
                direction: Direction::Benefit,
                weight: self.r_in,
            },
            CriterionSpec {
                name: "R_ex",
                direction: Direction::Cost,
                weight: self.r_ex,
            },
            CriterionSpec {
                name: "R_main",
                direction: Direction::Benefit,
                weight: self.r_main,
            },
        ])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionRow {
    pub doc_id: String,
    /// Raw scores in criterion order (r_in, r_ex, r_main), all >= 0.
    pub scores: [f64; 3],
}

/// Per-query document x criteria score table.
#[derive(Debug, Clone)]
pub struct DecisionMatrix {
    pub query_id: String,
    pub rows: Vec<DecisionRow>,
    pub criteria: [CriterionSpec; 3],
}

/// Pools the union of each run's top `pool_depth` documents; scores missing
/// from a run are filled with 0 (the BM25 floor for non-matching documents).
/// Rows are ordered by doc_id for determinism.
pub fn build_decision_matrix(
    run_in: &ScoredRun,
    run_ex: &ScoredRun,
    run_main: &ScoredRun,
    pool_depth: usize,
    weights: &FusionWeights,
) -> Result<DecisionMatrix, FusionError> {
    for other in [run_ex, run_main] {
        if other.query_id != run_in.query_id {
            return Err(FusionError::QueryIdMismatch(
                run_in.query_id.clone(),
                other.query_id.clone(),
            ));
        }
    }
    let criteria = weights.criteria()?;

    let mut pool: std::collections::BTreeMap<String, [f64; 3]> = Default::default();
    for (slot, run) in [(0usize, run_in), (1, run_ex), (2, run_main)] {
        for entry in run.entries.iter().take(pool_depth) {
            if entry.score < 0.0 {
                return Err(FusionError::NegativeScore {
                    doc_id: entry.doc_id.clone(),
                    score: entry.score,
                });
            }
            pool.entry(entry.doc_id.clone()).or_insert([0.0; 3])[slot] = entry.score;
        }
    }
    let rows = pool
        .into_iter()
        .map(|(doc_id, scores)| DecisionRow { doc_id, scores })
        .collect();
    Ok(DecisionMatrix {
        query_id: run_in.query_id.clone(),
        rows,
        criteria,
    })
}

/// Vector (root-sum-square) normalization per criterion column, then
/// multiplication by the criterion weight. All-zero columns stay zero.
pub fn normalize_and_weight(matrix: &DecisionMatrix) -> Result<Vec<DecisionRow>, FusionError> {
    if matrix.rows.is_empty() {
        return Err(FusionError::EmptyMatrix);
    }
    let mut norms = [0.0f64; 3];
    for row in &matrix.rows {
        for (c, &x) in row.scores.iter().enumerate() {
            norms[c] += x * x;
        }
    }
    for n in &mut norms {
        *n = n.sqrt();
    }
    Ok(matrix
        .rows
        .iter()
        .map(|row| {
            let mut scores = [0.0f64; 3];
            for c in 0..3 {
                if norms[c] > 0.0 {
                    scores[c] = matrix.criteria[c].weight * row.scores[c] / norms[c];
                }
            }
            DecisionRow {
                doc_id: row.doc_id.clone(),
                scores,
            }
        })
        .collect())
}

/// The positive ideal takes the best value per criterion (max for benefit,
/// min for cost); the negative ideal is the exact opposite.
pub fn ideal_solutions(
    weighted: &[DecisionRow],
    criteria: &[CriterionSpec; 3],
) -> Result<([f64; 3], [f64; 3]), FusionError> {
    if weighted.is_empty() {
        return Err(FusionError::EmptyMatrix);
    }
    let mut positive = [0.0f64; 3];
    let mut negative = [0.0f64; 3];
    for c in 0..3 {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in weighted {
            min = min.min(row.scores[c]);
            max = max.max(row.scores[c]);
        }
        match criteria[c].direction {
            Direction::Benefit => {
                positive[c] = max;
                negative[c] = min;
            }
            Direction::Cost => {
                positive[c] = min;
                negative[c] = max;
            }
        }
    }
    Ok((positive, negative))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosenessEntry {
    pub doc_id: String,
    pub d_plus: f64,
    pub d_minus: f64,
    pub closeness: f64,
}

/// Documents sorted by relative closeness to the positive ideal,
/// descending; ties break by ascending doc_id.
#[derive(Debug, Clone)]
pub struct ClosenessRanking {
    pub query_id: String,
    pub entries: Vec<ClosenessEntry>,
}

impl ClosenessRanking {
    /// Materializes the ranking as a run with closeness as the score.
    pub fn to_scored_run(&self, run_tag: &str) -> ScoredRun {
        ScoredRun {
            query_id: self.query_id.clone(),
            run_tag: run_tag.to_string(),
            entries: self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| crate::retrieval::RunEntry {
                    doc_id: e.doc_id.clone(),
                    rank: i as u32 + 1,
                    score: e.closeness,
                })
                .collect(),
        }
    }
}

fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Full TOPSIS pipeline: normalize and weight, build ideals, measure
/// euclidean distances, and rank by closeness d-/(d+ + d-). A document
/// equidistant at zero from both ideals gets the neutral closeness 0.5.
pub fn topsis_rank(matrix: &DecisionMatrix) -> Result<ClosenessRanking, FusionError> {
    let weighted = normalize_and_weight(matrix)?;
    let (positive, negative) = ideal_solutions(&weighted, &matrix.criteria)?;
    let mut entries: Vec<ClosenessEntry> = weighted
        .into_iter()
        .map(|row| {
            let d_plus = euclidean(&row.scores, &positive);
            let d_minus = euclidean(&row.scores, &negative);
            let closeness = if d_plus + d_minus == 0.0 {
                0.5
            } else {
                d_minus / (d_plus + d_minus)
            };
            ClosenessEntry {
                doc_id: row.doc_id,
                d_plus,
                d_minus,
                closeness,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.closeness
            .partial_cmp(&a.closeness)
            .expect("closeness is finite")
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    Ok(ClosenessRanking {
        query_id: matrix.query_id.clone(),
        entries,
    })
}

/// Per-query diagnostic record: the weighted normalized matrix, both
/// ideals, and per-document distances.
#[derive(Serialize)]
struct FusionDiagnostics<'a> {
    query_id: &'a str,
    criteria: &'a [CriterionSpec; 3],
    weighted_matrix: Vec<DecisionRow>,
    positive_ideal: [f64; 3],
    negative_ideal: [f64; 3],
    distances: Vec<ClosenessEntry>,
}

/// Writes one JSON diagnostics line for the query; appends when the file
/// already holds other queries.
pub fn dump_diagnostics(matrix: &DecisionMatrix, path: &Path) -> Result<(), FusionError> {
    let weighted = normalize_and_weight(matrix)?;
    let (positive, negative) = ideal_solutions(&weighted, &matrix.criteria)?;
    let ranking = topsis_rank(matrix)?;
    let diag = FusionDiagnostics {
        query_id: &matrix.query_id,
        criteria: &matrix.criteria,
        weighted_matrix: weighted,
        positive_ideal: positive,
        negative_ideal: negative,
        distances: ranking.entries,
    };
    let file = File::options().create(true).append(true).open(path)?;
    let mut w = BufWriter::new(file);
    let line = serde_json::to_string(&diag).expect("diagnostics serialize");
    writeln!(w, "{line}")?;
    w.flush()?;
    Ok(())
}
