//! End-to-end orchestration: topics in, TREC run file out, for any
//! [`RunConfig`]. Queries are scored in parallel; a `threads` option caps
//! the worker pool.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use regex::Regex;

use crate::config::{ConfigError, QueryRepr, RelevanceModel, RunConfig};
use crate::corpus::FieldView;
use crate::fusion::{self, FusionError};
use crate::index::{self, IndexError, PostingsIndex};
use crate::keywords::{self, EmbeddingProvider, KeywordError};
use crate::retrieval::{self, IdentityReranker, Query, Reranker, RetrievalError, ScoredRun};
use crate::textproc::TextPipeline;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing index for view {view}: {path}")]
    MissingIndex { view: &'static str, path: PathBuf },
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Keywords(#[from] KeywordError),
    #[error("topics file error: {0}")]
    Topics(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads topics from either line-delimited `query_id<TAB>text` or the
/// track's `<topic number="...">` markup (sniffed from the content).
pub fn load_topics(path: &Path) -> Result<Vec<Query>, PipelineError> {
    let content = std::fs::read_to_string(path)?;
    if content.trim_start().starts_with('<') {
        return parse_topic_markup(&content);
    }
    let mut queries = Vec::new();
    let reader = BufReader::new(File::open(path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (query_id, text) = line.split_once('\t').ok_or_else(|| {
            PipelineError::Topics(format!(
                "{}:{}: expected query_id<TAB>text",
                path.display(),
                lineno + 1
            ))
        })?;
        let query_id = query_id.trim();
        let text = text.trim();
        if query_id.is_empty() || text.is_empty() {
            return Err(PipelineError::Topics(format!(
                "{}:{}: empty query id or text",
                path.display(),
                lineno + 1
            )));
        }
        queries.push(Query {
            query_id: query_id.to_string(),
            qd_text: text.to_string(),
            qk_terms: None,
        });
    }
    Ok(queries)
}

fn topic_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?s)<topic\s+number\s*=\s*"([^"]+)"[^>]*>(.*?)</topic>"#)
            .expect("topic pattern compiles")
    })
}

fn parse_topic_markup(content: &str) -> Result<Vec<Query>, PipelineError> {
    let mut queries = Vec::new();
    for cap in topic_re().captures_iter(content) {
        let query_id = cap[1].trim().to_string();
        let qd_text = cap[2].split_whitespace().collect::<Vec<_>>().join(" ");
        if qd_text.is_empty() {
            return Err(PipelineError::Topics(format!("topic {query_id} has no text")));
        }
        queries.push(Query {
            query_id,
            qd_text,
            qk_terms: None,
        });
    }
    if queries.is_empty() {
        return Err(PipelineError::Topics(
            "no <topic number=\"...\"> elements found".into(),
        ));
    }
    Ok(queries)
}

/// Everything the pipeline needs besides the run config itself.
pub struct PipelineOptions {
    /// Collection prefix; per-view indexes live at `<prefix>.<view>.idx`.
    pub index_prefix: PathBuf,
    pub pipeline: TextPipeline,
    pub provider: Box<dyn EmbeddingProvider>,
    pub reranker: Box<dyn Reranker>,
    pub threads: Option<usize>,
}

impl PipelineOptions {
    pub fn new(index_prefix: impl Into<PathBuf>) -> Self {
        Self {
            index_prefix: index_prefix.into(),
            pipeline: TextPipeline::default_english(),
            provider: Box::new(keywords::HashedBowProvider::default()),
            reranker: Box::new(IdentityReranker),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunSummary {
    pub queries: usize,
    pub result_rows: usize,
}

fn load_view_index(prefix: &Path, view: FieldView) -> Result<PostingsIndex, PipelineError> {
    let path = index::index_path(prefix, view);
    if !path.exists() {
        return Err(PipelineError::MissingIndex {
            view: view.as_str(),
            path,
        });
    }
    Ok(index::load_index(&path)?)
}

/// Resolves each query's search terms for the configured representation:
/// the processed verbose text for Qd, or the extracted keyword terms pushed
/// through the same text pipeline for Qk.
fn search_terms(
    query: &Query,
    config: &RunConfig,
    opts: &PipelineOptions,
) -> Result<Vec<String>, PipelineError> {
    match config.query_representation {
        QueryRepr::Qd => Ok(opts.pipeline.process(&query.qd_text)),
        QueryRepr::Qk => {
            let terms = match &query.qk_terms {
                Some(terms) => terms.clone(),
                None => keywords::extract_keywords(
                    &query.qd_text,
                    opts.pipeline.stoplist(),
                    &opts.provider,
                    &config.keywords,
                )?,
            };
            Ok(opts
                .pipeline
                .process(&terms.join(" ")))
        }
    }
}

fn run_thread_pool(threads: Option<usize>) -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool builds")
}

/// Executes one configured run end to end and writes its TREC run file.
pub fn run_pipeline(
    config: &RunConfig,
    opts: &PipelineOptions,
    queries: &[Query],
    output: &Path,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let started = Instant::now();

    // Keyword extraction is sequential so provider/cache access stays
    // simple; it is cached per query text anyway.
    let mut prepared: Vec<(Query, Vec<String>)> = Vec::with_capacity(queries.len());
    for query in queries {
        let terms = search_terms(query, config, opts)?;
        prepared.push((query.clone(), terms));
    }
    info!(
        "prepared {} queries as {} in {:.2?}",
        prepared.len(),
        config.query_representation,
        started.elapsed()
    );

    let stage = Instant::now();
    let pool = run_thread_pool(opts.threads);
    let runs: Vec<ScoredRun> = match config.relevance_model {
        RelevanceModel::Bm25 | RelevanceModel::Bm25Rerank => {
            let view = config.views[0];
            let index = load_view_index(&opts.index_prefix, view)?;
            let results: Result<Vec<ScoredRun>, PipelineError> = pool.install(|| {
                prepared
                    .par_iter()
                    .map(|(query, terms)| {
                        let mut run = retrieval::search(
                            terms,
                            &index,
                            config.depth,
                            &config.run_name,
                            config.bm25,
                        )?;
                        run.query_id = query.query_id.clone();
                        if config.relevance_model == RelevanceModel::Bm25Rerank {
                            run = retrieval::rerank_hook(&run, opts.reranker.as_ref())?;
                        }
                        Ok(run)
                    })
                    .collect()
            });
            results?
        }
        RelevanceModel::TtMw => {
            let index_in = load_view_index(&opts.index_prefix, FieldView::IIn)?;
            let index_ex = load_view_index(&opts.index_prefix, FieldView::IEx)?;
            let index_main = load_view_index(&opts.index_prefix, FieldView::IMain)?;
            let results: Result<Vec<ScoredRun>, PipelineError> = pool.install(|| {
                prepared
                    .par_iter()
                    .map(|(query, terms)| {
                        let mut per_view = Vec::with_capacity(3);
                        for index in [&index_in, &index_ex, &index_main] {
                            let mut run = retrieval::search(
                                terms,
                                index,
                                config.pool_depth,
                                &config.run_name,
                                config.bm25,
                            )?;
                            run.query_id = query.query_id.clone();
                            per_view.push(run);
                        }
                        let matrix = fusion::build_decision_matrix(
                            &per_view[0],
                            &per_view[1],
                            &per_view[2],
                            config.pool_depth,
                            &config.weights,
                        )?;
                        let mut fused = if matrix.rows.is_empty() {
                            ScoredRun {
                                query_id: query.query_id.clone(),
                                run_tag: config.run_name.clone(),
                                entries: Vec::new(),
                            }
                        } else {
                            fusion::topsis_rank(&matrix)?.to_scored_run(&config.run_name)
                        };
                        fused.truncate(config.depth);
                        Ok(fused)
                    })
                    .collect()
            });
            results?
        }
    };
    let result_rows = runs.iter().map(|r| r.entries.len()).sum();
    info!(
        "scored {} queries ({} result rows) in {:.2?}",
        runs.len(),
        result_rows,
        stage.elapsed()
    );

    retrieval::write_trec_run_file(&runs, output)?;
    info!(
        "run {} written to {} in {:.2?} total",
        config.run_name,
        output.display(),
        started.elapsed()
    );
    Ok(RunSummary {
        queries: runs.len(),
        result_rows,
    })
}

/// Extracts Qk terms for every topic (used by the extract-keywords stage).
pub fn extract_all_keywords(
    queries: &[Query],
    opts: &PipelineOptions,
    config: &keywords::KeywordConfig,
) -> Result<Vec<keywords::KeywordRecord>, PipelineError> {
    let mut records = Vec::with_capacity(queries.len());
    for query in queries {
        let terms = keywords::extract_keywords(
            &query.qd_text,
            opts.pipeline.stoplist(),
            &opts.provider,
            config,
        )?;
        records.push(keywords::KeywordRecord {
            query_id: query.query_id.clone(),
            terms,
        });
    }
    Ok(records)
}

/// Attaches previously dumped keyword terms to their topics.
pub fn attach_keywords(queries: &mut [Query], records: &[keywords::KeywordRecord]) {
    let by_id: HashMap<&str, &keywords::KeywordRecord> = records
        .iter()
        .map(|r| (r.query_id.as_str(), r))
        .collect();
    for query in queries {
        if let Some(record) = by_id.get(query.query_id.as_str()) {
            query.qk_terms = Some(record.terms.clone());
        }
    }
}
