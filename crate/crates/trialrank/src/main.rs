//! Command-line front end. Each subcommand maps onto one library stage;
//! results go to files, logs and timings to stderr.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::error;

use trialrank::config::{ConfigError, RunConfig};
use trialrank::corpus::{self, EligibilityMarkers, FieldView};
use trialrank::eval::{self, EvalConfig, GainScheme, QrelSet};
use trialrank::fusion::{self, FusionWeights};
use trialrank::index;
use trialrank::keywords::{self, KeywordConfig, LengthPolicy, ProviderSpec};
use trialrank::pipeline::{self, PipelineError, PipelineOptions};
use trialrank::retrieval::{self, Bm25Params};
use trialrank::textproc::{Stoplist, TextPipeline};

const EMBEDDING_ENDPOINT_VAR: &str = "TRIALRANK_EMBEDDING_ENDPOINT";

#[derive(Parser)]
#[command(name = "trialrank", about = "Clinical-trial retrieval engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProviderArgs {
    /// Embedding provider: "hashed", "http" (endpoint from
    /// TRIALRANK_EMBEDDING_ENDPOINT), or "cache" (cache file only)
    #[arg(long, default_value = "hashed")]
    provider: String,
    /// Embedding cache file (line-delimited; created when absent)
    #[arg(long)]
    cache: Option<PathBuf>,
    /// HTTP provider timeout in seconds
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

impl ProviderArgs {
    fn build(&self) -> Result<Box<dyn keywords::EmbeddingProvider>, CliError> {
        let spec = match self.provider.as_str() {
            "hashed" => ProviderSpec::Hashed,
            "http" => {
                let endpoint = std::env::var(EMBEDDING_ENDPOINT_VAR).map_err(|_| {
                    CliError::Config(format!(
                        "provider \"http\" needs {EMBEDDING_ENDPOINT_VAR} set"
                    ))
                })?;
                ProviderSpec::Http {
                    endpoint,
                    timeout: Duration::from_secs(self.timeout),
                }
            }
            "cache" => {
                if self.cache.is_none() {
                    return Err(CliError::Config(
                        "provider \"cache\" needs --cache <file>".into(),
                    ));
                }
                ProviderSpec::CacheOnly
            }
            other => {
                return Err(CliError::Config(format!("unknown provider {other:?}")));
            }
        };
        keywords::build_provider(spec, self.cache.as_ref()).map_err(CliError::from)
    }
}

#[derive(Args)]
struct StoplistArg {
    /// Stopword file (one lowercase word per line); default is the bundled
    /// English list
    #[arg(long)]
    stoplist: Option<PathBuf>,
}

impl StoplistArg {
    fn pipeline(&self) -> Result<TextPipeline, CliError> {
        Ok(match &self.stoplist {
            Some(path) => TextPipeline::new(Stoplist::from_file(path).map_err(|e| {
                CliError::Data(format!("stoplist {}: {e}", path.display()))
            })?),
            None => TextPipeline::default_english(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse registry records and write the intermediate corpus file
    Ingest {
        /// Directory of XML records or a line-delimited JSON archive
        #[arg(long)]
        input: PathBuf,
        /// Corpus file to write (one JSON record per line)
        #[arg(long)]
        output: PathBuf,
    },
    /// Build per-view inverted indexes from a corpus file
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        /// View to index, or "all"
        #[arg(long, default_value = "all")]
        view: String,
        /// Collection prefix; indexes land at <prefix>.<view>.idx
        #[arg(long)]
        out_prefix: PathBuf,
        #[command(flatten)]
        stoplist: StoplistArg,
    },
    /// Reduce verbose topics to keyword queries (Qk) and dump them
    ExtractKeywords {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Relevance/diversity trade-off in [0,1]
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Fixed token budget instead of half the filtered query length
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        provider: ProviderArgs,
        #[command(flatten)]
        stoplist: StoplistArg,
    },
    /// BM25 search of one view index for every topic
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Keyword dump to use as the query representation (Qd otherwise)
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value = "bm25")]
        tag: String,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        stoplist: StoplistArg,
    },
    /// TOPSIS-fuse three per-view run files into one ranking
    Fuse {
        #[arg(long)]
        run_in: PathBuf,
        #[arg(long)]
        run_ex: PathBuf,
        #[arg(long)]
        run_main: PathBuf,
        #[arg(long, default_value_t = 1000)]
        pool_depth: usize,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        weight_in: f64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        weight_ex: f64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        weight_main: f64,
        #[arg(long, default_value = "fused")]
        tag: String,
        /// Append per-query normalized matrices, ideals and distances here
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a run file against qrels
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Extra cutoff: when not 10, mean NDCG@k and P@k are printed too
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Minimum grade counted as relevant by P@k and RR
        #[arg(long, default_value_t = 1)]
        threshold: u32,
        /// Use exponential (2^g - 1) gain for NDCG
        #[arg(long)]
        exponential_gain: bool,
        /// Per-query median file for improved-query counts (NDCG@10)
        #[arg(long)]
        median: Option<PathBuf>,
        /// Also write the report as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Execute a configured run end to end
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Collection prefix of the built indexes
        #[arg(long)]
        index_prefix: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Run file destination (falls back to the config's output key)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker thread cap for per-query scoring
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        provider: ProviderArgs,
        #[command(flatten)]
        stoplist: StoplistArg,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Data(_) => ExitCode::from(3),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidConfig(inner) => CliError::Config(inner.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<keywords::KeywordError> for CliError {
    fn from(e: keywords::KeywordError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { input, output } => {
            let stats = corpus::ingest_corpus(&input, &EligibilityMarkers::default(), &output)
                .map_err(|e| CliError::Data(e.to_string()))?;
            log::info!(
                "wrote {} records ({} skipped, {} duplicates replaced) to {}",
                stats.written,
                stats.skipped,
                stats.replaced_duplicates,
                output.display()
            );
            Ok(())
        }
        Command::BuildIndex {
            corpus,
            view,
            out_prefix,
            stoplist,
        } => {
            let pipeline = stoplist.pipeline()?;
            let views: Vec<FieldView> = if view == "all" {
                FieldView::ALL.to_vec()
            } else {
                vec![view
                    .parse()
                    .map_err(|e: String| CliError::Config(e))?]
            };
            for view in views {
                let started = std::time::Instant::now();
                let idx = index::build_index(&corpus, view, &pipeline)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                let path = index::index_path(&out_prefix, view);
                index::save_index(&idx, &path).map_err(|e| CliError::Data(e.to_string()))?;
                log::info!(
                    "indexed {} docs / {} terms for {} into {} in {:.2?}",
                    idx.num_docs(),
                    idx.num_terms(),
                    view,
                    path.display(),
                    started.elapsed()
                );
            }
            Ok(())
        }
        Command::ExtractKeywords {
            queries,
            output,
            lambda,
            budget,
            provider,
            stoplist,
        } => {
            let topics = pipeline::load_topics(&queries)?;
            let mut opts = PipelineOptions::new(PathBuf::new());
            opts.pipeline = stoplist.pipeline()?;
            opts.provider = provider.build()?;
            let config = KeywordConfig {
                lambda,
                length_policy: budget.map_or(LengthPolicy::DynamicHalf, LengthPolicy::Fixed),
                ..KeywordConfig::default()
            };
            if !(0.0..=1.0).contains(&lambda) {
                return Err(CliError::Config(format!(
                    "lambda must be in [0,1], got {lambda}"
                )));
            }
            let records = pipeline::extract_all_keywords(&topics, &opts, &config)?;
            keywords::write_keyword_dump(&records, &output)?;
            log::info!("wrote {} keyword records to {}", records.len(), output.display());
            Ok(())
        }
        Command::Search {
            index: index_path,
            queries,
            keywords: keyword_dump,
            k,
            tag,
            k1,
            b,
            output,
            stoplist,
        } => {
            let params = Bm25Params { k1, b };
            params.validate().map_err(CliError::Config)?;
            if k == 0 {
                return Err(CliError::Config("k must be at least 1".into()));
            }
            let pipeline_ = stoplist.pipeline()?;
            let idx = index::load_index(&index_path).map_err(|e| CliError::Data(e.to_string()))?;
            let mut topics = pipeline::load_topics(&queries)?;
            if let Some(dump) = keyword_dump {
                let records = keywords::read_keyword_dump(&dump)?;
                pipeline::attach_keywords(&mut topics, &records);
            }
            let mut runs = Vec::with_capacity(topics.len());
            for topic in &topics {
                let terms = match &topic.qk_terms {
                    Some(terms) => pipeline_.process(&terms.join(" ")),
                    None => pipeline_.process(&topic.qd_text),
                };
                let mut run = retrieval::search(&terms, &idx, k, &tag, params)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                run.query_id = topic.query_id.clone();
                runs.push(run);
            }
            retrieval::write_trec_run_file(&runs, &output)
                .map_err(|e| CliError::Data(e.to_string()))?;
            log::info!("wrote {} queries to {}", runs.len(), output.display());
            Ok(())
        }
        Command::Fuse {
            run_in,
            run_ex,
            run_main,
            pool_depth,
            weight_in,
            weight_ex,
            weight_main,
            tag,
            diagnostics,
            output,
        } => {
            let weights = FusionWeights {
                r_in: weight_in,
                r_ex: weight_ex,
                r_main: weight_main,
            };
            weights
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            if pool_depth == 0 {
                return Err(CliError::Config("pool_depth must be at least 1".into()));
            }
            let load = |p: &PathBuf| {
                retrieval::read_trec_run(p).map_err(|e| {
                    CliError::Data(format!("{}: {e}", p.display()))
                })
            };
            let runs_in = load(&run_in)?;
            let runs_ex = load(&run_ex)?;
            let runs_main = load(&run_main)?;
            let by_id = |runs: &[retrieval::ScoredRun]| {
                runs.iter()
                    .map(|r| (r.query_id.clone(), r.clone()))
                    .collect::<std::collections::BTreeMap<_, _>>()
            };
            let (map_in, map_ex, map_main) = (by_id(&runs_in), by_id(&runs_ex), by_id(&runs_main));
            let empty = |query_id: &str| retrieval::ScoredRun {
                query_id: query_id.to_string(),
                run_tag: tag.clone(),
                entries: Vec::new(),
            };
            let mut fused_runs = Vec::new();
            let mut query_ids: Vec<String> = map_in
                .keys()
                .chain(map_ex.keys())
                .chain(map_main.keys())
                .cloned()
                .collect();
            query_ids.sort();
            query_ids.dedup();
            for query_id in &query_ids {
                let r_in = map_in.get(query_id).cloned().unwrap_or_else(|| empty(query_id));
                let r_ex = map_ex.get(query_id).cloned().unwrap_or_else(|| empty(query_id));
                let r_main = map_main
                    .get(query_id)
                    .cloned()
                    .unwrap_or_else(|| empty(query_id));
                let matrix =
                    fusion::build_decision_matrix(&r_in, &r_ex, &r_main, pool_depth, &weights)
                        .map_err(|e| CliError::Data(e.to_string()))?;
                if matrix.rows.is_empty() {
                    fused_runs.push(empty(query_id));
                    continue;
                }
                if let Some(diag) = &diagnostics {
                    fusion::dump_diagnostics(&matrix, diag)
                        .map_err(|e| CliError::Data(e.to_string()))?;
                }
                let ranking =
                    fusion::topsis_rank(&matrix).map_err(|e| CliError::Data(e.to_string()))?;
                fused_runs.push(ranking.to_scored_run(&tag));
            }
            retrieval::write_trec_run_file(&fused_runs, &output)
                .map_err(|e| CliError::Data(e.to_string()))?;
            log::info!("fused {} queries into {}", fused_runs.len(), output.display());
            Ok(())
        }
        Command::Evaluate {
            run,
            qrels,
            k,
            threshold,
            exponential_gain,
            median,
            report,
        } => {
            if k == 0 {
                return Err(CliError::Config("k must be at least 1".into()));
            }
            let runs =
                retrieval::read_trec_run(&run).map_err(|e| CliError::Data(e.to_string()))?;
            let qrels =
                QrelSet::from_file(&qrels).map_err(|e| CliError::Data(e.to_string()))?;
            let config = EvalConfig {
                relevance_threshold: threshold,
                gain: if exponential_gain {
                    GainScheme::Exponential
                } else {
                    GainScheme::Linear
                },
            };
            let result = eval::evaluate_runs(&runs, &qrels, config);
            println!("{result}");
            if k != 10 {
                let ids = qrels.query_ids();
                let n = ids.len().max(1) as f64;
                let (mut ndcg_k, mut p_k) = (0.0, 0.0);
                for run in &runs {
                    ndcg_k += eval::ndcg_at_k(run, &qrels, k, config.gain);
                    p_k += eval::prec_at_k(run, &qrels, k, config.relevance_threshold);
                }
                println!("mean NDCG@{k} {:.4}  P@{k} {:.4}", ndcg_k / n, p_k / n);
            }
            if let Some(median_path) = median {
                let medians = eval::parse_median_file(&median_path)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                let per_query: std::collections::BTreeMap<String, f64> = result
                    .per_query
                    .iter()
                    .map(|(q, m)| (q.clone(), m.ndcg10))
                    .collect();
                let cmp = eval::compare_to_median(&per_query, &medians);
                println!(
                    "improved over median (NDCG@10): {}/{} ({:.1}%)",
                    cmp.improved,
                    cmp.total,
                    cmp.fraction() * 100.0
                );
            }
            if let Some(report_path) = report {
                let json = serde_json::to_string_pretty(&result)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                std::fs::write(&report_path, json).map_err(|e| CliError::Data(e.to_string()))?;
                log::info!("report written to {}", report_path.display());
            }
            Ok(())
        }
        Command::Run {
            config,
            index_prefix,
            queries,
            output,
            threads,
            provider,
            stoplist,
        } => {
            let config = RunConfig::from_file(&config)?;
            let output = output
                .or_else(|| config.output.clone())
                .ok_or_else(|| {
                    CliError::Config("no output path: pass --output or set output in the config".into())
                })?;
            let topics = pipeline::load_topics(&queries)?;
            let mut opts = PipelineOptions::new(index_prefix);
            opts.pipeline = stoplist.pipeline()?;
            opts.provider = provider.build()?;
            opts.threads = threads;
            let summary = pipeline::run_pipeline(&config, &opts, &topics, &output)?;
            log::info!(
                "run {}: {} queries, {} rows -> {}",
                config.run_name,
                summary.queries,
                summary.result_rows,
                output.display()
            );
            Ok(())
        }
    }
}
