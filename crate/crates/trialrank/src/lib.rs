//! Clinical-trial retrieval engine.
//!
//! Matches verbose patient admission notes against a clinical-trial
//! collection: trials are indexed as five separate field views, queries are
//! optionally reduced to keywords with embedding-based maximal marginal
//! relevance, each view is scored with BM25, and the inclusion / exclusion /
//! main-section scores are fused with TOPSIS, where inclusion-criteria and
//! main-section relevance count as benefit criteria and exclusion-criteria
//! relevance counts as a cost. Rankings serialize to TREC run files and are
//! scored with the usual NDCG@k / P@k / reciprocal-rank metrics.
//!
//! # Modules
//!
//! - [`corpus`]: registry record parsing, eligibility splitting, the five
//!   field views, and the intermediate corpus file.
//! - [`textproc`] / [`porter`]: tokenization, stopwords, Porter stemming.
//! - [`index`]: immutable inverted indexes with a versioned on-disk format.
//! - [`retrieval`]: BM25 scoring, top-k search, the reranker plug point,
//!   and TREC run file IO.
//! - [`keywords`]: embedding providers, cosine similarity, and MMR keyword
//!   selection.
//! - [`fusion`]: TOPSIS decision matrices and closeness ranking.
//! - [`eval`]: qrels, rank metrics, and median comparison.
//! - [`config`] / [`pipeline`]: run configurations and end-to-end
//!   orchestration.
//!
//! # Quick start
//!
//! ```
//! use trialrank::index::build_index_from_texts;
//! use trialrank::retrieval::{search, Bm25Params};
//! use trialrank::textproc::TextPipeline;
//!
//! let pipeline = TextPipeline::default_english();
//! let index = build_index_from_texts(
//!     "i_comb",
//!     vec![
//!         ("NCT001", "aspirin therapy after myocardial infarction"),
//!         ("NCT002", "insulin titration in type 2 diabetes"),
//!     ],
//!     &pipeline,
//! );
//! let terms = pipeline.process("heart attack patient taking aspirin");
//! let run = search(&terms, &index, 10, "demo", Bm25Params::default()).unwrap();
//! assert_eq!(run.entries[0].doc_id, "NCT001");
//! ```
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p trialrank --example ingest_corpus
//! cargo run -p trialrank --example build_and_search
//! cargo run -p trialrank --example extract_keywords
//! cargo run -p trialrank --example topsis_fusion
//! cargo run -p trialrank --example evaluate_run
//! cargo run -p trialrank --example reproduce_runs
//! ```
//!
//! The `trialrank` binary exposes the same stages as subcommands
//! (`ingest`, `build-index`, `extract-keywords`, `search`, `fuse`,
//! `evaluate`, `run`).

pub mod config;
pub mod corpus;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod keywords;
pub mod pipeline;
pub mod porter;
pub mod retrieval;
pub mod textproc;

pub use config::{RunConfig, RelevanceModel, QueryRepr};
pub use corpus::{FieldView, FieldViews, TrialDoc};
pub use index::PostingsIndex;
pub use keywords::{EmbeddingProvider, EmbeddingVector, KeywordConfig};
pub use retrieval::{Bm25Params, Query, ScoredRun};
pub use textproc::{Stoplist, TextPipeline};
