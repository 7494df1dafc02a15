//! Execute the bundled R1/R2/R3 run configurations end to end on the
//! mini corpus and evaluate them: R1 is keyword BM25 over the combined
//! index, R2/R3 are TOPSIS fusions of the per-criterion views for the
//! verbose and keyword query representations.
//!
//! Run: `cargo run -p trialrank --example reproduce_runs`

use std::path::Path;

use trialrank::config::RunConfig;
use trialrank::corpus::{ingest_corpus, EligibilityMarkers, FieldView};
use trialrank::eval::{evaluate_runs, EvalConfig, QrelSet};
use trialrank::index::{build_index, index_path, save_index};
use trialrank::pipeline::{load_topics, run_pipeline, PipelineOptions};
use trialrank::retrieval::read_trec_run;
use trialrank::textproc::TextPipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    let dir = tempfile::tempdir()?;

    let corpus = dir.path().join("corpus.jsonl");
    let stats = ingest_corpus(&fixtures.join("mini_corpus"), &EligibilityMarkers::default(), &corpus)?;
    println!("corpus: {} trials", stats.written);

    let text_pipeline = TextPipeline::default_english();
    let prefix = dir.path().join("mini");
    for view in FieldView::ALL {
        let index = build_index(&corpus, view, &text_pipeline)?;
        save_index(&index, &index_path(&prefix, view))?;
    }
    println!("indexes: all five views built under {}\n", prefix.display());

    let queries = load_topics(&fixtures.join("topics.tsv"))?;
    let qrels = QrelSet::from_file(&fixtures.join("mini_qrels.txt"))?;

    for name in ["r1", "r2", "r3"] {
        let config = RunConfig::from_file(&fixtures.join(format!("configs/{name}.cfg")))?;
        let opts = PipelineOptions::new(prefix.clone());
        let out = dir.path().join(format!("{name}.trec"));
        let summary = run_pipeline(&config, &opts, &queries, &out)?;
        println!(
            "== {} ({}, {} queries, {} rows)",
            config.run_name,
            config.relevance_model,
            summary.queries,
            summary.result_rows
        );
        let runs = read_trec_run(&out)?;
        for run in &runs {
            let top = &run.entries[0];
            println!(
                "   topic {}: top hit {} ({:.4})",
                run.query_id, top.doc_id, top.score
            );
        }
        let report = evaluate_runs(&runs, &qrels, EvalConfig::default());
        println!(
            "   mean NDCG@10 {:.4} | NDCG@5 {:.4} | P@10 {:.4} | RR {:.4}\n",
            report.mean.ndcg10, report.mean.ndcg5, report.mean.p10, report.mean.rr
        );
    }
    Ok(())
}
