//! Build an inverted index over one field view, persist and reload it,
//! then run a BM25 search.
//!
//! Run: `cargo run -p trialrank --example build_and_search`

use std::path::Path;

use trialrank::corpus::{ingest_corpus, EligibilityMarkers, FieldView};
use trialrank::index::{build_index, index_path, load_index, save_index};
use trialrank::retrieval::{search, Bm25Params};
use trialrank::textproc::TextPipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    let dir = tempfile::tempdir()?;
    let corpus = dir.path().join("corpus.jsonl");
    ingest_corpus(&fixtures.join("mini_corpus"), &EligibilityMarkers::default(), &corpus)?;

    let pipeline = TextPipeline::default_english();
    let index = build_index(&corpus, FieldView::IComb, &pipeline)?;
    println!(
        "built {} over {} docs, {} terms, avg doc len {:.1}",
        index.field_name(),
        index.num_docs(),
        index.num_terms(),
        index.avg_doc_len()
    );

    let path = index_path(&dir.path().join("mini"), FieldView::IComb);
    save_index(&index, &path)?;
    let index = load_index(&path)?;
    println!("round-tripped through {}\n", path.display());

    let note = "58 year old man with acute myocardial infarction, chest pain, \
                on aspirin and a beta blocker";
    let terms = pipeline.process(note);
    println!("query: {note}");
    println!("processed terms: {terms:?}\n");

    let run = search(&terms, &index, 5, "demo", Bm25Params::default())?;
    println!("top {} of {}:", run.entries.len(), index.num_docs());
    for entry in &run.entries {
        println!("  {:>2}. {}  {:.4}", entry.rank, entry.doc_id, entry.score);
    }
    Ok(())
}
